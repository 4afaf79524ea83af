#pragma once

// Generators (encoder, SE-residual body, decoder) and PatchGAN
// discriminators over libtorch.

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include "nowcast/errors.hpp"

namespace nowcast {

struct GeneratorSpec {
  int in_channels = 1;
  int base_width = 64;
  int bottleneck_channels = 256;
  int n_res_blocks = 16;
  int se_reduction = 16;
  double dropout_rate = 0.4;
  double bn_momentum = 0.8;  // weight kept on the running average per update
  double leaky_slope = 0.2;

  // Desk-scale generator: bottleneck four times the base width.
  static GeneratorSpec tiny(int width, int blocks) {
    GeneratorSpec s;
    s.base_width = width;
    s.bottleneck_channels = 4 * width;
    s.n_res_blocks = blocks;
    return s;
  }

  void validate() const {
    if (in_channels < 1 || base_width < 1 || bottleneck_channels < 1 || n_res_blocks < 1 || se_reduction < 1)
      throw UsageError("generator widths, block count and SE reduction must be positive");
    if (bottleneck_channels % se_reduction != 0)
      throw UsageError("bottleneck_channels must be divisible by se_reduction");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw UsageError("dropout_rate must be in [0, 1)");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw UsageError("bn_momentum must be in (0, 1)");
    if (!(leaky_slope > 0.0)) throw UsageError("leaky_slope must be positive");
  }
};

struct DiscriminatorSpec {
  int in_channels = 1;
  int base_width = 64;
  double leaky_slope = 0.2;
  double bn_momentum = 0.8;

  void validate() const {
    if (in_channels < 1 || base_width < 1) throw UsageError("discriminator widths must be positive");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw UsageError("bn_momentum must be in (0, 1)");
  }
};

namespace detail {

// libtorch weights the *new* batch statistic by its momentum, the opposite
// convention to a running-average momentum of 0.8.
inline torch::nn::BatchNorm2d batch_norm(int channels, double running_momentum) {
  return torch::nn::BatchNorm2d(torch::nn::BatchNorm2dOptions(channels).momentum(1.0 - running_momentum));
}

inline torch::nn::Conv2d conv(int in, int out, int k, int stride, bool reflect, bool bias) {
  auto opts = torch::nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).bias(bias);
  if (reflect) opts.padding_mode(torch::kReflect);
  return torch::nn::Conv2d(opts);
}

inline torch::nn::LeakyReLU leaky(double slope) {
  return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(slope));
}

}  // namespace detail

// Squeeze-and-excitation channel gate.
struct SqueezeExciteImpl : torch::nn::Module {
  SqueezeExciteImpl(int channels, int reduction)
      : reduce(register_module("reduce", torch::nn::Linear(channels, channels / reduction))),
        expand(register_module("expand", torch::nn::Linear(channels / reduction, channels))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    auto s = x.mean({2, 3});
    s = torch::sigmoid(expand(torch::relu(reduce(s))));
    return x * s.unsqueeze(-1).unsqueeze(-1);
  }

  torch::nn::Linear reduce, expand;
};
TORCH_MODULE(SqueezeExcite);

// conv-BN-LeakyReLU-dropout-conv-BN, SE gate on the residual branch, then the
// identity skip is added elementwise.
struct SeResidualBlockImpl : torch::nn::Module {
  SeResidualBlockImpl(int channels, const GeneratorSpec& spec)
      : conv1(register_module("conv1", detail::conv(channels, channels, 3, 1, true, false))),
        bn1(register_module("bn1", detail::batch_norm(channels, spec.bn_momentum))),
        act(register_module("act", detail::leaky(spec.leaky_slope))),
        dropout(register_module("dropout", torch::nn::Dropout(spec.dropout_rate))),
        conv2(register_module("conv2", detail::conv(channels, channels, 3, 1, true, false))),
        bn2(register_module("bn2", detail::batch_norm(channels, spec.bn_momentum))),
        se(register_module("se", SqueezeExcite(channels, spec.se_reduction))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    auto r = dropout(act(bn1(conv1(x))));
    r = se(bn2(conv2(r)));
    return x + r;
  }

  torch::nn::Conv2d conv1;
  torch::nn::BatchNorm2d bn1;
  torch::nn::LeakyReLU act;
  torch::nn::Dropout dropout;
  torch::nn::Conv2d conv2;
  torch::nn::BatchNorm2d bn2;
  SqueezeExcite se;
};
TORCH_MODULE(SeResidualBlock);

struct GeneratorImpl : torch::nn::Module {
  explicit GeneratorImpl(const GeneratorSpec& s) : spec(s) {
    spec.validate();
    const int b = spec.base_width, c = spec.bottleneck_channels;
    encoder = register_module(
        "encoder", torch::nn::Sequential(detail::conv(spec.in_channels, b, 7, 1, true, false),
                                         detail::batch_norm(b, spec.bn_momentum), detail::leaky(spec.leaky_slope),
                                         detail::conv(b, 2 * b, 3, 2, true, false),
                                         detail::batch_norm(2 * b, spec.bn_momentum), detail::leaky(spec.leaky_slope),
                                         detail::conv(2 * b, c, 3, 2, true, false),
                                         detail::batch_norm(c, spec.bn_momentum), detail::leaky(spec.leaky_slope)));
    body = register_module("body", torch::nn::Sequential());
    for (int i = 0; i < spec.n_res_blocks; ++i) body->push_back(SeResidualBlock(c, spec));
    auto up = [&](int in, int out) {
      return torch::nn::ConvTranspose2d(
          torch::nn::ConvTranspose2dOptions(in, out, 3).stride(2).padding(1).output_padding(1).bias(false));
    };
    decoder = register_module(
        "decoder", torch::nn::Sequential(up(c, 2 * b), detail::batch_norm(2 * b, spec.bn_momentum),
                                         detail::leaky(spec.leaky_slope), up(2 * b, b),
                                         detail::batch_norm(b, spec.bn_momentum), detail::leaky(spec.leaky_slope),
                                         detail::conv(b, spec.in_channels, 7, 1, true, true)));
  }

  // x: [N, in_channels, H, W] with H, W divisible by 4 and at least 8.
  torch::Tensor forward(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != spec.in_channels)
      throw DataError("generator expects [N, " + std::to_string(spec.in_channels) + ", H, W] input");
    if (x.size(2) % 4 != 0 || x.size(3) % 4 != 0 || x.size(2) < 8 || x.size(3) < 8)
      throw DataError("generator input sides must be multiples of 4 and at least 8");
    return torch::tanh(decoder->forward(body->forward(encoder->forward(x))));
  }

  GeneratorSpec spec;
  torch::nn::Sequential encoder{nullptr}, body{nullptr}, decoder{nullptr};
};
TORCH_MODULE(Generator);

// PatchGAN with a 31x31 receptive field; raw (unbounded) scores.
struct DiscriminatorImpl : torch::nn::Module {
  explicit DiscriminatorImpl(const DiscriminatorSpec& s) : spec(s) {
    spec.validate();
    const int b = spec.base_width;
    net = register_module(
        "net", torch::nn::Sequential(detail::conv(spec.in_channels, b, 3, 2, false, true),
                                     detail::leaky(spec.leaky_slope), detail::conv(b, 2 * b, 3, 2, false, false),
                                     detail::batch_norm(2 * b, spec.bn_momentum), detail::leaky(spec.leaky_slope),
                                     detail::conv(2 * b, 4 * b, 3, 2, false, false),
                                     detail::batch_norm(4 * b, spec.bn_momentum), detail::leaky(spec.leaky_slope),
                                     detail::conv(4 * b, 1, 3, 1, false, true)));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != spec.in_channels)
      throw DataError("discriminator expects [N, " + std::to_string(spec.in_channels) + ", H, W] input");
    return net->forward(x);
  }

  DiscriminatorSpec spec;
  torch::nn::Sequential net{nullptr};
};
TORCH_MODULE(Discriminator);

inline Generator build_generator(const GeneratorSpec& spec) { return Generator(spec); }
inline Discriminator build_discriminator(const DiscriminatorSpec& spec) { return Discriminator(spec); }

inline torch::Tensor forward_generator(Generator& g, const torch::Tensor& batch) { return g->forward(batch); }
inline torch::Tensor forward_discriminator(Discriminator& d, const torch::Tensor& batch) { return d->forward(batch); }

// Receptive field of the realized convolution stack, from the kernel sizes and
// strides stored in each layer.
inline std::int64_t receptive_field(const torch::nn::Module& net) {
  std::int64_t rf = 1, jump = 1;
  for (const auto& m : net.modules(/*include_self=*/false)) {
    if (const auto* c = m->as<torch::nn::Conv2d>()) {
      const auto k = (*c->options.kernel_size())[0];
      const auto s = (*c->options.stride())[0];
      rf += (k - 1) * jump;
      jump *= s;
    }
  }
  return rf;
}

inline std::int64_t parameter_count(const torch::nn::Module& net) {
  std::int64_t n = 0;
  for (const auto& p : net.parameters()) n += p.numel();
  return n;
}

// Stable FNV-1a over parameter bytes; used to assert which networks a step touched.
inline std::uint64_t parameter_hash(const torch::nn::Module& net) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : net.parameters()) {
    const auto t = p.detach().contiguous().cpu();
    const auto* bytes = static_cast<const unsigned char*>(t.data_ptr());
    const auto n = static_cast<std::size_t>(t.numel()) * t.element_size();
    for (std::size_t i = 0; i < n; ++i) h = (h ^ bytes[i]) * 1099511628211ULL;
  }
  return h;
}

}  // namespace nowcast
