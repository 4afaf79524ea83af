#pragma once

// Least-squares adversarial, cycle-consistency, connection and torrential
// losses, and the per-network total objectives built from them.

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "nowcast/errors.hpp"

namespace nowcast {

enum class Direction { Forward, Backward };  // G_f / D(t+step)  vs  G_b / D(t)

inline const char* to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_con = 10.0;
  double lambda_tor = 100.0;

  void validate() const {
    for (double w : {lambda_cyc, lambda_con, lambda_tor})
      if (!std::isfinite(w) || w < 0.0) throw UsageError("loss weights must be finite and non-negative");
  }
};

// Optional gradient path for the torrential term. The counted loss has zero
// gradient almost everywhere; when set, the surrogate's gradient is attached
// to the counted value (straight-through), and its value is ignored.
using TorrentialSurrogate =
    std::function<torch::Tensor(const torch::Tensor& real, const torch::Tensor& fake, double threshold)>;

struct TorrentialConfig {
  double threshold = 30.0;  // in the value space of the tensors it is applied to
  double epsilon = 0.0;
  TorrentialSurrogate surrogate;

  void validate() const {
    if (!std::isfinite(threshold)) throw UsageError("torrential threshold must be finite");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw UsageError("epsilon must be finite and >= 0");
  }
};

// Physical threshold mapped through the [-1, 1] normalization.
inline double normalized_threshold(double threshold_mm_per_h, double cap) {
  return 2.0 * std::min(threshold_mm_per_h, cap) / cap - 1.0;
}

namespace detail {

inline void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (!a.sizes().equals(b.sizes())) throw DataError(std::string(what) + ": shape mismatch");
}

inline void require_finite(const torch::Tensor& t, const char* what) {
  if (!torch::isfinite(t.detach()).all().item<bool>()) throw DataError(std::string(what) + ": non-finite input");
}

}  // namespace detail

inline torch::Tensor mean_l1(const torch::Tensor& a, const torch::Tensor& b) {
  detail::require_same_shape(a, b, "mean_l1");
  return (a - b).abs().mean();
}

// ½·E[(δ_real − 1)²] + ½·E[δ_fake²]
inline torch::Tensor adv_loss_discriminator(const torch::Tensor& scores_real, const torch::Tensor& scores_fake) {
  detail::require_same_shape(scores_real, scores_fake, "adv_loss_discriminator");
  detail::require_finite(scores_real, "adv_loss_discriminator");
  detail::require_finite(scores_fake, "adv_loss_discriminator");
  return 0.5 * (scores_real - 1.0).pow(2).mean() + 0.5 * scores_fake.pow(2).mean();
}

// ½·E[(δ_fake − 1)²]
inline torch::Tensor adv_loss_generator(const torch::Tensor& scores_fake) {
  detail::require_finite(scores_fake, "adv_loss_generator");
  return 0.5 * (scores_fake - 1.0).pow(2).mean();
}

// Tensors of one training step. "_i" is t_i, "_istep" is t_{i+step}.
struct CycleBatch {
  torch::Tensor real_i, fake_i, cycled_i;
  torch::Tensor real_istep, fake_istep, cycled_istep;
  torch::Tensor score_real_i, score_fake_i;          // D(t_i)
  torch::Tensor score_real_istep, score_fake_istep;  // D(t_{i+step})
};

inline torch::Tensor cycle_loss(const CycleBatch& b) {
  return mean_l1(b.cycled_istep, b.real_istep) + mean_l1(b.cycled_i, b.real_i);
}

inline torch::Tensor connection_loss(const torch::Tensor& fake, const torch::Tensor& real) {
  return mean_l1(fake, real);
}

// 1 − CSI of the threshold masks over the whole batch, plus ε; exactly ε
// when neither tensor reaches the threshold anywhere.
inline double torrential_loss(const torch::Tensor& real, const torch::Tensor& fake, const TorrentialConfig& cfg) {
  detail::require_same_shape(real, fake, "torrential_loss");
  const auto a = real.detach() >= cfg.threshold;
  const auto b = fake.detach() >= cfg.threshold;
  const auto total = torch::logical_or(a, b).sum().item<std::int64_t>();
  if (total == 0) return 0.0 + cfg.epsilon;
  const auto hits = torch::logical_and(a, b).sum().item<std::int64_t>();
  const double csi = static_cast<double>(hits) / static_cast<double>(total);
  return std::abs(1.0 - csi) + cfg.epsilon;
}

// The torrential loss as a graph node: the counted value, with the
// surrogate's gradient attached when one is configured.
inline torch::Tensor torrential_term(const torch::Tensor& real, const torch::Tensor& fake, const TorrentialConfig& cfg) {
  auto value = torch::tensor(torrential_loss(real, fake, cfg), fake.options().requires_grad(false));
  if (!cfg.surrogate) return value;
  auto s = cfg.surrogate(real, fake, cfg.threshold);
  return value + (s - s.detach());
}

template <typename T>
T weighted_total(const T& adv, const T& cyc, const T& con, const T& tor, const LossWeights& w) {
  return adv + w.lambda_cyc * cyc + w.lambda_con * con + w.lambda_tor * tor;
}

struct GeneratorLoss {
  torch::Tensor adv, cyc, con, tor, total;
};

// L(G_f) or L(G_b). `cyc` is the shared cycle-consistency term of the step.
inline GeneratorLoss total_generator_loss(Direction dir, const CycleBatch& b, const torch::Tensor& cyc,
                                          const LossWeights& w, const TorrentialConfig& tor_cfg) {
  const bool fwd = dir == Direction::Forward;
  GeneratorLoss l;
  l.adv = adv_loss_generator(fwd ? b.score_fake_istep : b.score_fake_i);
  l.cyc = cyc;
  l.con = fwd ? connection_loss(b.fake_istep, b.real_istep) : connection_loss(b.fake_i, b.real_i);
  l.tor = fwd ? torrential_term(b.real_istep, b.fake_istep, tor_cfg) : torrential_term(b.real_i, b.fake_i, tor_cfg);
  l.total = weighted_total(l.adv, l.cyc, l.con, l.tor, w);
  return l;
}

inline GeneratorLoss total_generator_loss(Direction dir, const CycleBatch& b, const LossWeights& w,
                                          const TorrentialConfig& tor_cfg) {
  return total_generator_loss(dir, b, cycle_loss(b), w, tor_cfg);
}

// L(D(t+step)) or L(D(t)): the adversarial term alone.
inline torch::Tensor total_discriminator_loss(Direction dir, const CycleBatch& b) {
  return dir == Direction::Forward ? adv_loss_discriminator(b.score_real_istep, b.score_fake_istep)
                                   : adv_loss_discriminator(b.score_real_i, b.score_fake_i);
}

}  // namespace nowcast
