#pragma once

// Paired complementary cycle training of G_f, G_b, D(t+step) and D(t):
// per-step updates, epoch loop, and directory checkpoints.

#include <torch/torch.h>
#include <torch/version.h>

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nowcast/hsr_data.hpp"
#include "nowcast/losses.hpp"
#include "nowcast/networks.hpp"
#include "nowcast/tensor_bridge.hpp"

namespace nowcast {

struct TrainConfig {
  LossWeights weights;
  double theta = 30.0;  // mm/h
  double epsilon = 0.0;
  TorrentialSurrogate tor_surrogate;
  double learning_rate = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 16;
  int epochs = 200;
  std::uint64_t seed = 0;
  bool enable_connection = true;
  bool enable_torrential = true;
  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  double cap = kDefaultCap;

  void validate() const {
    weights.validate();
    generator.validate();
    discriminator.validate();
    require_cap(cap);
    if (!(theta > 0.0) || !std::isfinite(theta)) throw UsageError("theta must be positive");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw UsageError("epsilon must be >= 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw UsageError("learning rate must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw UsageError("Adam betas must be in [0, 1)");
    if (batch_size < 1) throw UsageError("batch_size must be positive");
    if (epochs < 0) throw UsageError("epochs must be >= 0");
    if (generator.in_channels != discriminator.in_channels)
      throw UsageError("generator and discriminator channel counts differ");
  }

  // Disabled loss families enter the objective with weight zero.
  LossWeights effective_weights() const {
    LossWeights w = weights;
    if (!enable_connection) w.lambda_con = 0.0;
    if (!enable_torrential) w.lambda_tor = 0.0;
    return w;
  }

  // θ applied in normalized space.
  TorrentialConfig torrential() const {
    return {normalized_threshold(theta, cap), epsilon, tor_surrogate};
  }
};

struct LossRecord {
  double adv_d_future = 0, adv_d_past = 0;
  double adv_g_f = 0, adv_g_b = 0;
  double cyc = 0;
  double con_f = 0, con_b = 0;
  double tor_f = 0, tor_b = 0;
  double total_g_f = 0, total_g_b = 0;

  std::vector<std::pair<const char*, double>> items() const {
    return {{"adv_d_future", adv_d_future}, {"adv_d_past", adv_d_past}, {"adv_g_f", adv_g_f},
            {"adv_g_b", adv_g_b},           {"cyc", cyc},               {"con_f", con_f},
            {"con_b", con_b},               {"tor_f", tor_f},           {"tor_b", tor_b},
            {"total_g_f", total_g_f},       {"total_g_b", total_g_b}};
  }

  bool finite() const {
    for (const auto& [name, v] : items())
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const LossRecord&) const = default;
};

// Tab-separated training-log line: "epoch<TAB>step<TAB>name=value...".
inline std::string format_log_line(int epoch, int step, const LossRecord& r) {
  std::string line = std::to_string(epoch) + '\t' + std::to_string(step);
  char buf[64];
  for (const auto& [name, v] : r.items()) {
    std::snprintf(buf, sizeof buf, "\t%s=%.9g", name, v);
    line += buf;
  }
  return line;
}

class TrainingDiverged : public DivergenceError {
 public:
  explicit TrainingDiverged(const LossRecord& r)
      : DivergenceError("non-finite loss: " + format_log_line(0, 0, r)), record(r) {}
  LossRecord record;
};

namespace detail {

inline std::unique_ptr<torch::optim::Adam> make_adam(torch::nn::Module& net, const TrainConfig& c) {
  return std::make_unique<torch::optim::Adam>(
      net.parameters(), torch::optim::AdamOptions(c.learning_rate).betas({c.adam_beta1, c.adam_beta2}));
}

inline void set_requires_grad(torch::nn::Module& net, bool on) {
  for (auto& p : net.parameters()) p.set_requires_grad(on);
}

}  // namespace detail

// The four networks, their optimizers and all state needed to resume.
struct ModelBundle {
  explicit ModelBundle(const TrainConfig& c) : config(c) {
    config.validate();
    torch::manual_seed(config.seed);
    g_f = build_generator(config.generator);
    g_b = build_generator(config.generator);
    d_future = build_discriminator(config.discriminator);
    d_past = build_discriminator(config.discriminator);
    opt_g_f = detail::make_adam(*g_f, config);
    opt_g_b = detail::make_adam(*g_b, config);
    opt_d_future = detail::make_adam(*d_future, config);
    opt_d_past = detail::make_adam(*d_past, config);
    shuffle_rng.seed(config.seed);
  }

  void train_mode(bool on) {
    g_f->train(on);
    g_b->train(on);
    d_future->train(on);
    d_past->train(on);
  }

  TrainConfig config;
  Generator g_f{nullptr}, g_b{nullptr};
  Discriminator d_future{nullptr}, d_past{nullptr};
  std::unique_ptr<torch::optim::Adam> opt_g_f, opt_g_b, opt_d_future, opt_d_past;
  int epoch = 0;
  std::mt19937_64 shuffle_rng;
};

// Cycle 1: real_i → G_f → fake_istep → G_b → cycled_i.
// Cycle 2: real_istep → G_b → fake_i → G_f → cycled_istep.
inline CycleBatch forward_cycles(ModelBundle& m, const torch::Tensor& real_i, const torch::Tensor& real_istep) {
  CycleBatch b;
  b.real_i = real_i;
  b.real_istep = real_istep;
  b.fake_istep = m.g_f->forward(real_i);
  b.cycled_i = m.g_b->forward(b.fake_istep);
  b.fake_i = m.g_b->forward(real_istep);
  b.cycled_istep = m.g_f->forward(b.fake_i);
  return b;
}

// Updates D(t+step) then D(t) on detached fakes; fills the real/fake scores.
inline void discriminator_step(ModelBundle& m, CycleBatch& b, LossRecord& rec) {
  auto update = [](Discriminator& d, torch::optim::Adam& opt, const torch::Tensor& real, const torch::Tensor& fake,
                   torch::Tensor& score_real, torch::Tensor& score_fake) {
    opt.zero_grad();
    score_real = d->forward(real);
    score_fake = d->forward(fake.detach());
    if (!torch::isfinite(score_real).all().item<bool>() || !torch::isfinite(score_fake).all().item<bool>())
      return std::numeric_limits<double>::quiet_NaN();
    auto loss = adv_loss_discriminator(score_real, score_fake);
    loss.backward();
    opt.step();
    return loss.item<double>();
  };
  rec.adv_d_future = update(m.d_future, *m.opt_d_future, b.real_istep, b.fake_istep, b.score_real_istep,
                            b.score_fake_istep);
  if (!std::isfinite(rec.adv_d_future)) return;
  rec.adv_d_past = update(m.d_past, *m.opt_d_past, b.real_i, b.fake_i, b.score_real_i, b.score_fake_i);
}

// Updates G_f and G_b with both discriminators frozen. One backward pass of
// L_adv(G_f) + L_adv(G_b) + λcyc·L_cyc + λcon·(L_con(G_f) + L_con(G_b)) +
// λtor·(L_tor(G_f) + L_tor(G_b)) yields ∂L(G_f)/∂θ_f and ∂L(G_b)/∂θ_b exactly:
// every term except the shared cycle loss depends on one generator only.
inline void generator_step(ModelBundle& m, CycleBatch& b, const LossWeights& w, const TorrentialConfig& tor,
                           LossRecord& rec) {
  detail::set_requires_grad(*m.d_future, false);
  detail::set_requires_grad(*m.d_past, false);
  m.opt_g_f->zero_grad();
  m.opt_g_b->zero_grad();

  b.score_fake_istep = m.d_future->forward(b.fake_istep);
  b.score_fake_i = m.d_past->forward(b.fake_i);
  if (!torch::isfinite(b.score_fake_istep).all().item<bool>() || !torch::isfinite(b.score_fake_i).all().item<bool>()) {
    rec.adv_g_f = rec.adv_g_b = rec.total_g_f = rec.total_g_b = std::numeric_limits<double>::quiet_NaN();
    detail::set_requires_grad(*m.d_future, true);
    detail::set_requires_grad(*m.d_past, true);
    return;
  }
  const auto cyc = cycle_loss(b);
  const auto lf = total_generator_loss(Direction::Forward, b, cyc, w, tor);
  const auto lb = total_generator_loss(Direction::Backward, b, cyc, w, tor);
  auto objective = lf.adv + lb.adv + w.lambda_cyc * cyc + w.lambda_con * (lf.con + lb.con) +
                   w.lambda_tor * (lf.tor + lb.tor);

  rec.adv_g_f = lf.adv.item<double>();
  rec.adv_g_b = lb.adv.item<double>();
  rec.cyc = cyc.item<double>();
  rec.con_f = lf.con.item<double>();
  rec.con_b = lb.con.item<double>();
  rec.tor_f = lf.tor.item<double>();
  rec.tor_b = lb.tor.item<double>();
  rec.total_g_f = lf.total.item<double>();
  rec.total_g_b = lb.total.item<double>();

  if (rec.finite()) {
    objective.backward();
    m.opt_g_f->step();
    m.opt_g_b->step();
  }
  detail::set_requires_grad(*m.d_future, true);
  detail::set_requires_grad(*m.d_past, true);
}

// One optimisation step on a batch of normalized pairs ([N, C, H, W] each).
inline LossRecord train_step(ModelBundle& m, const torch::Tensor& real_i, const torch::Tensor& real_istep) {
  if (!torch::isfinite(real_i).all().item<bool>() || !torch::isfinite(real_istep).all().item<bool>())
    throw DataError("training batch contains non-finite values");
  m.train_mode(true);
  LossRecord rec;
  auto batch = forward_cycles(m, real_i, real_istep);
  discriminator_step(m, batch, rec);
  if (!rec.finite()) throw TrainingDiverged(rec);
  generator_step(m, batch, m.config.effective_weights(), m.config.torrential(), rec);
  if (!rec.finite()) throw TrainingDiverged(rec);
  return rec;
}

// Loss values of the current networks on a batch, without any update.
inline LossRecord evaluate_losses(ModelBundle& m, const torch::Tensor& real_i, const torch::Tensor& real_istep) {
  torch::NoGradGuard no_grad;
  LossRecord rec;
  auto b = forward_cycles(m, real_i, real_istep);
  b.score_real_istep = m.d_future->forward(real_istep);
  b.score_fake_istep = m.d_future->forward(b.fake_istep);
  b.score_real_i = m.d_past->forward(real_i);
  b.score_fake_i = m.d_past->forward(b.fake_i);
  const auto w = m.config.effective_weights();
  const auto tor = m.config.torrential();
  rec.adv_d_future = total_discriminator_loss(Direction::Forward, b).item<double>();
  rec.adv_d_past = total_discriminator_loss(Direction::Backward, b).item<double>();
  const auto cyc = cycle_loss(b);
  const auto lf = total_generator_loss(Direction::Forward, b, cyc, w, tor);
  const auto lb = total_generator_loss(Direction::Backward, b, cyc, w, tor);
  rec.adv_g_f = lf.adv.item<double>();
  rec.adv_g_b = lb.adv.item<double>();
  rec.cyc = cyc.item<double>();
  rec.con_f = lf.con.item<double>();
  rec.con_b = lb.con.item<double>();
  rec.tor_f = lf.tor.item<double>();
  rec.tor_b = lb.tor.item<double>();
  rec.total_g_f = lf.total.item<double>();
  rec.total_g_b = lb.total.item<double>();
  return rec;
}

// ---------------------------------------------------------------------------
// Checkpoints: a directory holding manifest.txt (key=value) plus one libtorch
// archive per network and optimizer, and the RNG states.

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kNetworkNames[] = {"g_f", "g_b", "d_future", "d_past"};

inline std::string substrate_id() { return std::string("libtorch-") + TORCH_VERSION; }

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::pair<std::string, std::string>> checkpoint_entries(const ModelBundle& m) {
  const auto& c = m.config;
  const auto& g = c.generator;
  const auto& d = c.discriminator;
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"format_version", std::to_string(kCheckpointVersion)},
      {"substrate", substrate_id()},
      {"networks", "g_f,g_b,d_future,d_past"},
      {"seed", std::to_string(c.seed)},
      {"epoch", std::to_string(m.epoch)},
      {"epochs", std::to_string(c.epochs)},
      {"cap", fmt_double(c.cap)},
      {"theta", fmt_double(c.theta)},
      {"epsilon", fmt_double(c.epsilon)},
      {"lambda_cyc", fmt_double(c.weights.lambda_cyc)},
      {"lambda_con", fmt_double(c.weights.lambda_con)},
      {"lambda_tor", fmt_double(c.weights.lambda_tor)},
      {"enable_connection", b(c.enable_connection)},
      {"enable_torrential", b(c.enable_torrential)},
      {"learning_rate", fmt_double(c.learning_rate)},
      {"adam_beta1", fmt_double(c.adam_beta1)},
      {"adam_beta2", fmt_double(c.adam_beta2)},
      {"batch_size", std::to_string(c.batch_size)},
      {"generator.in_channels", std::to_string(g.in_channels)},
      {"generator.base_width", std::to_string(g.base_width)},
      {"generator.bottleneck_channels", std::to_string(g.bottleneck_channels)},
      {"generator.n_res_blocks", std::to_string(g.n_res_blocks)},
      {"generator.se_reduction", std::to_string(g.se_reduction)},
      {"generator.dropout_rate", fmt_double(g.dropout_rate)},
      {"generator.bn_momentum", fmt_double(g.bn_momentum)},
      {"generator.leaky_slope", fmt_double(g.leaky_slope)},
      {"discriminator.in_channels", std::to_string(d.in_channels)},
      {"discriminator.base_width", std::to_string(d.base_width)},
      {"discriminator.leaky_slope", fmt_double(d.leaky_slope)},
      {"discriminator.bn_momentum", fmt_double(d.bn_momentum)},
  };
}

inline std::map<std::string, std::string> read_key_values(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(file.string() + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

template <typename Fn>
void wrap_torch_io(const fs::path& file, Fn&& fn) {
  try {
    fn();
  } catch (const c10::Error& e) {
    throw DataError("corrupt or unreadable archive " + file.string() + ": " + e.what_without_backtrace());
  }
}

}  // namespace detail

inline void save_checkpoint(const ModelBundle& m, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "manifest.txt", std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint manifest in " + dir.string());
    for (const auto& [k, v] : detail::checkpoint_entries(m)) out << k << '=' << v << '\n';
    if (!out) throw DataError("checkpoint manifest write failed");
  }
  const torch::nn::Module* nets[] = {m.g_f.get(), m.g_b.get(), m.d_future.get(), m.d_past.get()};
  const torch::optim::Adam* opts[] = {m.opt_g_f.get(), m.opt_g_b.get(), m.opt_d_future.get(), m.opt_d_past.get()};
  for (int i = 0; i < 4; ++i) {
    const auto p = dir / (std::string(kNetworkNames[i]) + ".pt");
    const auto q = dir / (std::string(kNetworkNames[i]) + ".optim.pt");
    detail::wrap_torch_io(p, [&] {
      torch::serialize::OutputArchive a;
      nets[i]->save(a);
      a.save_to(p.string());
    });
    detail::wrap_torch_io(q, [&] {
      torch::serialize::OutputArchive a;
      opts[i]->save(a);
      a.save_to(q.string());
    });
  }
  auto state = at::detail::getDefaultCPUGenerator().get_state();
  detail::wrap_torch_io(dir / "rng_torch.pt", [&] { torch::save(state, (dir / "rng_torch.pt").string()); });
  std::ofstream rng(dir / "rng_shuffle.txt", std::ios::trunc);
  rng << m.shuffle_rng;
  if (!rng) throw DataError("cannot write shuffle RNG state");
}

inline TrainConfig config_from_checkpoint(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw DataError("checkpoint manifest lacks '" + k + "'");
    return it->second;
  };
  auto d = [&](const std::string& k) { return std::stod(get(k)); };
  auto i = [&](const std::string& k) { return std::stoi(get(k)); };
  TrainConfig c;
  c.seed = std::stoull(get("seed"));
  c.epochs = i("epochs");
  c.cap = d("cap");
  c.theta = d("theta");
  c.epsilon = d("epsilon");
  c.weights = {d("lambda_cyc"), d("lambda_con"), d("lambda_tor")};
  c.enable_connection = get("enable_connection") == "true";
  c.enable_torrential = get("enable_torrential") == "true";
  c.learning_rate = d("learning_rate");
  c.adam_beta1 = d("adam_beta1");
  c.adam_beta2 = d("adam_beta2");
  c.batch_size = i("batch_size");
  c.generator.in_channels = i("generator.in_channels");
  c.generator.base_width = i("generator.base_width");
  c.generator.bottleneck_channels = i("generator.bottleneck_channels");
  c.generator.n_res_blocks = i("generator.n_res_blocks");
  c.generator.se_reduction = i("generator.se_reduction");
  c.generator.dropout_rate = d("generator.dropout_rate");
  c.generator.bn_momentum = d("generator.bn_momentum");
  c.generator.leaky_slope = d("generator.leaky_slope");
  c.discriminator.in_channels = i("discriminator.in_channels");
  c.discriminator.base_width = i("discriminator.base_width");
  c.discriminator.leaky_slope = d("discriminator.leaky_slope");
  c.discriminator.bn_momentum = d("discriminator.bn_momentum");
  return c;
}

inline ModelBundle load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("checkpoint directory not found: " + dir.string());
  const auto kv = detail::read_key_values(dir / "manifest.txt");
  auto version = kv.find("format_version");
  if (version == kv.end() || version->second != std::to_string(kCheckpointVersion))
    throw DataError("checkpoint format version mismatch in " + dir.string());
  TrainConfig config;
  try {
    config = config_from_checkpoint(kv);
  } catch (const std::logic_error& e) {  // stoi/stod failures
    throw DataError("corrupt checkpoint manifest: " + std::string(e.what()));
  }
  ModelBundle m(config);
  m.epoch = std::stoi(kv.at("epoch"));
  torch::nn::Module* nets[] = {m.g_f.get(), m.g_b.get(), m.d_future.get(), m.d_past.get()};
  torch::optim::Adam* opts[] = {m.opt_g_f.get(), m.opt_g_b.get(), m.opt_d_future.get(), m.opt_d_past.get()};
  for (int i = 0; i < 4; ++i) {
    const auto p = dir / (std::string(kNetworkNames[i]) + ".pt");
    const auto q = dir / (std::string(kNetworkNames[i]) + ".optim.pt");
    if (!fs::exists(p) || !fs::exists(q)) throw DataError("checkpoint lacks archive for " + std::string(kNetworkNames[i]));
    detail::wrap_torch_io(p, [&] {
      torch::serialize::InputArchive a;
      a.load_from(p.string());
      nets[i]->load(a);
    });
    detail::wrap_torch_io(q, [&] {
      torch::serialize::InputArchive a;
      a.load_from(q.string());
      opts[i]->load(a);
    });
  }
  torch::Tensor state;
  detail::wrap_torch_io(dir / "rng_torch.pt", [&] { torch::load(state, (dir / "rng_torch.pt").string()); });
  auto gen = at::detail::getDefaultCPUGenerator();
  gen.set_state(state);
  std::ifstream rng(dir / "rng_shuffle.txt");
  if (!(rng >> m.shuffle_rng)) throw DataError("corrupt shuffle RNG state in " + dir.string());
  return m;
}

// ---------------------------------------------------------------------------
// Epoch loop

using LogSink = std::function<void(const std::string& line)>;

inline fs::path checkpoint_path(const fs::path& out_dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%04d", epoch);
  return out_dir / name;
}

struct TrainOptions {
  fs::path out_dir;
  std::optional<fs::path> resume_from;
  LogSink log;  // receives one line per step; the lines also go to out_dir/train_log.tsv
};

// Runs seeded, shuffled epochs of train_step until config.epochs, writing a
// checkpoint after every epoch (and one for the initial state). Returns the
// final checkpoint directory. A resumed run keeps the checkpoint's config
// except for the epoch target.
inline fs::path train(const TrainConfig& config, const PairTensors& data, const TrainOptions& opts) {
  config.validate();
  if (data.size() == 0) throw DataError("empty dataset: no training pairs");
  fs::create_directories(opts.out_dir);

  ModelBundle m = opts.resume_from ? load_checkpoint(*opts.resume_from) : ModelBundle(config);
  m.config.epochs = config.epochs;
  fs::path last = opts.resume_from ? *opts.resume_from : checkpoint_path(opts.out_dir, 0);
  if (!opts.resume_from) save_checkpoint(m, last);

  std::ofstream log(opts.out_dir / "train_log.tsv", opts.resume_from ? std::ios::app : std::ios::trunc);
  std::vector<std::int64_t> order(static_cast<std::size_t>(data.size()));
  const auto bs = static_cast<std::size_t>(m.config.batch_size);
  while (m.epoch < m.config.epochs) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), m.shuffle_rng);
    int step = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<std::int64_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + bs)));
      const auto batch = data.select(idx);
      const auto rec = train_step(m, batch.earlier, batch.later);
      const auto line = format_log_line(m.epoch + 1, step++, rec);
      log << line << '\n';
      if (opts.log) opts.log(line);
    }
    ++m.epoch;
    last = checkpoint_path(opts.out_dir, m.epoch);
    save_checkpoint(m, last);
  }
  return last;
}

inline fs::path train(const TrainConfig& config, const std::vector<HsrPair>& pairs, const TrainOptions& opts) {
  for (const auto& p : pairs) require_model_grid(p.earlier.meta);
  return train(config, pair_tensors(pairs, config.cap), opts);
}

inline fs::path train(const TrainConfig& config, const DatasetManifest& manifest, const TrainOptions& opts,
                      GapPolicy gaps = GapPolicy::Skip) {
  return train(config, build_pairs(manifest, gaps), opts);
}

}  // namespace nowcast
