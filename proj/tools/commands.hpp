#pragma once

// Command implementations behind the pct_nowcast executable. Each command is
// a thin wrapper over one library operation; run_cli maps errors to exit codes.

#include <torch/torch.h>

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nowcast/ablation.hpp"
#include "nowcast/forecast.hpp"
#include "nowcast/metrics.hpp"
#include "nowcast/synth.hpp"
#include "nowcast/trainer.hpp"
#include "plot.hpp"

namespace nowcast::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kDiverged = 3 };

// ---------------------------------------------------------------------------
// RunConfig: every setting as a key=value string, layered
// defaults < PCT_NOWCAST_SEED < config file < flags.

struct Key {
  const char* name;
  const char* fallback;
  const char* help;
};

inline const std::vector<Key>& keys() {
  static const std::vector<Key> k{
      {"seed", "0", "RNG seed"},
      {"data_dir", "", "dataset directory (manifest.tsv)"},
      {"out_dir", "", "output directory"},
      {"pairs", "", "pair manifest written by prepare"},
      {"step", "2", "pair offset in frames"},
      {"cap", "100", "mm/h mapped to +1"},
      {"epochs", "200", "training epochs"},
      {"batch_size", "16", "training batch size"},
      {"lr", "0.0002", "Adam learning rate"},
      {"beta1", "0.5", "Adam beta1"},
      {"beta2", "0.999", "Adam beta2"},
      {"lambda_cyc", "10", "cycle-consistency weight"},
      {"lambda_con", "10", "connection weight"},
      {"lambda_tor", "100", "torrential weight"},
      {"theta", "30", "torrential threshold, mm/h"},
      {"epsilon", "0", "torrential offset"},
      {"connection", "true", "enable the connection loss"},
      {"torrential", "true", "enable the torrential loss"},
      {"gen_width", "64", "generator base width"},
      {"gen_blocks", "16", "SE-residual blocks"},
      {"gen_bottleneck", "0", "bottleneck channels (0 = 4 x width)"},
      {"se_reduction", "16", "SE reduction ratio"},
      {"dropout", "0.4", "residual-block dropout"},
      {"disc_width", "64", "discriminator base width"},
      {"checkpoint", "", "checkpoint directory (train: resume from it)"},
      {"method", "pct", "forecast method: pct or persistence"},
      {"issue_time", "", "ISO-8601 issue time (default: last frame / from forecast manifest)"},
      {"n_steps", "12", "forecast iterations"},
      {"step_minutes", "10", "minutes per forecast iteration"},
      {"horizon_minutes", "120", "longest allowed lead"},
      {"thresholds", "0.5,30", "CSI thresholds, mm/h"},
      {"forecast_dir", "", "forecast directory"},
      {"truth_dir", "", "truth dataset directory"},
      {"eval_dir", "", "held-out dataset for ablate"},
      {"report", "", "report file (default: <out_dir>/report.csv)"},
      {"plot_scale", "4", "pixels per grid cell"},
      {"synth_height", "64", "synthetic grid rows"},
      {"synth_width", "64", "synthetic grid columns"},
      {"synth_frames", "12", "frames per synthetic sequence"},
      {"synth_sequences", "10", "synthetic sequences"},
      {"synth_blobs", "4", "blobs per sequence"},
      {"velocity_x", "1", "columns per frame"},
      {"velocity_y", "1", "rows per frame"},
      {"blob_sigma", "4", "blob width, cells"},
      {"amp_min", "1", "smallest blob peak, mm/h"},
      {"amp_max", "50", "largest blob peak, mm/h"},
      {"decay", "1", "per-frame intensity factor"},
      {"heavy_fraction", "0.25", "fraction of blobs peaking above heavy_threshold"},
      {"heavy_threshold", "30", "heavy-rain peak, mm/h"},
      {"cadence_minutes", "5", "minutes between frames"},
      {"start_time", "2021-07-01T00:00:00Z", "first synthetic timestamp"},
  };
  return k;
}

inline std::string canonical_key(std::string k) {
  for (auto& c : k)
    if (c == '-') c = '_';
  return k;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : keys()) values_[k.name] = k.fallback;
  }

  void set(const std::string& key, const std::string& value, const std::string& origin) {
    const auto k = canonical_key(key);
    if (!values_.count(k)) throw UsageError("unknown setting '" + key + "' (" + origin + ")");
    values_[k] = value;
  }

  void load_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw UsageError("cannot open config file " + file.string());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto b = line.find_first_not_of(" \t\r"), e = line.find_last_not_of(" \t\r");
      if (b == std::string::npos) continue;
      line = line.substr(b, e - b + 1);
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw UsageError(file.string() + ":" + std::to_string(n) + ": expected key=value");
      auto trim = [](std::string s) {
        const auto x = s.find_first_not_of(" \t"), y = s.find_last_not_of(" \t");
        return x == std::string::npos ? std::string{} : s.substr(x, y - x + 1);
      };
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), file.string() + ":" + std::to_string(n));
    }
  }

  const std::string& str(const std::string& k) const { return values_.at(k); }

  std::string required(const std::string& k) const {
    if (str(k).empty()) throw UsageError("--" + flag_name(k) + " is required");
    return str(k);
  }

  long long integer(const std::string& k) const {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(str(k), &used);
      if (used == str(k).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(k + "='" + str(k) + "' is not an integer");
  }

  int int32(const std::string& k) const {
    const auto v = integer(k);
    if (v < -2147483647LL || v > 2147483647LL) throw UsageError(k + " out of range");
    return static_cast<int>(v);
  }

  std::uint64_t u64(const std::string& k) const {
    try {
      std::size_t used = 0;
      if (!str(k).empty() && str(k).front() != '-') {
        const auto v = std::stoull(str(k), &used);
        if (used == str(k).size()) return v;
      }
    } catch (const std::exception&) {
    }
    throw UsageError(k + "='" + str(k) + "' is not an unsigned integer");
  }

  double real(const std::string& k) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(str(k), &used);
      if (used == str(k).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(k + "='" + str(k) + "' is not a number");
  }

  bool flag(const std::string& k) const {
    const auto& v = str(k);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError(k + "='" + v + "' is not a boolean");
  }

  std::vector<double> reals(const std::string& k) const {
    std::vector<double> out;
    std::stringstream s(str(k));
    std::string item;
    while (std::getline(s, item, ',')) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw UsageError(k + ": '" + item + "' is not a number");
      }
    }
    if (out.empty()) throw UsageError(k + " must list at least one value");
    return out;
  }

  void print(std::ostream& out) const {
    out << "# effective config\n";
    for (const auto& k : keys()) out << "# " << k.name << '=' << values_.at(k.name) << '\n';
  }

  static std::string flag_name(std::string k) {
    for (auto& c : k)
      if (c == '_') c = '-';
    return k;
  }

 private:
  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Module configs built from a RunConfig; each is validated here, before work.

inline TrainConfig train_config(const RunConfig& rc) {
  TrainConfig c;
  c.seed = rc.u64("seed");
  c.cap = rc.real("cap");
  c.epochs = rc.int32("epochs");
  c.batch_size = rc.int32("batch_size");
  c.learning_rate = rc.real("lr");
  c.adam_beta1 = rc.real("beta1");
  c.adam_beta2 = rc.real("beta2");
  c.weights = {rc.real("lambda_cyc"), rc.real("lambda_con"), rc.real("lambda_tor")};
  c.theta = rc.real("theta");
  c.epsilon = rc.real("epsilon");
  c.enable_connection = rc.flag("connection");
  c.enable_torrential = rc.flag("torrential");
  const int width = rc.int32("gen_width");
  c.generator.base_width = width;
  c.generator.n_res_blocks = rc.int32("gen_blocks");
  const int bottleneck = rc.int32("gen_bottleneck");
  c.generator.bottleneck_channels = bottleneck > 0 ? bottleneck : 4 * width;
  c.generator.se_reduction = rc.int32("se_reduction");
  c.generator.dropout_rate = rc.real("dropout");
  c.discriminator.base_width = rc.int32("disc_width");
  c.validate();
  return c;
}

inline SynthConfig synth_config(const RunConfig& rc) {
  SynthConfig c;
  const auto h = rc.integer("synth_height"), w = rc.integer("synth_width"), cad = rc.integer("cadence_minutes");
  if (h < 1 || w < 1 || cad < 1 || h > 1 << 16 || w > 1 << 16) throw UsageError("synthetic grid and cadence must be positive");
  c.meta = {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w), 1.0f, static_cast<std::uint32_t>(cad)};
  c.n_frames = rc.int32("synth_frames");
  c.n_blobs = rc.int32("synth_blobs");
  c.velocity = {rc.real("velocity_x"), rc.real("velocity_y")};
  c.blob_sigma = rc.real("blob_sigma");
  c.amplitude_min = rc.real("amp_min");
  c.amplitude_max = rc.real("amp_max");
  c.decay_per_frame = rc.real("decay");
  c.heavy_rain_fraction = rc.real("heavy_fraction");
  c.heavy_threshold = rc.real("heavy_threshold");
  c.seed = rc.u64("seed");
  try {
    c.start = parse_iso8601(rc.str("start_time"));
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  c.validate();
  return c;
}

inline int step_of(const RunConfig& rc) {
  const int step = rc.int32("step");
  if (step < 1) throw UsageError("step must be >= 1");
  return step;
}

inline std::vector<double> thresholds_of(const RunConfig& rc) {
  auto t = rc.reals("thresholds");
  for (double v : t)
    if (!(v > 0.0)) throw UsageError("thresholds must be positive");
  return t;
}

inline std::optional<Timestamp> issue_time_of(const RunConfig& rc) {
  if (rc.str("issue_time").empty()) return std::nullopt;
  try {
    return parse_iso8601(rc.str("issue_time"));
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

inline DatasetManifest open_dataset(const fs::path& dir, int step = 2) {
  const auto file = fs::is_directory(dir) ? dir / kManifestName : dir;
  if (!fs::exists(file)) throw DataError("no manifest at " + file.string());
  return read_manifest(file, step);
}

// ---------------------------------------------------------------------------
// Pair manifests: "# pairs step=N" then earlier<TAB>path<TAB>later<TAB>path.

inline constexpr const char* kPairsName = "pairs.tsv";

inline void write_pairs(const DatasetManifest& m, const std::vector<std::size_t>& earlier_idx, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out << "# pairs step=" << m.step << " count=" << earlier_idx.size() << '\n';
  for (auto i : earlier_idx) {
    const auto& a = m.entries[i];
    const auto& b = m.entries[i + static_cast<std::size_t>(m.step)];
    out << format_iso8601(a.timestamp) << '\t' << fs::absolute(m.resolve(a)).lexically_normal().generic_string()
        << '\t' << format_iso8601(b.timestamp) << '\t'
        << fs::absolute(m.resolve(b)).lexically_normal().generic_string() << '\n';
  }
}

inline std::vector<HsrPair> read_pairs(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open pair manifest " + file.string());
  std::vector<HsrPair> pairs;
  std::string line;
  int step = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto p = line.find("step=");
      if (p != std::string::npos) step = std::atoi(line.c_str() + p + 5);
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream s(line);
    for (std::string c; std::getline(s, c, '\t');) cols.push_back(c);
    if (cols.size() != 4) throw DataError(file.string() + ": expected 4 tab-separated columns");
    HsrPair p{read_field(cols[1]), read_field(cols[3]), step};
    if (p.earlier.timestamp != parse_iso8601(cols[0]) || p.later.timestamp != parse_iso8601(cols[2]))
      throw DataError(file.string() + ": header timestamp disagrees with pair manifest");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

// Indices i of the manifest entries that start a pair, under the same rules as
// build_pairs (cadence gaps skipped, identical pairs dropped).
inline std::vector<std::size_t> pair_starts(const DatasetManifest& m, const std::vector<RainField>& frames) {
  std::vector<std::size_t> idx;
  const auto step = static_cast<std::size_t>(m.step);
  for (std::size_t i = 0; i + step < frames.size(); ++i) {
    const auto& a = frames[i];
    const auto& b = frames[i + step];
    if (!(a.meta == b.meta)) throw DataError("frames in one sequence must share grid metadata");
    if (b.timestamp - a.timestamp != Timestamp(m.step) * a.meta.cadence_minutes * 60) continue;
    if (same_values(a.values, b.values)) continue;
    idx.push_back(i);
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Commands

struct Context {
  RunConfig config;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
};

inline int cmd_synth(const Context& ctx) {
  const auto& rc = ctx.config;
  const auto cfg = synth_config(rc);
  const fs::path out = rc.required("out_dir");
  const auto n = rc.int32("synth_sequences");
  if (n < 1) throw UsageError("synth_sequences must be positive");
  const auto m = write_synth_dataset(SynthDataset{cfg, n}, out);
  *ctx.out << "wrote " << m.entries.size() << " frames to " << out.string() << '\n';
  return kOk;
}

inline int cmd_prepare(const Context& ctx) {
  const auto& rc = ctx.config;
  const int step = step_of(rc);
  const auto m = open_dataset(rc.required("data_dir"), step);
  const fs::path out = rc.required("out_dir");
  const auto frames = load_frames(m);
  const auto idx = pair_starts(m, frames);
  if (idx.empty()) throw DataError("empty dataset: no pairs at step " + std::to_string(step));
  for (auto i : idx) require_model_grid(frames[i].meta);
  fs::create_directories(out);
  write_pairs(m, idx, out / kPairsName);
  *ctx.out << "wrote " << idx.size() << " pairs to " << (out / kPairsName).string() << '\n';
  return kOk;
}

inline std::vector<HsrPair> training_pairs(const RunConfig& rc) {
  if (!rc.str("pairs").empty()) return read_pairs(rc.str("pairs"));
  return build_pairs(open_dataset(rc.required("data_dir"), step_of(rc)));
}

inline int cmd_train(const Context& ctx) {
  const auto& rc = ctx.config;
  const auto cfg = train_config(rc);
  const fs::path out = rc.required("out_dir");
  const auto pairs = training_pairs(rc);
  if (pairs.empty()) throw DataError("empty dataset: no training pairs");
  std::optional<fs::path> resume;
  if (!rc.str("checkpoint").empty()) resume = fs::path(rc.str("checkpoint"));
  std::ostream& log = *ctx.out;
  const auto last = train(cfg, pairs, {out, resume, [&](const std::string& l) { log << l << '\n'; }});
  *ctx.out << "checkpoint " << last.string() << '\n';
  return kOk;
}

inline int cmd_forecast(const Context& ctx) {
  const auto& rc = ctx.config;
  const auto m = open_dataset(rc.required("data_dir"));
  if (m.entries.empty()) throw DataError("dataset has no frames");
  const auto issue = issue_time_of(rc).value_or(m.entries.back().timestamp);
  const ManifestEntry* entry = nullptr;
  for (const auto& e : m.entries)
    if (e.timestamp == issue) entry = &e;
  if (!entry) throw DataError("no frame valid at " + format_iso8601(issue));
  const auto initial = read_field(m.resolve(*entry));
  const fs::path out = rc.required("out_dir");
  const auto method = rc.str("method");

  ForecastRequest req{initial, rc.int32("n_steps"), rc.int32("step_minutes"), rc.real("cap"),
                      rc.int32("horizon_minutes")};
  req.validate();
  std::vector<RainField> frames;
  if (method == "persistence") {
    frames = persistence_baseline(initial, req.n_steps, req.step_minutes);
  } else if (method == "pct") {
    auto bundle = load_checkpoint(rc.required("checkpoint"));
    req.cap = bundle.config.cap;  // the normalization the model was trained under
    bundle.g_f->eval();
    frames = forecast_iterative(bundle.g_f, req);
  } else {
    throw UsageError("unknown method '" + method + "' (pct or persistence)");
  }
  write_forecast(frames, issue, out, method);
  *ctx.out << "wrote " << frames.size() << " leads to " << out.string() << '\n';
  return kOk;
}

inline int cmd_evaluate(const Context& ctx) {
  const auto& rc = ctx.config;
  const auto fm = open_dataset(rc.required("forecast_dir"));
  const auto tm = open_dataset(rc.required("truth_dir"));
  const auto forecasts = load_frames(fm);
  const auto truths = load_frames(tm);
  if (forecasts.empty()) throw DataError("forecast directory has no frames");

  Timestamp issue = 0;
  if (auto t = issue_time_of(rc)) {
    issue = *t;
  } else if (auto s = manifest_comment_value(fm, "issue"); !s.empty()) {
    issue = parse_iso8601(s);
  } else {
    issue = forecasts.front().timestamp - Timestamp(rc.int32("step_minutes")) * 60;
  }
  auto method = manifest_comment_value(fm, "method");
  if (method.empty()) method = "forecast";

  EvaluateOptions opts;
  opts.thresholds = thresholds_of(rc);
  opts.data_range = rc.real("cap");
  const auto report = evaluate(method, issue, forecasts, truths, opts);

  fs::path file = rc.str("report");
  if (file.empty()) file = fs::path(rc.required("out_dir")) / "report.csv";
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  write_csv(report, out);
  write_csv(report, *ctx.out);
  return kOk;
}

inline int cmd_ablate(const Context& ctx) {
  const auto& rc = ctx.config;
  const auto cfg = train_config(rc);
  const auto thresholds = thresholds_of(rc);
  const fs::path out = rc.required("out_dir");
  const auto pairs = training_pairs(rc);
  if (pairs.empty()) throw DataError("empty dataset: no training pairs");
  const auto held_out = build_pairs(open_dataset(rc.required("eval_dir"), step_of(rc)));
  for (const auto& p : pairs) require_model_grid(p.earlier.meta);
  const auto report = run_ablation(cfg, pair_tensors(pairs, cfg.cap), held_out, thresholds, out);
  std::ofstream file(out / "ablation.csv", std::ios::trunc);
  write_ablation_csv(report, file);
  if (!file) throw DataError("cannot write ablation report");
  write_ablation_csv(report, *ctx.out);
  return kOk;
}

inline int cmd_plot(const Context& ctx) {
  const auto& rc = ctx.config;
  const auto fm = open_dataset(rc.required("forecast_dir"));
  const auto tm = open_dataset(rc.required("truth_dir"));
  const fs::path out = rc.required("out_dir");
  const auto threshold = thresholds_of(rc).front();
  const int scale = rc.int32("plot_scale");
  if (scale < 1 || scale > 64) throw UsageError("plot_scale must be in [1, 64]");
  Timestamp issue = 0;
  if (auto t = issue_time_of(rc)) {
    issue = *t;
  } else if (auto s = manifest_comment_value(fm, "issue"); !s.empty()) {
    issue = parse_iso8601(s);
  } else {
    throw UsageError("--issue-time is required when the forecast manifest does not record one");
  }
  const auto forecasts = load_frames(fm);
  const auto truths = load_frames(tm);
  fs::create_directories(out);
  int written = 0;
  for (const auto& f : forecasts) {
    const RainField* t = nullptr;
    for (const auto& c : truths)
      if (c.timestamp == f.timestamp) t = &c;
    if (!t) throw DataError("no truth frame valid at " + format_iso8601(f.timestamp));
    if (t->meta.height != f.meta.height || t->meta.width != f.meta.width)
      throw DataError("truth and forecast grids differ at " + format_iso8601(f.timestamp));
    const int lead = static_cast<int>((f.timestamp - issue) / 60);
    plot::write_png(plot::render_panel(*t, f, lead, threshold, scale), out / plot::panel_file_name(lead));
    ++written;
  }
  *ctx.out << "wrote " << written << " panels to " << out.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  torch::set_num_threads(1);
  CLI::App app{"Precipitation nowcasting with paired complementary temporal cycle GANs", "pct_nowcast"};
  app.require_subcommand(1);
  std::string config_file;
  std::map<std::string, std::string> flag_values;
  bool no_connection = false, no_torrential = false;

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const Context&);
  };
  const Sub subs[] = {
      {"synth", "write a synthetic dataset", cmd_synth},
      {"prepare", "write the pair manifest of a dataset", cmd_prepare},
      {"train", "train the four networks", cmd_train},
      {"forecast", "iterative forecast from one frame", cmd_forecast},
      {"evaluate", "score a forecast directory against truth", cmd_evaluate},
      {"ablate", "full vs no-connection vs no-torrential", cmd_ablate},
      {"plot", "truth | forecast | mask-difference panels", cmd_plot},
  };
  std::vector<std::pair<CLI::App*, const Sub*>> apps;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_file, "key=value config file");
    for (const auto& k : keys())
      sub->add_option("--" + RunConfig::flag_name(k.name), flag_values[k.name], k.help);
    sub->add_flag("--no-connection", no_connection, "disable the connection loss");
    sub->add_flag("--no-torrential", no_torrential, "disable the torrential loss");
    apps.emplace_back(sub, &s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    Context ctx;
    ctx.out = &out;
    ctx.err = &err;
    if (const char* env = std::getenv("PCT_NOWCAST_SEED"); env && *env) ctx.config.set("seed", env, "PCT_NOWCAST_SEED");
    if (!config_file.empty()) ctx.config.load_file(config_file);
    for (const auto& [sub, s] : apps) {
      if (!sub->parsed()) continue;
      for (const auto& k : keys()) {
        auto* opt = sub->get_option("--" + RunConfig::flag_name(k.name));
        if (opt->count() > 0) ctx.config.set(k.name, flag_values[k.name], "command line");
      }
      if (no_connection) ctx.config.set("connection", "false", "command line");
      if (no_torrential) ctx.config.set("torrential", "false", "command line");
      ctx.config.print(out);
      return s->run(ctx);
    }
    return kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const c10::Error& e) {
    err << "data error: " << e.what_without_backtrace() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace nowcast::cli
