#pragma once

// Loss-family ablations: the full objective against runs without the
// connection or the torrential term, trained from one shared seed and scored
// on held-out one-step pairs.

#include <torch/torch.h>

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nowcast/forecast.hpp"
#include "nowcast/metrics.hpp"
#include "nowcast/trainer.hpp"

namespace nowcast {

struct VariantScores {
  std::string name;
  fs::path checkpoint;
  std::vector<std::optional<double>> csi;  // per threshold; empty if never defined
  double psnr = 0.0;
  std::optional<double> ssim;  // grids smaller than the SSIM window have none
  double connection_l1 = 0.0;  // mean |G_f(x_i) - x_{i+step}|, normalized units
};

struct AblationReport {
  std::vector<double> thresholds;
  std::vector<VariantScores> variants;
  std::size_t cases = 0;
};

// Mean one-step scores of G_f (eval mode) over held-out pairs.
inline VariantScores score_one_step(Generator& g_f, const std::vector<HsrPair>& pairs,
                                    const std::vector<double>& thresholds, double cap) {
  if (pairs.empty()) throw DataError("no held-out pairs to score");
  const bool was_training = g_f->is_training();
  g_f->eval();
  VariantScores s;
  std::vector<double> csi_sum(thresholds.size(), 0.0);
  std::vector<std::size_t> csi_n(thresholds.size(), 0);
  double psnr_sum = 0.0, ssim_sum = 0.0, l1_sum = 0.0;
  const int minutes = static_cast<int>(pairs.front().later.timestamp - pairs.front().earlier.timestamp) / 60;
  const bool with_ssim = pairs.front().earlier.meta.height >= 11 && pairs.front().earlier.meta.width >= 11;
  for (const auto& p : pairs) {
    const auto f = forecast_iterative(g_f, {p.earlier, 1, std::max(minutes, 1), cap, std::max(minutes, 1)})[0];
    for (std::size_t t = 0; t < thresholds.size(); ++t)
      if (auto v = csi(p.later, f, thresholds[t])) {
        csi_sum[t] += *v;
        ++csi_n[t];
      }
    psnr_sum += psnr(p.later, f, cap);
    if (with_ssim) ssim_sum += ssim(p.later, f, {11, 1.5, 0.01, 0.03, cap});
    for (std::size_t i = 0; i < f.values.size(); ++i)
      l1_sum += std::abs(normalize_value(f.values[i], cap) - normalize_value(p.later.values[i], cap));
  }
  const auto n = static_cast<double>(pairs.size());
  for (std::size_t t = 0; t < thresholds.size(); ++t)
    s.csi.push_back(csi_n[t] ? std::optional<double>(csi_sum[t] / static_cast<double>(csi_n[t])) : std::nullopt);
  s.psnr = psnr_sum / n;
  if (with_ssim) s.ssim = ssim_sum / n;
  s.connection_l1 = l1_sum / (n * static_cast<double>(pairs.front().later.values.size()));
  g_f->train(was_training);
  return s;
}

struct AblationVariant {
  std::string name;
  bool connection = true;
  bool torrential = true;
};

inline const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> v{
      {"full", true, true}, {"no_connection", false, true}, {"no_torrential", true, false}};
  return v;
}

// Trains every variant from base's seed into out_dir/<variant>/ and scores
// the final checkpoints.
inline AblationReport run_ablation(const TrainConfig& base, const PairTensors& train_data,
                                   const std::vector<HsrPair>& held_out, const std::vector<double>& thresholds,
                                   const fs::path& out_dir, const LogSink& log = {}) {
  base.validate();
  AblationReport report;
  report.thresholds = thresholds;
  report.cases = held_out.size();
  for (const auto& v : ablation_variants()) {
    TrainConfig c = base;
    c.enable_connection = v.connection;
    c.enable_torrential = v.torrential;
    const auto last = train(c, train_data, {out_dir / v.name, std::nullopt, log});
    auto m = load_checkpoint(last);
    auto s = score_one_step(m.g_f, held_out, thresholds, c.cap);
    s.name = v.name;
    s.checkpoint = last;
    report.variants.push_back(std::move(s));
  }
  return report;
}

// Side by side: one row per metric, one column per variant.
inline void write_ablation_csv(const AblationReport& r, std::ostream& out) {
  out << "# cases=" << r.cases << '\n';
  out << "metric";
  for (const auto& v : r.variants) out << ',' << v.name;
  out << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string{}; };
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
    out << "CSI@" << r.thresholds[t];
    for (const auto& v : r.variants) out << ',' << opt(v.csi[t]);
    out << '\n';
  }
  out << "PSNR";
  for (const auto& v : r.variants) out << ',' << format_number(v.psnr);
  out << "\nSSIM";
  for (const auto& v : r.variants) out << ',' << opt(v.ssim);
  out << "\nconnection_L1";
  for (const auto& v : r.variants) out << ',' << format_number(v.connection_l1);
  out << '\n';
}

}  // namespace nowcast
