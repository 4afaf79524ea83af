#pragma once

// Forecast verification: CSI on threshold masks, PSNR and mean SSIM, plus
// per-lead report assembly and its CSV form.

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nowcast/hsr_data.hpp"

namespace nowcast {

namespace detail {

inline void require_same_grid(const RainField& a, const RainField& b) {
  if (a.meta.height != b.meta.height || a.meta.width != b.meta.width || a.values.size() != b.values.size())
    throw DataError("fields differ in shape");
}

inline double value_or_zero(float v) { return is_missing(v) ? 0.0 : static_cast<double>(v); }

}  // namespace detail

struct MaskCounts {
  std::size_t hits = 0;   // |A ∩ B|
  std::size_t union_ = 0; // |A ∪ B|
};

// Missing cells never exceed a threshold (NaN >= t is false).
inline MaskCounts threshold_counts(std::span<const float> truth, std::span<const float> pred, double threshold) {
  MaskCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool a = truth[i] >= threshold;
    const bool b = pred[i] >= threshold;
    c.hits += a && b;
    c.union_ += a || b;
  }
  return c;
}

// |A ∩ B| / |A ∪ B| of the threshold masks; empty when neither field reaches
// the threshold anywhere.
inline std::optional<double> csi(const RainField& truth, const RainField& pred, double threshold) {
  detail::require_same_grid(truth, pred);
  if (!(threshold > 0.0)) throw UsageError("CSI threshold must be positive");
  const auto c = threshold_counts(truth.values, pred.values, threshold);
  if (c.union_ == 0) return std::nullopt;
  return static_cast<double>(c.hits) / static_cast<double>(c.union_);
}

inline constexpr double kPsnrZeroMseDb = 100.0;

inline double psnr(const RainField& truth, const RainField& pred, double data_range,
                   double zero_mse_db = kPsnrZeroMseDb) {
  detail::require_same_grid(truth, pred);
  if (!(data_range > 0.0)) throw UsageError("data_range must be positive");
  double sse = 0.0;
  for (std::size_t i = 0; i < truth.values.size(); ++i) {
    const double d = detail::value_or_zero(truth.values[i]) - detail::value_or_zero(pred.values[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(truth.values.size());
  if (mse == 0.0) return zero_mse_db;
  return 10.0 * std::log10(data_range * data_range / mse);
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = kDefaultCap;
};

namespace detail {

inline std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double centre = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double x = i - centre;
    k[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable 'valid' correlation: output is (h-n+1) x (w-n+1).
inline std::vector<double> filter_valid(const std::vector<double>& in, std::size_t h, std::size_t w,
                                        const std::vector<double>& k) {
  const std::size_t n = k.size(), oh = h - n + 1, ow = w - n + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += k[j] * in[r * w + c + j];
      tmp[r * ow + c] = s;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * tmp[(r + i) * ow + c];
      out[r * ow + c] = s;
    }
  return out;
}

}  // namespace detail

// Mean of the local SSIM map over all window positions that fit entirely
// inside the field (Gaussian-weighted statistics).
inline double ssim(const RainField& truth, const RainField& pred, const SsimParams& p = {}) {
  detail::require_same_grid(truth, pred);
  if (p.window < 1 || p.window % 2 == 0) throw UsageError("SSIM window must be odd and positive");
  if (!(p.data_range > 0.0)) throw UsageError("SSIM data_range must be positive");
  const std::size_t h = truth.meta.height, w = truth.meta.width;
  const auto n = static_cast<std::size_t>(p.window);
  if (h < n || w < n) throw DataError("field is smaller than the SSIM window");

  std::vector<double> x(h * w), y(h * w), xx(h * w), yy(h * w), xy(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    x[i] = detail::value_or_zero(truth.values[i]);
    y[i] = detail::value_or_zero(pred.values[i]);
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto k = detail::gaussian_kernel(p.window, p.sigma);
  const auto mx = detail::filter_valid(x, h, w, k);
  const auto my = detail::filter_valid(y, h, w, k);
  const auto sxx = detail::filter_valid(xx, h, w, k);
  const auto syy = detail::filter_valid(yy, h, w, k);
  const auto sxy = detail::filter_valid(xy, h, w, k);

  const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
  const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

// ---------------------------------------------------------------------------
// Reports

struct MetricRow {
  std::string method;
  std::string metric;  // "CSI", "PSNR" or "SSIM"
  int lead_min = 0;
  std::optional<double> threshold;  // CSI rows only
  std::optional<double> value;      // empty = CSI does not exist
};

struct MetricsReport {
  std::vector<MetricRow> rows;
  std::vector<double> thresholds;
  std::map<std::string, std::string> metadata;

  std::optional<double> find(const std::string& method, const std::string& metric, int lead,
                             std::optional<double> threshold = std::nullopt) const {
    for (const auto& r : rows)
      if (r.method == method && r.metric == metric && r.lead_min == lead && r.threshold == threshold)
        return r.value;
    return std::nullopt;
  }
};

// Table-style cell: three decimals, empty for a missing value.
inline std::string format_cell(std::optional<double> v) {
  if (!v) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  return buf;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_csv(const MetricsReport& report, std::ostream& out) {
  for (const auto& [k, v] : report.metadata) out << "# " << k << '=' << v << '\n';
  out << "method,metric,lead_min,threshold,value\n";
  for (const auto& r : report.rows) {
    out << r.method << ',' << r.metric << ',' << r.lead_min << ','
        << (r.threshold ? format_number(*r.threshold) : std::string{}) << ','
        << (r.value ? format_number(*r.value) : std::string{}) << '\n';
  }
}

inline std::string to_csv(const MetricsReport& report) {
  std::ostringstream s;
  write_csv(report, s);
  return s.str();
}

struct EvaluateOptions {
  std::vector<double> thresholds{0.5, 30.0};
  std::vector<int> leads;  // minutes; empty = every forecast frame
  double data_range = kDefaultCap;
  SsimParams ssim;
};

// One report row per (metric, lead), and per threshold for CSI. Forecast
// frames are matched to truth frames by timestamp.
inline MetricsReport evaluate(const std::string& method, Timestamp issue_time,
                              const std::vector<RainField>& forecasts, const std::vector<RainField>& truths,
                              const EvaluateOptions& options = {}) {
  MetricsReport report;
  report.thresholds = options.thresholds;
  report.metadata["issue_time"] = format_iso8601(issue_time);
  SsimParams sp = options.ssim;
  sp.data_range = options.data_range;

  auto truth_at = [&](Timestamp ts) -> const RainField& {
    for (const auto& t : truths)
      if (t.timestamp == ts) return t;
    throw DataError("no truth frame valid at " + format_iso8601(ts));
  };

  for (const auto& f : forecasts) {
    if ((f.timestamp - issue_time) % 60 != 0) throw DataError("forecast lead is not a whole minute");
    const int lead = static_cast<int>((f.timestamp - issue_time) / 60);
    if (!options.leads.empty() && std::find(options.leads.begin(), options.leads.end(), lead) == options.leads.end())
      continue;
    const RainField& t = truth_at(f.timestamp);
    for (double th : options.thresholds) report.rows.push_back({method, "CSI", lead, th, csi(t, f, th)});
    report.rows.push_back({method, "PSNR", lead, std::nullopt, psnr(t, f, options.data_range)});
    report.rows.push_back({method, "SSIM", lead, std::nullopt, ssim(t, f, sp)});
  }
  for (int lead : options.leads) {
    bool found = false;
    for (const auto& r : report.rows) found = found || r.lead_min == lead;
    if (!found) throw DataError("no forecast frame at lead +" + std::to_string(lead) + " min");
  }
  return report;
}

// Mean over cases per (method, metric, lead, threshold); missing CSI values
// are excluded, and a key whose values are all missing stays missing.
inline MetricsReport aggregate(const std::vector<MetricsReport>& cases) {
  struct Acc {
    MetricRow row;
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::vector<Acc> accs;
  MetricsReport out;
  for (const auto& rep : cases) {
    if (out.thresholds.empty()) out.thresholds = rep.thresholds;
    for (const auto& r : rep.rows) {
      auto it = std::find_if(accs.begin(), accs.end(), [&](const Acc& a) {
        return a.row.method == r.method && a.row.metric == r.metric && a.row.lead_min == r.lead_min &&
               a.row.threshold == r.threshold;
      });
      if (it == accs.end()) {
        accs.push_back({r, 0.0, 0});
        it = std::prev(accs.end());
      }
      if (r.value) {
        it->sum += *r.value;
        ++it->n;
      }
    }
  }
  out.metadata["cases"] = std::to_string(cases.size());
  for (auto& a : accs) {
    a.row.value = a.n ? std::optional<double>(a.sum / static_cast<double>(a.n)) : std::nullopt;
    out.rows.push_back(a.row);
  }
  return out;
}

}  // namespace nowcast
