#pragma once

// Multi-step nowcasts by feeding G_f its own output, plus the persistence
// reference forecaster and the forecast-directory layout.

#include <torch/torch.h>

#include <cstdio>
#include <string>
#include <vector>

#include "nowcast/hsr_data.hpp"
#include "nowcast/networks.hpp"
#include "nowcast/tensor_bridge.hpp"

namespace nowcast {

struct ForecastRequest {
  RainField initial;
  int n_steps = 12;
  int step_minutes = 10;
  double cap = kDefaultCap;
  int horizon_minutes = 120;

  void validate() const {
    if (n_steps < 0) throw UsageError("n_steps must be >= 0");
    if (step_minutes <= 0) throw UsageError("step_minutes must be positive");
    require_cap(cap);
    if (n_steps * step_minutes > horizon_minutes)
      throw UsageError("forecast of " + std::to_string(n_steps * step_minutes) + " min exceeds the " +
                       std::to_string(horizon_minutes) + " min horizon");
  }
};

// x0 = normalize(initial), x_{k+1} = G_f(x_k); returns x_1 .. x_n in mm/h.
inline std::vector<RainField> forecast_iterative(Generator& g_f, const ForecastRequest& req) {
  req.validate();
  if (g_f->is_training()) throw UsageError("forecasting requires the generator in eval mode");
  require_model_grid(req.initial.meta);
  torch::NoGradGuard no_grad;
  std::vector<RainField> out;
  out.reserve(static_cast<std::size_t>(req.n_steps));
  const auto dtype = g_f->parameters().front().scalar_type();
  auto x = to_tensor(req.initial, req.cap).to(dtype);
  for (int k = 1; k <= req.n_steps; ++k) {
    x = g_f->forward(x);
    if (!torch::isfinite(x).all().item<bool>())
      throw DivergenceError("non-finite generator output at iteration " + std::to_string(k));
    x = x.clamp(-1.0, 1.0);
    out.push_back(field_from_tensor(x, req.initial.meta,
                                    req.initial.timestamp + Timestamp{k} * req.step_minutes * 60, req.cap));
  }
  return out;
}

inline std::vector<RainField> persistence_baseline(const RainField& initial, int n_steps, int step_minutes = 10) {
  if (n_steps < 0) throw UsageError("n_steps must be >= 0");
  std::vector<RainField> out(static_cast<std::size_t>(n_steps), initial);
  for (int k = 1; k <= n_steps; ++k) out[static_cast<std::size_t>(k - 1)].timestamp += Timestamp{k} * step_minutes * 60;
  return out;
}

inline std::string lead_file_name(int lead_minutes) {
  char name[32];
  std::snprintf(name, sizeof name, "lead_+%03dmin.hsr", lead_minutes);
  return name;
}

// One field file per lead plus a manifest whose comments carry the issue time.
inline DatasetManifest write_forecast(const std::vector<RainField>& frames, Timestamp issue_time,
                                      const fs::path& out_dir, const std::string& method) {
  fs::create_directories(out_dir);
  DatasetManifest m;
  m.base_dir = out_dir;
  m.comments = {"forecast method=" + method + " issue=" + format_iso8601(issue_time)};
  for (const auto& f : frames) {
    if ((f.timestamp - issue_time) % 60 != 0) throw DataError("lead is not a whole minute");
    const auto name = lead_file_name(static_cast<int>((f.timestamp - issue_time) / 60));
    write_field(f, out_dir / name);
    m.entries.push_back({f.timestamp, name});
  }
  if (!frames.empty()) m.meta = frames.front().meta;
  write_manifest(m, out_dir / kManifestName);
  return m;
}

}  // namespace nowcast
