#pragma once

// Synthetic rain sequences with known dynamics: Gaussian blobs translated
// with a constant velocity on a periodic grid, optionally decaying. Integer
// velocities give an exact ground truth through oracle_advect.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/hsr_data.hpp"

namespace nowcast {

struct Velocity {
  double vx = 0.0;  // columns per frame, positive = east
  double vy = 0.0;  // rows per frame, positive = south
};

struct SynthConfig {
  GridMeta meta{64, 64, 1.0f, 5};
  int n_frames = 12;
  int n_blobs = 4;
  Velocity velocity{1.0, 1.0};
  double blob_sigma = 4.0;
  double amplitude_min = 1.0;
  double amplitude_max = 50.0;
  double decay_per_frame = 1.0;
  double heavy_rain_fraction = 0.25;
  double heavy_threshold = 30.0;  // mm/h a heavy blob's peak exceeds
  std::uint64_t seed = 0;
  Timestamp start = 1625097600;  // 2021-07-01T00:00:00Z

  void validate() const {
    meta.validate();
    if (n_frames < 1) throw UsageError("n_frames must be positive");
    if (n_blobs < 1) throw UsageError("n_blobs must be positive");
    if (!(blob_sigma > 0.0)) throw UsageError("blob_sigma must be positive");
    if (!(amplitude_min >= 0.0) || !(amplitude_max >= amplitude_min))
      throw UsageError("amplitude range must satisfy 0 <= min <= max");
    if (!(decay_per_frame > 0.0 && decay_per_frame <= 1.0))
      throw UsageError("decay_per_frame must be in (0, 1]");
    if (!(heavy_rain_fraction >= 0.0 && heavy_rain_fraction <= 1.0))
      throw UsageError("heavy_rain_fraction must be in [0, 1]");
    if (heavy_blobs() > 0 && !(amplitude_max > heavy_threshold))
      throw UsageError("heavy blobs need amplitude_max above heavy_threshold");
    if (heavy_blobs() < n_blobs && amplitude_min > heavy_threshold)
      throw UsageError("light blobs need amplitude_min at or below heavy_threshold");
    if (!std::isfinite(velocity.vx) || !std::isfinite(velocity.vy))
      throw UsageError("velocity must be finite");
  }

  int heavy_blobs() const {
    return static_cast<int>(std::lround(heavy_rain_fraction * n_blobs));
  }
};

inline constexpr const char* kSynthRngName = "mt19937_64";

namespace detail {

// Uniform double in [0, 1) from the top 53 bits; unlike
// std::uniform_real_distribution this is identical on every standard library.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::int64_t wrap_index(std::int64_t i, std::int64_t n) {
  const std::int64_t r = i % n;
  return r < 0 ? r + n : r;
}

inline bool is_integral(double v) { return std::floor(v) == v; }

// Periodic translation of a row-major grid: out(r, c) = in(r - dy, c - dx).
// Integer displacements copy values exactly; otherwise bilinear resampling.
template <typename T>
std::vector<T> periodic_shift(const std::vector<T>& in, std::size_t height, std::size_t width,
                              double dx, double dy) {
  std::vector<T> out(in.size());
  const auto h = static_cast<std::int64_t>(height);
  const auto w = static_cast<std::int64_t>(width);
  if (is_integral(dx) && is_integral(dy)) {
    const auto ix = static_cast<std::int64_t>(dx);
    const auto iy = static_cast<std::int64_t>(dy);
    for (std::int64_t r = 0; r < h; ++r)
      for (std::int64_t c = 0; c < w; ++c)
        out[static_cast<std::size_t>(r * w + c)] =
            in[static_cast<std::size_t>(wrap_index(r - iy, h) * w + wrap_index(c - ix, w))];
    return out;
  }
  const double fx = std::floor(dx), fy = std::floor(dy);
  const double ax = dx - fx, ay = dy - fy;
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  auto sample = [&](std::int64_t r, std::int64_t c) {
    return static_cast<double>(in[static_cast<std::size_t>(wrap_index(r, h) * w + wrap_index(c, w))]);
  };
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      // source point (r - dy, c - dx) lies between rows r-iy-1 .. r-iy
      const double v00 = sample(r - iy, c - ix);
      const double v01 = sample(r - iy, c - ix - 1);
      const double v10 = sample(r - iy - 1, c - ix);
      const double v11 = sample(r - iy - 1, c - ix - 1);
      const double top = (1.0 - ax) * v00 + ax * v01;
      const double bottom = (1.0 - ax) * v10 + ax * v11;
      out[static_cast<std::size_t>(r * w + c)] = static_cast<T>((1.0 - ay) * top + ay * bottom);
    }
  return out;
}

}  // namespace detail

struct Blob {
  std::int64_t row = 0;
  std::int64_t col = 0;
  double amplitude = 0.0;
};

inline std::vector<Blob> draw_blobs(const SynthConfig& config) {
  std::mt19937_64 rng(config.seed);
  const int heavy = config.heavy_blobs();
  std::vector<Blob> blobs;
  blobs.reserve(static_cast<std::size_t>(config.n_blobs));
  for (int b = 0; b < config.n_blobs; ++b) {
    Blob blob;
    blob.row = static_cast<std::int64_t>(rng() % config.meta.height);
    blob.col = static_cast<std::int64_t>(rng() % config.meta.width);
    double lo = config.amplitude_min, hi = config.amplitude_max;
    if (b < heavy) {
      lo = std::max(lo, std::nextafter(config.heavy_threshold, hi));
    } else {
      hi = std::min(hi, config.heavy_threshold);
    }
    blob.amplitude = lo + (hi - lo) * detail::unit_uniform(rng);
    blobs.push_back(blob);
  }
  return blobs;
}

// Frame-0 field in double precision: Gaussian blobs at integer centres with
// minimum-image periodic distance.
inline std::vector<double> render_blobs(const SynthConfig& config, const std::vector<Blob>& blobs) {
  const auto h = static_cast<std::int64_t>(config.meta.height);
  const auto w = static_cast<std::int64_t>(config.meta.width);
  const double inv2s2 = 1.0 / (2.0 * config.blob_sigma * config.blob_sigma);
  std::vector<double> base(config.meta.cells(), 0.0);
  for (const auto& blob : blobs) {
    for (std::int64_t r = 0; r < h; ++r) {
      std::int64_t dr = detail::wrap_index(r - blob.row, h);
      if (dr > h / 2) dr -= h;
      for (std::int64_t c = 0; c < w; ++c) {
        std::int64_t dc = detail::wrap_index(c - blob.col, w);
        if (dc > w / 2) dc -= w;
        const double d2 = static_cast<double>(dr * dr + dc * dc);
        base[static_cast<std::size_t>(r * w + c)] += blob.amplitude * std::exp(-d2 * inv2s2);
      }
    }
  }
  return base;
}

inline std::vector<RainField> gen_sequence(const SynthConfig& config) {
  config.validate();
  const auto base = render_blobs(config, draw_blobs(config));
  std::vector<RainField> frames;
  frames.reserve(static_cast<std::size_t>(config.n_frames));
  for (int k = 0; k < config.n_frames; ++k) {
    const auto shifted = detail::periodic_shift(base, config.meta.height, config.meta.width,
                                                k * config.velocity.vx, k * config.velocity.vy);
    const double scale = std::pow(config.decay_per_frame, k);
    RainField f = RainField::zeros(config.meta, config.start + Timestamp{k} * config.meta.cadence_minutes * 60);
    for (std::size_t i = 0; i < shifted.size(); ++i)
      f.values[i] = static_cast<float>(std::max(0.0, scale * shifted[i]));
    frames.push_back(std::move(f));
  }
  return frames;
}

// Ground-truth extrapolation: the field translated by k * velocity.
inline RainField oracle_advect(const RainField& field, Velocity velocity, int k) {
  RainField out = field;
  out.values = detail::periodic_shift(field.values, field.meta.height, field.meta.width,
                                      k * velocity.vx, k * velocity.vy);
  return out;
}

inline double total_mass(const RainField& field) {
  double sum = 0.0;
  for (float v : field.values)
    if (!is_missing(v)) sum += v;
  return sum;
}

// Several independent sequences laid end to end with a one-hour gap between
// them, so the default pairing never crosses a sequence boundary.
struct SynthDataset {
  SynthConfig sequence;
  int n_sequences = 1;
  Timestamp gap_seconds = 3600;

  SynthConfig sequence_config(int s) const {
    SynthConfig c = sequence;
    c.seed = detail::splitmix64(sequence.seed + static_cast<std::uint64_t>(s));
    const Timestamp span = Timestamp{sequence.n_frames} * sequence.meta.cadence_minutes * 60 + gap_seconds;
    c.start = sequence.start + s * span;
    return c;
  }

  std::vector<RainField> frames() const {
    if (n_sequences < 1) throw UsageError("n_sequences must be positive");
    std::vector<RainField> all;
    for (int s = 0; s < n_sequences; ++s) {
      auto seq = gen_sequence(sequence_config(s));
      all.insert(all.end(), std::make_move_iterator(seq.begin()), std::make_move_iterator(seq.end()));
    }
    return all;
  }
};

inline DatasetManifest write_dataset(const std::vector<RainField>& frames, const fs::path& out_dir,
                                     std::vector<std::string> comments = {}) {
  fs::create_directories(out_dir);
  DatasetManifest m;
  m.base_dir = out_dir;
  m.comments = std::move(comments);
  if (!frames.empty()) m.meta = frames.front().meta;
  char name[32];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(name, sizeof name, "frame_%05zu.hsr", i);
    write_field(frames[i], out_dir / name);
    m.entries.push_back({frames[i].timestamp, name});
  }
  write_manifest(m, out_dir / kManifestName);
  return m;
}

inline DatasetManifest write_synth_dataset(const SynthDataset& ds, const fs::path& out_dir) {
  const auto& s = ds.sequence;
  char desc[512];
  std::snprintf(desc, sizeof desc,
                "generator=nowcast-synth rng=%s seed=%llu n_sequences=%d n_frames=%d n_blobs=%d "
                "vx=%.17g vy=%.17g sigma=%.17g amp_min=%.17g amp_max=%.17g decay=%.17g heavy_fraction=%.17g",
                kSynthRngName, static_cast<unsigned long long>(s.seed), ds.n_sequences, s.n_frames,
                s.n_blobs, s.velocity.vx, s.velocity.vy, s.blob_sigma, s.amplitude_min, s.amplitude_max,
                s.decay_per_frame, s.heavy_rain_fraction);
  return write_dataset(ds.frames(), out_dir, {desc});
}

}  // namespace nowcast
