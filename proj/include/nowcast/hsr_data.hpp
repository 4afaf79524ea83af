#pragma once

// Raster data model for gridded rain-rate fields: the on-disk field format,
// the text manifest, [-1, 1] normalization and training-pair construction.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nowcast/errors.hpp"

namespace nowcast {

namespace fs = std::filesystem;

using Timestamp = std::int64_t;  // Unix seconds, UTC

inline constexpr float kMissing = std::numeric_limits<float>::quiet_NaN();
inline constexpr double kDefaultCap = 100.0;  // mm/h mapped to +1

inline bool is_missing(float v) { return std::isnan(v); }

struct GridMeta {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  float resolution_km = 1.0f;
  std::uint32_t cadence_minutes = 5;

  std::size_t cells() const { return std::size_t{height} * width; }

  // The file layer accepts any positive extent; models additionally require
  // at least kMinModelSide cells per side (see require_model_grid).
  void validate() const {
    if (height == 0 || width == 0)
      throw DataError("grid extent must be positive");
    if (!(resolution_km > 0.0f) || !std::isfinite(resolution_km))
      throw DataError("resolution_km must be positive and finite");
    if (cadence_minutes == 0) throw DataError("cadence_minutes must be positive");
  }

  bool operator==(const GridMeta& o) const {
    return height == o.height && width == o.width &&
           std::bit_cast<std::uint32_t>(resolution_km) ==
               std::bit_cast<std::uint32_t>(o.resolution_km) &&
           cadence_minutes == o.cadence_minutes;
  }
};

inline constexpr std::uint32_t kMinModelSide = 8;

inline void require_model_grid(const GridMeta& meta) {
  meta.validate();
  if (meta.height < kMinModelSide || meta.width < kMinModelSide)
    throw DataError("model grids need at least 8x8 cells, got " +
                    std::to_string(meta.height) + "x" + std::to_string(meta.width));
}

// Rain rate in mm/h, row-major with top-left origin. Missing cells hold NaN.
struct RainField {
  GridMeta meta;
  Timestamp timestamp = 0;
  float cap_hint = 0.0f;  // 0 = unspecified
  std::vector<float> values;

  static RainField zeros(const GridMeta& meta, Timestamp ts = 0) {
    RainField f;
    f.meta = meta;
    f.timestamp = ts;
    f.values.assign(meta.cells(), 0.0f);
    return f;
  }

  float& at(std::size_t row, std::size_t col) { return values[row * meta.width + col]; }
  float at(std::size_t row, std::size_t col) const { return values[row * meta.width + col]; }

  void validate() const {
    meta.validate();
    if (values.size() != meta.cells())
      throw DataError("field has " + std::to_string(values.size()) + " values for a " +
                      std::to_string(meta.height) + "x" + std::to_string(meta.width) + " grid");
    for (float v : values) {
      if (is_missing(v)) continue;
      if (!std::isfinite(v)) throw DataError("non-finite rain rate");
      if (v < 0.0f) throw DataError("negative rain rate");
    }
  }
};

// Bitwise comparison of the stored values; NaN sentinels compare equal to
// themselves and -0 differs from +0.
inline bool same_values(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
}

inline bool bitwise_equal(const RainField& a, const RainField& b) {
  return a.meta == b.meta && a.timestamp == b.timestamp &&
         std::bit_cast<std::uint32_t>(a.cap_hint) == std::bit_cast<std::uint32_t>(b.cap_hint) &&
         same_values(a.values, b.values);
}

struct NormalizedField {
  GridMeta meta;
  Timestamp timestamp = 0;
  double cap_mm_per_h = kDefaultCap;
  std::vector<double> values;  // each in [-1, 1]
};

struct HsrPair {
  RainField earlier;
  RainField later;
  int step = 2;
};

// ---------------------------------------------------------------------------
// Timestamps

namespace detail {

// Days since 1970-01-01 for a proleptic Gregorian date (Howard Hinnant).
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2);
}

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
}

}  // namespace detail

inline std::string format_iso8601(Timestamp ts) {
  const std::int64_t days = detail::floor_div(ts, 86400);
  const std::int64_t secs = ts - days * 86400;
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  detail::civil_from_days(days, y, m, d);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                static_cast<long long>(y), m, d, static_cast<long long>(secs / 3600),
                static_cast<long long>(secs / 60 % 60), static_cast<long long>(secs % 60));
  return buf;
}

// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional trailing 'Z' (UTC only).
inline Timestamp parse_iso8601(std::string_view text) {
  long long y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  int consumed = 0;
  const std::string str(text);
  if (std::sscanf(str.c_str(), "%lld-%u-%uT%u:%u:%u%n", &y, &mo, &d, &h, &mi, &s, &consumed) != 6)
    throw DataError("bad ISO-8601 timestamp '" + str + "'");
  std::string_view rest = text.substr(static_cast<std::size_t>(consumed));
  if (!(rest.empty() || rest == "Z"))
    throw DataError("only UTC timestamps are supported: '" + str + "'");
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 59)
    throw DataError("timestamp out of range '" + str + "'");
  return detail::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

// ---------------------------------------------------------------------------
// Field file format
//
//   0  magic "HSR1"            20 cadence_minutes u32
//   4  version u32 = 1         24 timestamp i64 (Unix seconds)
//   8  height u32              32 cap hint f32
//  12  width u32               36 reserved, zero
//  16  resolution_km f32       40 payload: H*W f32, row-major
//
// All integers and floats little-endian; missing cells are quiet NaN.

inline constexpr std::array<char, 4> kFieldMagic{'H', 'S', 'R', '1'};
inline constexpr std::uint32_t kFieldVersion = 1;
inline constexpr std::size_t kFieldHeaderBytes = 40;

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

template <typename T>
T get_le(std::span<const unsigned char> in, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= U{in[offset + i]} << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace detail

inline std::vector<unsigned char> encode_field(const RainField& field) {
  field.validate();
  const std::uint64_t payload = std::uint64_t{field.meta.height} * field.meta.width * 4u;
  if (payload > std::uint64_t{std::numeric_limits<std::ptrdiff_t>::max()} - kFieldHeaderBytes)
    throw DataError("field dimensions overflow the file format");

  std::vector<unsigned char> out;
  out.reserve(kFieldHeaderBytes + static_cast<std::size_t>(payload));
  out.insert(out.end(), kFieldMagic.begin(), kFieldMagic.end());
  detail::put_le(out, kFieldVersion);
  detail::put_le(out, field.meta.height);
  detail::put_le(out, field.meta.width);
  detail::put_le(out, field.meta.resolution_km);
  detail::put_le(out, field.meta.cadence_minutes);
  detail::put_le(out, field.timestamp);
  detail::put_le(out, field.cap_hint);
  detail::put_le(out, std::uint32_t{0});
  for (float v : field.values) detail::put_le(out, v);
  return out;
}

inline RainField decode_field(std::span<const unsigned char> bytes) {
  if (bytes.size() < kFieldHeaderBytes) throw DataError("truncated field header");
  if (!std::equal(kFieldMagic.begin(), kFieldMagic.end(), bytes.begin()))
    throw DataError("bad magic: not an HSR1 field file");
  const auto version = detail::get_le<std::uint32_t>(bytes, 4);
  if (version != kFieldVersion)
    throw DataError("unsupported field format version " + std::to_string(version));

  RainField f;
  f.meta.height = detail::get_le<std::uint32_t>(bytes, 8);
  f.meta.width = detail::get_le<std::uint32_t>(bytes, 12);
  f.meta.resolution_km = detail::get_le<float>(bytes, 16);
  f.meta.cadence_minutes = detail::get_le<std::uint32_t>(bytes, 20);
  f.timestamp = detail::get_le<std::int64_t>(bytes, 24);
  f.cap_hint = detail::get_le<float>(bytes, 32);
  f.meta.validate();

  const std::uint64_t expected = std::uint64_t{f.meta.height} * f.meta.width * 4u;
  if (bytes.size() - kFieldHeaderBytes != expected)
    throw DataError("truncated payload: expected " + std::to_string(expected) + " bytes, found " +
                    std::to_string(bytes.size() - kFieldHeaderBytes));
  f.values.resize(f.meta.cells());
  for (std::size_t i = 0; i < f.values.size(); ++i)
    f.values[i] = detail::get_le<float>(bytes, kFieldHeaderBytes + 4 * i);
  f.validate();
  return f;
}

inline void write_field(const RainField& field, const fs::path& destination) {
  const auto bytes = encode_field(field);
  std::ofstream out(destination, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + destination.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + destination.string());
}

inline RainField read_field(const fs::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw DataError("cannot open " + source.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_field(bytes);
  } catch (const DataError& e) {
    throw DataError(source.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Normalization

inline double normalize_value(double v, double cap) {
  if (std::isnan(v)) return -1.0;
  return 2.0 * std::min(v, cap) / cap - 1.0;
}

inline double denormalize_value(double v, double cap) {
  return std::max(0.0, cap * (v + 1.0) / 2.0);
}

inline void require_cap(double cap) {
  if (!(cap > 0.0) || !std::isfinite(cap)) throw UsageError("cap must be positive and finite");
}

inline NormalizedField normalize(const RainField& field, double cap = kDefaultCap) {
  require_cap(cap);
  field.validate();
  NormalizedField n{field.meta, field.timestamp, cap, {}};
  n.values.reserve(field.values.size());
  for (float v : field.values) n.values.push_back(normalize_value(v, cap));
  return n;
}

inline RainField denormalize(const NormalizedField& nfield) {
  require_cap(nfield.cap_mm_per_h);
  RainField f = RainField::zeros(nfield.meta, nfield.timestamp);
  if (nfield.values.size() != f.values.size()) throw DataError("normalized field size mismatch");
  f.cap_hint = static_cast<float>(nfield.cap_mm_per_h);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const double v = nfield.values[i];
    if (!(v >= -1.0 && v <= 1.0)) throw DataError("normalized value outside [-1, 1]");
    f.values[i] = static_cast<float>(denormalize_value(v, nfield.cap_mm_per_h));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Manifests

struct ManifestEntry {
  Timestamp timestamp = 0;
  fs::path path;  // relative to the manifest's directory
};

struct DatasetManifest {
  fs::path base_dir;
  std::vector<ManifestEntry> entries;
  GridMeta meta;
  int step = 2;
  std::vector<std::string> comments;  // '#' lines, without the marker

  fs::path resolve(const ManifestEntry& e) const { return base_dir / e.path; }

  void validate() const {
    if (step < 1) throw UsageError("step must be >= 1");
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].timestamp <= entries[i - 1].timestamp)
        throw DataError("manifest timestamps must be strictly increasing");
  }
};

inline constexpr const char* kManifestName = "manifest.tsv";

inline void write_manifest(const DatasetManifest& manifest, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot open " + file.string() + " for writing");
  for (const auto& c : manifest.comments) out << "# " << c << '\n';
  for (const auto& e : manifest.entries)
    out << format_iso8601(e.timestamp) << '\t' << e.path.generic_string() << '\n';
  if (!out) throw DataError("write failed: " + file.string());
}

// Reads the entry list; meta comes from the first referenced field's header.
inline DatasetManifest read_manifest(const fs::path& file, int step = 2) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open manifest " + file.string());
  DatasetManifest m;
  m.base_dir = file.parent_path();
  m.step = step;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view c(line);
      c.remove_prefix(1);
      if (!c.empty() && c.front() == ' ') c.remove_prefix(1);
      m.comments.emplace_back(c);
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(file.string() + ":" + std::to_string(lineno) + ": expected timestamp<TAB>path");
    m.entries.push_back({parse_iso8601(std::string_view(line).substr(0, tab)), fs::path(line.substr(tab + 1))});
  }
  m.validate();
  if (!m.entries.empty()) m.meta = read_field(m.resolve(m.entries.front())).meta;
  return m;
}

// Value of "key=..." among '#' comment lines, if present.
inline std::string manifest_comment_value(const DatasetManifest& m, std::string_view key) {
  for (const auto& c : m.comments) {
    std::istringstream words(c);
    std::string w;
    while (words >> w)
      if (w.size() > key.size() && w.compare(0, key.size(), key) == 0 && w[key.size()] == '=')
        return w.substr(key.size() + 1);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Pairing

enum class GapPolicy { Skip, Reject };

// Pairs (i, i+step) in sequence order. Pairs whose members are more than
// step cadences apart are skipped (or rejected), and pairs with bitwise
// identical values are dropped.
inline std::vector<HsrPair> build_pairs(const std::vector<RainField>& frames, int step,
                                        GapPolicy gaps = GapPolicy::Skip) {
  if (step < 1) throw UsageError("step must be >= 1");
  std::vector<HsrPair> pairs;
  const auto n = frames.size();
  for (std::size_t i = 0; i + static_cast<std::size_t>(step) < n; ++i) {
    const RainField& a = frames[i];
    const RainField& b = frames[i + static_cast<std::size_t>(step)];
    if (!(a.meta == b.meta)) throw DataError("frames in one sequence must share grid metadata");
    const Timestamp expected = Timestamp{step} * a.meta.cadence_minutes * 60;
    if (b.timestamp - a.timestamp != expected) {
      if (gaps == GapPolicy::Reject)
        throw DataError("cadence gap between " + format_iso8601(a.timestamp) + " and " +
                        format_iso8601(b.timestamp));
      continue;
    }
    if (same_values(a.values, b.values)) continue;
    pairs.push_back({a, b, step});
  }
  return pairs;
}

inline std::vector<RainField> load_frames(const DatasetManifest& manifest) {
  std::vector<RainField> frames;
  frames.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    RainField f = read_field(manifest.resolve(e));
    if (f.timestamp != e.timestamp)
      throw DataError(e.path.string() + ": header timestamp disagrees with manifest");
    frames.push_back(std::move(f));
  }
  return frames;
}

inline std::vector<HsrPair> build_pairs(const DatasetManifest& manifest, GapPolicy gaps = GapPolicy::Skip) {
  manifest.validate();
  return build_pairs(load_frames(manifest), manifest.step, gaps);
}

}  // namespace nowcast
