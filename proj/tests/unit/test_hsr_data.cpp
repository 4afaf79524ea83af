#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "nowcast/hsr_data.hpp"

using namespace nowcast;

namespace {

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("nowcast_hsr_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

RainField random_field(std::mt19937_64& rng, std::uint32_t h, std::uint32_t w) {
  GridMeta meta{h, w, 1.0f, 5};
  RainField f = RainField::zeros(meta, static_cast<Timestamp>(rng() % 2000000000));
  std::uniform_real_distribution<float> u(0.0f, 80.0f);
  for (auto& v : f.values) v = (rng() % 17 == 0) ? kMissing : u(rng);
  f.cap_hint = 100.0f;
  return f;
}

RainField constant_field(float v, Timestamp ts) {
  RainField f = RainField::zeros({8, 8, 1.0f, 5}, ts);
  std::fill(f.values.begin(), f.values.end(), v);
  return f;
}

}  // namespace

TEST(FieldFormat, ZeroFieldLayout) {
  RainField f = RainField::zeros({2, 2, 1.0f, 5}, 0);
  const auto bytes = encode_field(f);
  ASSERT_EQ(bytes.size(), 40u + 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HSR1");
  for (std::size_t i = 40; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], 0) << i;
  // version, height, width (u32 LE)
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 2);
  // reserved
  for (std::size_t i = 36; i < 40; ++i) EXPECT_EQ(bytes[i], 0);
}

TEST(FieldFormat, HeaderFieldsAtDocumentedOffsets) {
  RainField f = RainField::zeros({3, 4, 1.5f, 5}, 1625097600);
  f.cap_hint = 100.0f;
  const auto b = encode_field(f);
  auto u32 = [&](std::size_t o) { return b[o] | b[o + 1] << 8 | b[o + 2] << 16 | std::uint32_t{b[o + 3]} << 24; };
  EXPECT_EQ(u32(8), 3u);
  EXPECT_EQ(u32(12), 4u);
  EXPECT_EQ(u32(16), std::bit_cast<std::uint32_t>(1.5f));
  EXPECT_EQ(u32(20), 5u);
  std::int64_t ts = 0;
  for (int i = 7; i >= 0; --i) ts = (ts << 8) | b[24 + static_cast<std::size_t>(i)];
  EXPECT_EQ(ts, 1625097600);
  EXPECT_EQ(u32(32), std::bit_cast<std::uint32_t>(100.0f));
}

TEST(FieldFormat, MissingCellEncodedAsQuietNaNAtItsOffset) {
  RainField f = RainField::zeros({3, 4, 1.0f, 5}, 0);
  f.at(1, 2) = kMissing;
  const auto b = encode_field(f);
  // cell (1,2) is element 1*4+2 = 6 -> byte 40 + 6*4 = 64
  const std::array<unsigned char, 4> qnan{0x00, 0x00, 0xC0, 0x7F};
  EXPECT_TRUE(std::equal(qnan.begin(), qnan.end(), b.begin() + 64));
  for (std::size_t i = 40; i < b.size(); ++i)
    if (i < 64 || i >= 68) EXPECT_EQ(b[i], 0) << i;
}

TEST(FieldFormat, RoundTripIsBitwiseExact) {
  std::mt19937_64 rng(7);
  const auto dir = temp_dir("roundtrip");
  for (int trial = 0; trial < 25; ++trial) {
    const auto h = static_cast<std::uint32_t>(1 + rng() % 40);
    const auto w = static_cast<std::uint32_t>(1 + rng() % 40);
    const RainField f = random_field(rng, h, w);
    write_field(f, dir / "f.hsr");
    const RainField g = read_field(dir / "f.hsr");
    EXPECT_TRUE(bitwise_equal(f, g)) << trial;
  }
}

TEST(FieldFormat, RejectsBadMagic) {
  auto b = encode_field(RainField::zeros({8, 8, 1.0f, 5}));
  std::memcpy(b.data(), "XXXX", 4);
  EXPECT_THROW(decode_field(b), DataError);
}

TEST(FieldFormat, RejectsTruncatedPayload) {
  const auto dir = temp_dir("trunc");
  write_field(RainField::zeros({8, 8, 1.0f, 5}), dir / "f.hsr");
  fs::resize_file(dir / "f.hsr", 40 + 8 * 8 * 4 - 3);
  EXPECT_THROW(read_field(dir / "f.hsr"), DataError);
  fs::resize_file(dir / "f.hsr", 20);
  EXPECT_THROW(read_field(dir / "f.hsr"), DataError);
}

TEST(FieldFormat, RejectsNegativeRainRate) {
  auto f = RainField::zeros({8, 8, 1.0f, 5});
  auto b = encode_field(f);
  const float neg = -1.0f;
  std::memcpy(b.data() + 40, &neg, 4);
  EXPECT_THROW(decode_field(b), DataError);
  f.values[3] = -0.5f;
  EXPECT_THROW(encode_field(f), DataError);
}

TEST(FieldFormat, MissingSourceIsAnError) {
  EXPECT_THROW(read_field("/nonexistent/nowhere.hsr"), DataError);
}

TEST(Timestamps, IsoRoundTrip) {
  EXPECT_EQ(parse_iso8601("1970-01-01T00:00:00Z"), 0);
  EXPECT_EQ(parse_iso8601("2021-07-01T00:00:00Z"), 1625097600);
  EXPECT_EQ(format_iso8601(1625097600), "2021-07-01T00:00:00Z");
  EXPECT_EQ(parse_iso8601("2022-08-07T00:00:00"), 1659830400);
  for (Timestamp t : {Timestamp{-86401}, Timestamp{951782400}, Timestamp{4102444799}})
    EXPECT_EQ(parse_iso8601(format_iso8601(t)), t);
  EXPECT_THROW(parse_iso8601("2021-07-01 00:00"), DataError);
  EXPECT_THROW(parse_iso8601("2021-07-01T00:00:00+09:00"), DataError);
}

TEST(Normalization, HandExamples) {
  EXPECT_DOUBLE_EQ(normalize_value(0.0, 100.0), -1.0);
  EXPECT_DOUBLE_EQ(normalize_value(100.0, 100.0), 1.0);
  EXPECT_NEAR(normalize_value(30.0, 100.0), -0.4, 1e-15);
  EXPECT_DOUBLE_EQ(normalize_value(std::nan(""), 100.0), -1.0);
  EXPECT_THROW(normalize(RainField::zeros({8, 8, 1.0f, 5}), 0.0), UsageError);
}

TEST(Normalization, DenormalizeExamplesAndClamp) {
  NormalizedField n{{8, 8, 1.0f, 5}, 0, 100.0, std::vector<double>(64, -1.0)};
  n.values[1] = 1.0;
  const auto f = denormalize(n);
  EXPECT_EQ(f.values[0], 0.0f);
  EXPECT_EQ(f.values[1], 100.0f);

  auto g = constant_field(150.0f, 0);
  EXPECT_EQ(denormalize(normalize(g, 100.0)).values[0], 100.0f);

  n.values[2] = 1.5;
  EXPECT_THROW(denormalize(n), DataError);
}

TEST(Normalization, BoundsMonotoneAndInverse) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const RainField f = random_field(rng, 8 + rng() % 8, 8 + rng() % 8);
    const double cap = trial % 2 ? 100.0 : 37.5;
    const auto n = normalize(f, cap);
    for (double v : n.values) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
    const auto back = denormalize(n);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      const float expected = is_missing(f.values[i]) ? 0.0f : std::min(f.values[i], static_cast<float>(cap));
      EXPECT_NEAR(back.values[i], expected, 1e-6) << i;
      EXPECT_LE(std::abs(back.values[i] - expected),
                std::abs(std::nextafter(expected, 1e9f) - expected)) << "more than one ulp at " << i;
    }
  }
  double prev = -2.0;
  for (double v = 0.0; v <= 130.0; v += 0.37) {
    const double n = normalize_value(v, 100.0);
    EXPECT_GE(n, prev);
    prev = n;
  }
}

TEST(Pairs, FiveFramesStepTwo) {
  std::vector<RainField> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(constant_field(static_cast<float>(i), i * 300));
  const auto pairs = build_pairs(frames, 2);
  ASSERT_EQ(pairs.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(pairs[static_cast<std::size_t>(i)].earlier.values[0], static_cast<float>(i));
    EXPECT_EQ(pairs[static_cast<std::size_t>(i)].later.values[0], static_cast<float>(i + 2));
  }
}

TEST(Pairs, IdenticalFramesRemoved) {
  std::vector<RainField> same{constant_field(1, 0), constant_field(1, 300), constant_field(1, 600)};
  EXPECT_TRUE(build_pairs(same, 1).empty());

  std::vector<RainField> aab{constant_field(1, 0), constant_field(1, 300), constant_field(2, 600)};
  const auto p = build_pairs(aab, 1);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].earlier.timestamp, 300);
  EXPECT_EQ(p[0].later.values[0], 2.0f);
}

TEST(Pairs, CountIsNMinusStepWithoutDuplicates) {
  for (int n = 1; n <= 12; ++n)
    for (int step = 1; step <= 4; ++step) {
      std::vector<RainField> frames;
      for (int i = 0; i < n; ++i) frames.push_back(constant_field(static_cast<float>(i), i * 300));
      const auto pairs = build_pairs(frames, step);
      EXPECT_EQ(pairs.size(), static_cast<std::size_t>(std::max(0, n - step)));
      for (const auto& p : pairs) EXPECT_FALSE(same_values(p.earlier.values, p.later.values));
    }
}

TEST(Pairs, CadenceGapsSkippedOrRejected) {
  std::vector<RainField> frames{constant_field(0, 0), constant_field(1, 300), constant_field(2, 600),
                                constant_field(3, 4200), constant_field(4, 4500)};
  // (0,1) and (1,2) are contiguous; (2,3) spans the gap; (3,4) contiguous.
  EXPECT_EQ(build_pairs(frames, 1).size(), 3u);
  EXPECT_THROW(build_pairs(frames, 1, GapPolicy::Reject), DataError);
}

TEST(Manifest, WriteReadAndPair) {
  const auto dir = temp_dir("manifest");
  DatasetManifest m;
  m.base_dir = dir;
  m.comments = {"generator=test seed=3"};
  for (int i = 0; i < 5; ++i) {
    const auto name = "f" + std::to_string(i) + ".hsr";
    write_field(constant_field(static_cast<float>(i), 1625097600 + i * 300), dir / name);
    m.entries.push_back({1625097600 + i * 300, name});
  }
  write_manifest(m, dir / kManifestName);

  std::ifstream in(dir / kManifestName);
  std::string first, second;
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(first, "# generator=test seed=3");
  EXPECT_EQ(second, "2021-07-01T00:00:00Z\tf0.hsr");

  const auto r = read_manifest(dir / kManifestName);
  EXPECT_EQ(r.entries.size(), 5u);
  EXPECT_EQ(r.meta.height, 8u);
  EXPECT_EQ(manifest_comment_value(r, "seed"), "3");
  EXPECT_EQ(build_pairs(r).size(), 3u);
}

TEST(Manifest, RejectsNonIncreasingTimestamps) {
  const auto dir = temp_dir("manifest_bad");
  std::ofstream(dir / kManifestName) << "2021-07-01T00:05:00Z\ta.hsr\n2021-07-01T00:00:00Z\tb.hsr\n";
  EXPECT_THROW(read_manifest(dir / kManifestName), DataError);
}
