#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "commands.hpp"

using namespace nowcast;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "pct_nowcast");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("nowcast_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string dir_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += f.filename().string() + '\n' + slurp(f);
  return all;
}

const std::vector<std::string> kTiny{"--gen-width", "4", "--gen-blocks", "1", "--se-reduction", "4",
                                     "--disc-width", "4", "--batch-size", "8"};

std::vector<std::string> with_tiny(std::vector<std::string> a) {
  a.insert(a.end(), kTiny.begin(), kTiny.end());
  return a;
}

fs::path small_dataset(const fs::path& root, int frames = 14) {
  const auto data = root / "data";
  const auto r = run({"synth", "--out-dir", data.string(), "--synth-height", "16", "--synth-width", "16",
                      "--synth-frames", std::to_string(frames), "--synth-sequences", "1", "--blob-sigma", "2.5",
                      "--seed", "4"});
  EXPECT_EQ(r.code, 0) << r.err;
  return data;
}

}  // namespace

TEST(Cli, SynthIsReplayable) {
  const auto root = scratch("synth");
  const auto a = small_dataset(root / "a");
  const auto b = small_dataset(root / "b");
  EXPECT_EQ(dir_digest(a), dir_digest(b));
  EXPECT_NE(slurp(a / kManifestName).find("rng=mt19937_64"), std::string::npos);
}

TEST(Cli, PrepareCountsPairs) {
  const auto root = scratch("prepare");
  const auto data = small_dataset(root, 14);
  const auto before = dir_digest(data);
  const auto r = run({"prepare", "--data-dir", data.string(), "--out-dir", (root / "prep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(cli::read_pairs(root / "prep" / cli::kPairsName).size(), 12u);
  EXPECT_EQ(dir_digest(data), before);
}

TEST(Cli, EvaluateIdenticalDirsGivesPerfectScores) {
  const auto root = scratch("eval");
  const auto data = small_dataset(root);
  const auto r = run({"evaluate", "--forecast-dir", data.string(), "--truth-dir", data.string(), "--out-dir",
                      (root / "ev").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(root / "ev" / "report.csv");
  EXPECT_NE(csv.find("CSI,10,0.500000,1.000000"), std::string::npos) << csv;
  EXPECT_NE(csv.find("PSNR,10,,100.000000"), std::string::npos);
  EXPECT_NE(csv.find("SSIM,10,,1.000000"), std::string::npos);
}

TEST(Cli, TrainZeroEpochsWritesInitialCheckpoint) {
  const auto root = scratch("train0");
  const auto data = small_dataset(root);
  const auto r = run(with_tiny({"train", "--data-dir", data.string(), "--out-dir", (root / "run").string(),
                                "--epochs", "0"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root / "run" / "epoch_0000" / "manifest.txt"));
  EXPECT_FALSE(fs::exists(root / "run" / "epoch_0001"));
}

TEST(Cli, TrainIsReplayable) {
  const auto root = scratch("train_replay");
  const auto data = small_dataset(root);
  for (const char* name : {"a", "b"})
    ASSERT_EQ(run(with_tiny({"train", "--data-dir", data.string(), "--out-dir", (root / name).string(), "--epochs",
                             "1", "--seed", "7"}))
                  .code,
              0);
  EXPECT_EQ(slurp(root / "a" / "train_log.tsv"), slurp(root / "b" / "train_log.tsv"));
  EXPECT_EQ(slurp(root / "a" / "epoch_0001" / "manifest.txt"), slurp(root / "b" / "epoch_0001" / "manifest.txt"));
  auto ma = load_checkpoint(root / "a" / "epoch_0001"), mb = load_checkpoint(root / "b" / "epoch_0001");
  EXPECT_EQ(parameter_hash(*ma.g_f), parameter_hash(*mb.g_f));
}

TEST(Cli, ExitCodes) {
  const auto root = scratch("codes");
  EXPECT_EQ(run({"train", "--no-such-flag"}).code, cli::kUsage);
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"train", "--out-dir", root.string(), "--lr", "-1", "--data-dir", root.string()}).code, cli::kUsage);
  EXPECT_EQ(run({"train", "--out-dir", root.string(), "--epochs", "many"}).code, cli::kUsage);
  EXPECT_EQ(run({"train", "--data-dir", (root / "missing").string(), "--out-dir", root.string()}).code, cli::kData);
  EXPECT_EQ(run({"forecast", "--data-dir", root.string(), "--out-dir", root.string()}).code, cli::kData);
  const auto data = small_dataset(root);
  EXPECT_EQ(run({"forecast", "--data-dir", data.string(), "--out-dir", (root / "f").string(), "--method",
                 "persistence", "--n-steps", "13"})
                .code,
            cli::kUsage);
}

TEST(Cli, DivergenceExitsWithThree) {
  const auto root = scratch("diverge");
  const auto data = small_dataset(root);
  const auto r = run(with_tiny({"train", "--data-dir", data.string(), "--out-dir", (root / "run").string(),
                                "--epochs", "3", "--lr", "1e30"}));
  EXPECT_EQ(r.code, cli::kDiverged) << r.err;
  EXPECT_NE(r.err.find("non-finite"), std::string::npos);
}

TEST(Cli, ConfigPrecedence) {
  const auto root = scratch("precedence");
  const auto data = small_dataset(root);
  std::ofstream(root / "run.cfg") << "# comment\nepochs = 3\nlambda-tor=50\nseed=11\n";
  ::setenv("PCT_NOWCAST_SEED", "99", 1);
  auto r = run(with_tiny({"train", "--config", (root / "run.cfg").string(), "--data-dir", data.string(),
                          "--out-dir", (root / "a").string(), "--epochs", "0"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# epochs=0\n"), std::string::npos);
  EXPECT_NE(r.out.find("# lambda_tor=50\n"), std::string::npos);
  EXPECT_NE(r.out.find("# seed=11\n"), std::string::npos);
  r = run(with_tiny({"train", "--data-dir", data.string(), "--out-dir", (root / "b").string(), "--epochs", "0"}));
  EXPECT_NE(r.out.find("# seed=99\n"), std::string::npos);
  r = run(with_tiny({"train", "--data-dir", data.string(), "--out-dir", (root / "c").string(), "--epochs", "0",
                     "--seed", "5"}));
  EXPECT_NE(r.out.find("# seed=5\n"), std::string::npos);
  ::unsetenv("PCT_NOWCAST_SEED");
  std::ofstream(root / "bad.cfg") << "no_such_key=1\n";
  EXPECT_EQ(run({"train", "--config", (root / "bad.cfg").string()}).code, cli::kUsage);
}

TEST(Cli, ForecastAndPlotTwelveLeads) {
  const auto root = scratch("plot");
  const auto data = small_dataset(root, 40);
  const auto before = dir_digest(data);
  const std::string issue = "2021-07-01T00:40:00Z";
  auto r = run({"forecast", "--data-dir", data.string(), "--out-dir", (root / "fc").string(), "--method",
                "persistence", "--issue-time", issue});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root / "fc" / "lead_+120min.hsr"));
  r = run({"plot", "--forecast-dir", (root / "fc").string(), "--truth-dir", data.string(), "--out-dir",
           (root / "png").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  int n = 0;
  for (const auto& e : fs::directory_iterator(root / "png")) n += e.path().extension() == ".png";
  EXPECT_EQ(n, 12);
  ASSERT_TRUE(fs::exists(root / "png" / "panel_+020min.png"));
  EXPECT_EQ(slurp(root / "png" / "panel_+020min.png").substr(0, 8), "\x89PNG\r\n\x1a\n");
  const auto first = dir_digest(root / "png");
  ASSERT_EQ(run({"plot", "--forecast-dir", (root / "fc").string(), "--truth-dir", data.string(), "--out-dir",
                 (root / "png").string()})
                .code,
            0);
  EXPECT_EQ(dir_digest(root / "png"), first);
  EXPECT_EQ(dir_digest(data), before);

  // Truth ends before the last leads: misaligned inputs.
  const auto short_truth = small_dataset(root / "short", 10);
  EXPECT_EQ(run({"plot", "--forecast-dir", (root / "fc").string(), "--truth-dir", short_truth.string(),
                 "--out-dir", (root / "png2").string()})
                .code,
            cli::kData);
}

TEST(Cli, ForecastFromCheckpoint) {
  const auto root = scratch("fc_pct");
  const auto data = small_dataset(root, 20);
  ASSERT_EQ(run(with_tiny({"train", "--data-dir", data.string(), "--out-dir", (root / "run").string(), "--epochs",
                           "1"}))
                .code,
            0);
  const auto r = run({"forecast", "--data-dir", data.string(), "--checkpoint", (root / "run" / "epoch_0001").string(),
                      "--out-dir", (root / "fc").string(), "--issue-time", "2021-07-01T00:00:00Z", "--n-steps", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = read_manifest(root / "fc" / kManifestName);
  ASSERT_EQ(m.entries.size(), 3u);
  EXPECT_EQ(manifest_comment_value(m, "method"), "pct");
  const auto ev = run({"evaluate", "--forecast-dir", (root / "fc").string(), "--truth-dir", data.string(),
                       "--report", (root / "r.csv").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(slurp(root / "r.csv").find("pct,PSNR,30,,"), std::string::npos);
}

TEST(Cli, AblateWritesThreeCheckpointsAndReport) {
  const auto root = scratch("ablate");
  const auto data = small_dataset(root, 14);
  const auto held = small_dataset(root / "held", 6);
  const auto r = run(with_tiny({"ablate", "--data-dir", data.string(), "--eval-dir", held.string(), "--out-dir",
                                (root / "abl").string(), "--epochs", "1"}));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* v : {"full", "no_connection", "no_torrential"})
    EXPECT_TRUE(fs::exists(root / "abl" / v / "epoch_0001" / "manifest.txt")) << v;
  const auto csv = slurp(root / "abl" / "ablation.csv");
  EXPECT_NE(csv.find("metric,full,no_connection,no_torrential\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\nCSI@30,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\nconnection_L1,"), std::string::npos) << csv;
}

TEST(Plot, PanelNamesAndAnnotation) {
  EXPECT_EQ(plot::panel_file_name(20), "panel_+020min.png");
  EXPECT_EQ(plot::panel_file_name(120), "panel_+120min.png");
  EXPECT_EQ(plot::csi_annotation(1.0), "CSI 1.000");
  EXPECT_EQ(plot::csi_annotation(std::nullopt), "CSI N/A");
}

TEST(Plot, IdenticalFieldsLeaveDifferencePanelEmpty) {
  auto f = RainField::zeros({8, 8, 1.0f, 5});
  f.at(2, 3) = 40.0f;
  f.at(5, 5) = 1.0f;
  const int scale = 2;
  const auto img = plot::render_panel(f, f, 10, 0.5, scale);
  const int x0 = 10 + 2 * (8 * scale + 10), y0 = 48;
  for (int y = y0; y < y0 + 8 * scale; ++y)
    for (int x = x0; x < x0 + 8 * scale; ++x) {
      const auto c = img.get(x, y);
      ASSERT_TRUE(c.r == 255 && c.g == 255 && c.b == 255) << x << ',' << y;
    }
  auto g = f;
  g.at(2, 3) = 0.0f;
  const auto diff = plot::render_panel(f, g, 10, 0.5, scale);
  const auto c = diff.get(x0 + 3 * scale, y0 + 2 * scale);
  EXPECT_TRUE(c.r == plot::kMiss.r && c.g == plot::kMiss.g && c.b == plot::kMiss.b);
}

TEST(Plot, PngStructure) {
  plot::Image img(3, 2, {1, 2, 3});
  const auto png = plot::encode_png(img);
  ASSERT_GT(png.size(), 8u + 25u);
  EXPECT_EQ(std::string(png.begin() + 12, png.begin() + 16), "IHDR");
  EXPECT_EQ(png[16 + 3], 3);  // width, big-endian
  EXPECT_EQ(png[20 + 3], 2);
  EXPECT_EQ(std::string(png.end() - 8, png.end() - 4), "IEND");
  EXPECT_EQ(plot::encode_png(img), png);
}
