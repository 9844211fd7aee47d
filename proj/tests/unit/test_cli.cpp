#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mfsr/cli/app.hpp"
#include "mfsr/cli/utils.hpp"

using namespace mfsr;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "mfsr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

// Peak of |X(f)| over f = k rate / n, evaluated with a Goertzel recursion.
double goertzel_peak(const std::vector<double>& x, double rate) {
  const std::size_t n = x.size();
  double best = -1, best_f = 0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double w = 2 * std::numbers::pi * k / n, c = 2 * std::cos(w);
    double s1 = 0, s2 = 0;
    for (double v : x) {
      const double s0 = v + c * s1 - s2;
      s2 = s1;
      s1 = s0;
    }
    const double power = s1 * s1 + s2 * s2 - c * s1 * s2;
    if (power > best) {
      best = power;
      best_f = k * rate / n;
    }
  }
  return best_f;
}

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("mfsr_cli_" + name); }

}  // namespace

TEST(Parallax, AppendixArithmetic) {
  const auto p = cli::parallax_ratio(300'000, 50, 600);
  EXPECT_NEAR(p.ratio, 30.0 / 29.995, 1e-12);
  EXPECT_NEAR(p.motion_lag, 0.1, 1e-6);
  const auto flat = cli::parallax_ratio(300'000, 0, 600);
  EXPECT_EQ(flat.ratio, 1.0);
  EXPECT_EQ(flat.motion_lag, 0.0);
}

TEST(Parallax, NonPhysicalInputsThrow) {
  EXPECT_THROW(cli::parallax_ratio(100, 100), std::invalid_argument);
  EXPECT_THROW(cli::parallax_ratio(100, -1), std::invalid_argument);
  EXPECT_THROW(cli::parallax_ratio(NAN, 1), std::invalid_argument);
}

TEST(Chirp, ToneAboveNyquistIsRecovered) {
  cli::ChirpConfig cfg;
  cfg.omega = 5.0;
  cfg.lr_rate = 12.0;
  const auto demo = cli::chirp_demo(cfg);
  EXPECT_NEAR(goertzel_peak(demo.lr.value, cfg.lr_rate), 5.0, 1e-9);
  EXPECT_NEAR(cli::dominant_frequency(demo.lr.value, cfg.lr_rate), 5.0, 1e-9);
}

TEST(Chirp, ToneBelowNyquistIsAliased) {
  cli::ChirpConfig cfg;
  cfg.omega = 5.0;
  cfg.lr_rate = 1.2 * cfg.omega;
  const auto demo = cli::chirp_demo(cfg);
  const double oracle = goertzel_peak(demo.lr.value, cfg.lr_rate);
  EXPECT_NEAR(oracle, 1.0, 1e-9);  // |5 - 6|
  EXPECT_EQ(cli::dominant_frequency(demo.lr.value, cfg.lr_rate), oracle);
  EXPECT_GT(std::abs(oracle - cfg.omega), 1.0 / cfg.duration);
}

TEST(Chirp, SamplesFollowTheFormula) {
  cli::ChirpConfig cfg;
  cfg.slope = 1.5;
  const auto train = cli::sample_chirp(cfg, 10.0);
  ASSERT_EQ(train.t.size(), 40u);
  for (std::size_t i = 0; i < train.t.size(); ++i) {
    const double t = i / 10.0;
    EXPECT_NEAR(train.value[i], std::sin(2 * std::numbers::pi * (5.0 + 1.5 * t) * t), 1e-12);
  }
  EXPECT_THROW(cli::sample_chirp(cfg, 0.0), std::invalid_argument);
}

TEST(Chirp, CsvLayoutAndZeroAmplitude) {
  cli::ChirpConfig cfg;
  cfg.amplitude = 0.0;
  cfg.duration = 1.0;
  std::ostringstream os;
  cli::write_chirp_csv(cli::chirp_demo(cfg), os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,chirp,hr_samples,lr_samples");
  std::size_t rows = 0, hr = 0, lr = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string cells[4];
    for (auto& c : cells) std::getline(ss, c, ',');
    EXPECT_EQ(std::stod(cells[1]), 0.0);
    if (!cells[2].empty()) {
      ++hr;
      EXPECT_EQ(std::stod(cells[2]), 0.0);
    }
    if (!cells[3].empty()) {
      ++lr;
      EXPECT_EQ(std::stod(cells[3]), 0.0);
    }
  }
  EXPECT_EQ(hr, 40u);
  EXPECT_EQ(lr, 6u);
  // 800 dense rows; the hr times lie on the dense grid, lr times k/6 do not
  // except k = 0 and 3
  EXPECT_EQ(rows, 804u);
}

TEST(Cli, ParamcountTables) {
  std::string out;
  EXPECT_EQ(run({"paramcount", "--model", "highresnet"}, &out), 0);
  EXPECT_NE(out.find("591818"), std::string::npos);
  EXPECT_NE(out.find("ResidualBlock(128)"), std::string::npos);
  EXPECT_EQ(run({"paramcount", "--model", "shiftnet"}, &out), 0);
  EXPECT_NE(out.find("34187648"), std::string::npos);
}

TEST(Cli, ParallaxCommand) {
  std::string out;
  EXPECT_EQ(run({"parallax", "--altitude", "300000", "--height", "50", "--motion", "600"}, &out), 0);
  EXPECT_NE(out.find("motion_lag_m 0.1"), std::string::npos) << out;
  EXPECT_EQ(run({"parallax", "--altitude", "10", "--height", "50"}), cli::kUsage);
}

TEST(Cli, UsageErrors) {
  std::string out, err;
  EXPECT_EQ(run({}, &out, &err), cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}), cli::kUsage);
  EXPECT_EQ(run({"parallax", "--height", "1", "--bogus", "2"}), cli::kUsage);
  EXPECT_EQ(run({"train", "--data", "x"}), cli::kUsage);
  EXPECT_EQ(run({"score", "--method", "srresnet", "--data", "x"}), cli::kUsage);
  EXPECT_EQ(run({"--help"}, &out), cli::kOk);
  EXPECT_NE(out.find("paramcount"), std::string::npos);
}

TEST(Cli, MissingDataIsADataError) {
  std::string err;
  EXPECT_EQ(run({"score", "--data", temp("does_not_exist").string()}, nullptr, &err), cli::kDataError);
  EXPECT_NE(err.find("does_not_exist"), std::string::npos);
}

TEST(Cli, SynthTrainEvalScorePipeline) {
  const fs::path root = temp("pipeline");
  fs::remove_all(root);
  const std::string data = (root / "data").string(), run_dir = (root / "run").string();
  ASSERT_EQ(run({"synth", "--out", data, "--count", "4", "--views", "4", "--size", "16", "--seed", "3"}), 0);
  std::string out;
  ASSERT_EQ(run({"score", "--method", "esa", "--data", data, "--out", (root / "esa.csv").string()}, &out), 0);
  EXPECT_NE(out.find("score (lower is better): 1.000000"), std::string::npos) << out;
  EXPECT_TRUE(fs::exists(root / "esa.csv"));

  std::ofstream(root / "tiny.cfg") << "hidden = 4\nshiftnet_channels = 2,2,2,2,4,4,4,4\nshiftnet_fc = 8\n"
                                      "eval_pad = 8\nval_percent = 0\n";
  ASSERT_EQ(run({"train", "--data", data, "--out", run_dir, "--config", (root / "tiny.cfg").string(), "--seed", "2",
                 "--views", "4", "--patch", "8", "--batch", "2", "--epochs", "1", "--beta", "inf", "--reference",
                 "mean", "--registered-loss", "on", "--lambda", "1e-5"},
                &out),
            0)
      << out;
  const std::string ckpt = (fs::path(run_dir) / "best.ckpt").string();
  ASSERT_TRUE(fs::exists(ckpt));
  std::ifstream cfg(fs::path(run_dir) / "config.txt");
  std::stringstream cfg_text;
  cfg_text << cfg.rdbuf();
  EXPECT_NE(cfg_text.str().find("reference = mean"), std::string::npos);
  EXPECT_NE(cfg_text.str().find("seed = 2"), std::string::npos);

  std::string e1, e2;
  ASSERT_EQ(run({"eval", "--data", data, "--checkpoint", ckpt}, &e1), 0);
  ASSERT_EQ(run({"eval", "--data", data, "--ensemble", ckpt + "," + ckpt}, &e2), 0);
  EXPECT_NE(e1.find("mean cPSNR"), std::string::npos);
  EXPECT_EQ(run({"eval", "--data", data}), cli::kUsage);
  EXPECT_EQ(run({"eval", "--data", data, "--ensemble", (root / "nope.ckpt").string()}), cli::kDataError);
}

TEST(Cli, ChirpCommandWritesCsv) {
  const fs::path csv = temp("chirp.csv");
  std::string out;
  EXPECT_EQ(run({"chirp", "--out", csv.string(), "--omega", "5", "--lr-rate", "6"}, &out), 0);
  EXPECT_TRUE(fs::exists(csv));
  EXPECT_NE(out.find("lr dominant frequency (Hz): 1"), std::string::npos) << out;
}
