// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any selected criterion fails.
//
//   acceptance                 criteria 1-6, 9, 10 (fast)
//   acceptance 7 8             the desk-scale training runs
//   acceptance all
//   --work DIR                 where the synthetic benchmark and runs go
//   --ablation-epochs N        epochs per ablation run (default 15)

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfsr/baselines/baselines.hpp"
#include "mfsr/cli/utils.hpp"
#include "mfsr/hrnet/highresnet.hpp"
#include "mfsr/hrnet/shiftnet.hpp"
#include "mfsr/kelvin/metrics.hpp"
#include "mfsr/ndgrad/gradcheck.hpp"
#include "mfsr/scenes/scene.hpp"
#include "mfsr/shiftlanczos/lanczos.hpp"
#include "mfsr/trainer/gradcheck_e2e.hpp"
#include "mfsr/trainer/trainer.hpp"

using namespace mfsr;
using ndgrad::Tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct Options {
  fs::path work = fs::temp_directory_path() / "mfsr_acceptance";
  std::size_t ablation_epochs = 15;
};

Tensor uniform(ndgrad::Shape shape, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = unif(rng);
  return t;
}

// ---- 1 ----------------------------------------------------------------------

void parameter_counts(Outcome& o) {
  const hrnet::HighResNet net;
  const auto rows = net.parameter_table();
  const std::vector<std::size_t> expected{1'216, 1, 73'858, 73'858, 36'928, 295'170, 73'792, 1, 36'928, 1, 65};
  o.require(rows.size() == expected.size(), "HighRes-net row count");
  for (std::size_t i = 0; i < std::min(rows.size(), expected.size()); ++i) {
    o.require(rows[i].count == expected[i], "row " + rows[i].layer);
  }
  const std::size_t hr_total = hrnet::total(rows);
  o.require(hr_total == 591'818 && net.params().count() == 591'818, "HighRes-net total");

  std::mt19937_64 rng(0);
  ndgrad::ParameterStore s64, s128;
  hrnet::ResidualBlock b64(s64, "r", 64, 3, ndgrad::Dtype::f32, rng);
  hrnet::ResidualBlock b128(s128, "r", 128, 3, ndgrad::Dtype::f32, rng);
  o.require(s64.count() == 73'858, "ResidualBlock(64)");
  o.require(s128.count() == 295'170, "ResidualBlock(128)");

  const hrnet::ShiftNet shiftnet;
  const std::size_t sn_total = hrnet::total(shiftnet.parameter_table());
  o.require(sn_total == 34'187'648 && shiftnet.params().count() == 34'187'648, "ShiftNet total");
  o.detail << "HighRes-net " << hr_total << ", ShiftNet " << sn_total << ", ResidualBlock 64/128 " << s64.count()
           << "/" << s128.count();
}

// ---- 2 ----------------------------------------------------------------------

void gradient_suite(Outcome& o) {
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& r : ndgrad::op_gradient_suite(1)) {
    worst = std::max(worst, r.max_relative_error);
    ++checked;
    o.require(r.passed && r.max_relative_error < 1e-4, r.name);
  }
  const auto e2e = trainer::end_to_end_gradient_check();
  o.require(e2e.passed && e2e.max_relative_error < 1e-4, e2e.name);
  o.detail << checked << " op checks, worst rel err " << std::scientific << std::setprecision(2) << worst
           << "; end-to-end rel err " << e2e.max_relative_error << " over " << e2e.entries_checked << " entries";
}

// ---- 3 ----------------------------------------------------------------------

Tensor smooth_image(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.2 * n, 0.8 * n), amp(0.2, 0.5), width(3.0, 6.0);
  Tensor img = Tensor::full({1, n, n}, 0.2);
  for (int k = 0; k < 5; ++k) {
    const double cx = pos(rng), cy = pos(rng), a = amp(rng), s = width(rng);
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x)
        img[y * n + x] += a * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * s * s));
  }
  return img;
}

double interior_psnr(const Tensor& a, const Tensor& b, std::size_t border) {
  const std::size_t n = a.dim(1);
  double se = 0;
  std::size_t count = 0;
  for (std::size_t y = border; y < n - border; ++y)
    for (std::size_t x = border; x < n - border; ++x, ++count) se += std::pow(a[y * n + x] - b[y * n + x], 2);
  return -10.0 * std::log10(se / static_cast<double>(count));
}

void lanczos_properties(Outcome& o) {
  std::mt19937_64 rng(5);
  double identity_err = 0.0;
  for (int i = 0; i < 5; ++i) {
    const Tensor img = uniform({1, 20, 24}, rng);
    const Tensor out = shiftlanczos::shift_image(img, {0.0, 0.0});
    for (std::size_t j = 0; j < img.numel(); ++j) identity_err = std::max(identity_err, std::abs(out[j] - img[j]));
  }
  o.require(identity_err <= 1e-12, "zero-shift identity");

  double roll_err = 0.0;
  const std::size_t n = 24;
  for (const auto& [dx, dy] : std::vector<std::pair<int, int>>{{1, 0}, {0, 2}, {-2, 1}, {3, -3}}) {
    const Tensor img = uniform({1, n, n}, rng);
    const Tensor out = shiftlanczos::shift_image(img, {double(dx), double(dy)});
    for (std::size_t y = 4; y < n - 4; ++y)
      for (std::size_t x = 4; x < n - 4; ++x)
        roll_err = std::max(roll_err, std::abs(out[y * n + x] - img[(y - dy) * n + (x - dx)]));
  }
  o.require(roll_err <= 1e-6, "integer shift equals roll");

  double worst_psnr = 1e9;
  std::uniform_real_distribution<double> sub(-0.9, 0.9);
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const Tensor img = smooth_image(64, s);
    const shiftlanczos::Shift d{sub(rng), sub(rng)};
    const Tensor back = shiftlanczos::shift_image(shiftlanczos::shift_image(img, d), {-d.dx, -d.dy});
    worst_psnr = std::min(worst_psnr, interior_psnr(back, img, 8));
  }
  o.require(worst_psnr >= 50.0, "round trip PSNR");

  double sum_err = 0.0;
  std::uniform_real_distribution<double> delta(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    double s = 0.0;
    for (double t : shiftlanczos::lanczos_kernel(delta(rng)).taps) s += t;
    sum_err = std::max(sum_err, std::abs(s - 1.0));
  }
  o.require(sum_err <= 1e-12, "kernel unit sum");
  o.detail << std::scientific << std::setprecision(2) << "identity " << identity_err << ", roll " << roll_err
           << ", unit sum " << sum_err << std::fixed << ", round trip >= " << worst_psnr << " dB";
}

// ---- 4 ----------------------------------------------------------------------

void dummy_gating(Outcome& o) {
  const hrnet::HighResNet net({}, ndgrad::Dtype::f32, 11);
  std::mt19937_64 rng(12);
  for (std::size_t k : {3u, 5u, 9u}) {
    std::vector<Tensor> views;
    for (std::size_t i = 0; i < k; ++i) views.push_back(uniform({1, 12, 12}, rng));
    const std::size_t target = scenes::next_power_of_two(k);
    auto set = scenes::pad_imageset(views, target);
    const Tensor ref = scenes::reference_frame(views);
    ndgrad::NoGradGuard guard;
    const Tensor clean = net.forward(hrnet::make_view_batch({set}, {ref})).value();
    bool stable = true;
    for (int trial = 0; trial < 3; ++trial) {
      for (std::size_t i = k; i < target; ++i) set.views[i] = uniform({1, 12, 12}, rng, -10, 10);
      stable = stable && bit_identical(clean, net.forward(hrnet::make_view_batch({set}, {ref})).value());
    }
    o.require(stable, "K'=" + std::to_string(k));
    o.detail << "K'=" << k << " padded to " << target << (stable ? " identical; " : " differs; ");
  }
}

// ---- 5 ----------------------------------------------------------------------

// Written from the metric definition with plain loops.
double brute_force_cpsnr(const Tensor& hr, const Tensor& sr, const Tensor& mask, std::size_t n, std::size_t d,
                         std::size_t u, std::size_t v) {
  const std::size_t side = n - 2 * d;
  double bias = 0, count = 0;
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t h = (y + u) * n + x + v, s = (y + d) * n + x + d;
      if (mask[h] > 0.5) {
        bias += hr[h] - sr[s];
        count += 1;
      }
    }
  bias /= count;
  double se = 0;
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t h = (y + u) * n + x + v, s = (y + d) * n + x + d;
      if (mask[h] > 0.5) se += std::pow(hr[h] - sr[s] - bias, 2);
    }
  return -10.0 * std::log10(std::max(se / count, 1e-10));
}

void cpsnr_oracle(Outcome& o) {
  std::mt19937_64 rng(21);
  std::bernoulli_distribution clear(0.8);
  const std::size_t n = 32, d = 3;
  double worst = 0.0;
  bool dominates = true;
  for (int c = 0; c < 50; ++c) {
    const Tensor hr = uniform({1, n, n}, rng);
    Tensor sr = uniform({1, n, n}, rng), mask({1, n, n});
    for (double& m : mask.values()) m = clear(rng) ? 1.0 : 0.0;
    mask[(n / 2) * n + n / 2] = 1.0;
    if (c % 2) {
      for (std::size_t i = 0; i < sr.numel(); ++i) sr[i] = hr[i] + 0.05 * (sr[i] - 0.5);
    }
    double oracle = -1e300;
    for (std::size_t u = 0; u <= 2 * d; ++u)
      for (std::size_t v = 0; v <= 2 * d; ++v) oracle = std::max(oracle, brute_force_cpsnr(hr, sr, mask, n, d, u, v));
    const double got = kelvin::registered_cpsnr(hr, sr, mask, int(d));
    worst = std::max(worst, std::abs(got - oracle));
    const std::size_t m = n - 2 * d;
    const double center = kelvin::cpsnr(kelvin::crop_spatial(hr, d, d, m, m), kelvin::crop_spatial(sr, d, d, m, m),
                                        kelvin::crop_spatial(mask, d, d, m, m));
    dominates = dominates && got >= center;
  }
  o.require(worst <= 1e-9, "oracle agreement");
  o.require(dominates, "registered >= center crop");
  o.detail << "50 cases, max |diff| " << std::scientific << std::setprecision(2) << worst << " dB"
           << (dominates ? ", registered >= center on all" : "");
}

// ---- 6 ----------------------------------------------------------------------

void sampling_law(Outcome& o) {
  const int n = 100000;
  std::map<std::set<std::size_t>, int> pairs;
  for (int t = 0; t < n; ++t) {
    const auto idx = scenes::sample_views({5, 5, 5}, 10, 2, 0.0, static_cast<std::uint64_t>(t));
    pairs[{idx.begin(), idx.end()}]++;
  }
  const double p0 = 1.0 / 3.0, s0 = std::sqrt(p0 * (1 - p0) / n);
  double worst_z = 0.0;
  for (const auto& [pair, count] : pairs) worst_z = std::max(worst_z, std::abs(count / double(n) - p0) / s0);
  o.require(pairs.size() == 3 && worst_z <= 3.0, "beta = 0 uniform");

  const std::vector<std::size_t> c{3, 9, 9, 1, 7};
  bool exact = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    exact = exact && scenes::sample_views(c, 10, 3, scenes::kBetaInfinity, seed) == std::vector<std::size_t>{1, 2, 4};
  o.require(exact, "beta = inf k-clearest");

  int first = 0;
  for (int t = 0; t < n; ++t) first += scenes::sample_views({90, 80}, 100, 1, 50.0, 500000 + t)[0] == 0;
  const double p = 1.0 / (1.0 + std::exp(-5.0)), sp = std::sqrt(p * (1 - p) / n);
  const double z = std::abs(first / double(n) - p) / sp;
  o.require(z <= 3.0, "beta = 50 first draw");
  o.detail << std::fixed << std::setprecision(2) << "beta=0 worst |z| " << worst_z << "; beta=inf exact"
           << (exact ? "" : " NOT") << "; beta=50 p=" << std::setprecision(4) << first / double(n) << " vs " << p
           << " (|z| " << std::setprecision(2) << z << ")";
}

// ---- 7 and 8 ----------------------------------------------------------------

struct Benchmark {
  std::vector<scenes::Scene> train;
  std::vector<scenes::Scene> holdout;
};

// 64 training and 16 held-out scenes, written to disk and read back the way
// the command line pipeline sees them.
Benchmark benchmark(const fs::path& work) {
  scenes::SynthConfig cfg;
  cfg.lr_size = 48;
  cfg.zoom = 3;
  cfg.views = 8;
  cfg.noise_sigma = 0.02;
  if (!fs::exists(work / "train" / "manifest.json")) scenes::synth_dataset(work / "train", 64, cfg, 1);
  if (!fs::exists(work / "holdout" / "manifest.json")) scenes::synth_dataset(work / "holdout", 16, cfg, 100001);
  return {scenes::load_dataset(work / "train"), scenes::load_dataset(work / "holdout")};
}

void desk_end_to_end(Outcome& o, const Options& opt) {
  const Benchmark b = benchmark(opt.work);
  const trainer::TrainConfig cfg;
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = trainer::train(cfg, b.train, opt.work / "desk", &std::cerr);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

  const auto model = trainer::evaluate(trainer::model_predictor(result.model), b.holdout);
  const auto bicubic = trainer::evaluate(trainer::baseline_predictor("bicubic", 9), b.holdout);
  const double gain = model.mean_cpsnr() - bicubic.mean_cpsnr();
  o.require(minutes <= 30.0, "training time");
  o.require(gain >= 0.3, "margin over bicubic");
  o.require(model.aggregate < 1.0, "score vs ESA");
  o.detail << std::fixed << std::setprecision(4) << "model " << model.mean_cpsnr() << " dB, bicubic "
           << bicubic.mean_cpsnr() << " dB (+" << gain << "), ESA " << model.mean_baseline_cpsnr() << " dB, score "
           << model.aggregate << ", trained in " << std::setprecision(1) << minutes << " min";
}

void ablations(Outcome& o, const Options& opt) {
  const Benchmark b = benchmark(opt.work);
  trainer::TrainConfig base;
  base.epochs = opt.ablation_epochs;
  auto arm = [&](const std::string& name, bool registered, scenes::ReferenceMode ref) {
    trainer::AblationArm a{name, base};
    a.config.registered_loss = registered;
    a.config.reference = ref;
    return a;
  };
  const std::vector<trainer::AblationArm> arms{arm("reg_median", true, scenes::ReferenceMode::median),
                                               arm("unreg_median", false, scenes::ReferenceMode::median),
                                               arm("reg_none", true, scenes::ReferenceMode::none)};
  const auto rows = trainer::run_ablation(arms, {1, 2, 3}, b.train, b.holdout, opt.work / "ablation", &std::cerr);
  const double reg = trainer::arm_mean_cpsnr(rows, "reg_median");
  const double unreg = trainer::arm_mean_cpsnr(rows, "unreg_median");
  const double none = trainer::arm_mean_cpsnr(rows, "reg_none");
  o.require(reg >= unreg, "registered >= unregistered");
  o.require(reg >= none, "median >= no reference");
  o.detail << std::fixed << std::setprecision(4) << "3-seed mean cPSNR: registered " << reg << ", unregistered "
           << unreg << ", median " << reg << ", none " << none << " dB (" << opt.ablation_epochs << " epochs)";
}

// ---- 9 and 10 ---------------------------------------------------------------

void parallax(Outcome& o) {
  const auto p = cli::parallax_ratio(300'000.0, 50.0, 600.0);
  o.require(std::abs(p.motion_lag - 0.1) <= 1e-6, "motion lag");
  o.detail << std::setprecision(12) << "ratio " << p.ratio << ", lag " << p.motion_lag << " m";
}

void chirp(Outcome& o) {
  cli::ChirpConfig cfg;  // 5 Hz tone, sampled at 40 Hz and at 6 Hz
  const auto demo = cli::chirp_demo(cfg);
  const double resolution = 1.0 / cfg.duration;
  const double f_hr = cli::dominant_frequency(demo.hr.value, cfg.hr_rate);
  const double f_lr = cli::dominant_frequency(demo.lr.value, cfg.lr_rate);
  o.require(std::abs(f_hr - cfg.omega) <= resolution, "recovered above Nyquist");
  o.require(std::abs(f_lr - cfg.omega) > resolution, "misidentified below Nyquist");
  o.detail << "tone " << cfg.omega << " Hz: sampled at " << cfg.hr_rate << " Hz -> " << f_hr << " Hz, at "
           << cfg.lr_rate << " Hz -> " << f_lr << " Hz";
}

struct Criterion {
  int id;
  std::string title;
  double budget_s;  ///< 0 = no wall-clock limit here
  std::function<void(Outcome&, const Options&)> check;
};

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      opt.work = argv[++i];
    } else if (a == "--ablation-epochs" && i + 1 < argc) {
      opt.ablation_epochs = std::stoul(argv[++i]);
    } else if (a == "all") {
      for (int c = 1; c <= 10; ++c) selected.insert(c);
    } else {
      try {
        selected.insert(std::stoi(a));
      } catch (const std::exception&) {
        std::cerr << "unknown argument: " << a << '\n';
        return 2;
      }
    }
  }
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 9, 10};

  auto plain = [](void (*f)(Outcome&)) { return [f](Outcome& o, const Options&) { f(o); }; };
  const std::vector<Criterion> criteria{
      {1, "parameter counts", 1.0, plain(parameter_counts)},
      {2, "gradient suite", 120.0, plain(gradient_suite)},
      {3, "Lanczos properties", 10.0, plain(lanczos_properties)},
      {4, "dummy gating", 10.0, plain(dummy_gating)},
      {5, "cPSNR oracle", 10.0, plain(cpsnr_oracle)},
      {6, "sampling law", 30.0, plain(sampling_law)},
      {7, "desk-scale end-to-end", 0.0, desk_end_to_end},
      {8, "directional ablations", 0.0, ablations},
      {9, "parallax", 0.0, plain(parallax)},
      {10, "chirp demo", 5.0, plain(chirp)},
  };

  bool all_pass = true;
  for (const auto& c : criteria) {
    if (!selected.contains(c.id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.check(o, opt);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0) o.require(secs <= c.budget_s, "time budget");
    all_pass = all_pass && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << c.id << "  " << c.title << ": "
              << o.detail.str() << std::fixed << std::setprecision(2) << " (" << secs << " s)" << std::endl;
  }
  return all_pass ? 0 : 1;
}
