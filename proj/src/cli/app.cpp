#include "mfsr/cli/app.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "mfsr/baselines/baselines.hpp"
#include "mfsr/cli/utils.hpp"
#include "mfsr/trainer/gradcheck_e2e.hpp"
#include "mfsr/trainer/trainer.hpp"

namespace mfsr::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kHighResNetTotal = 591'818;
constexpr std::size_t kShiftNetTotal = 34'187'648;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::vector<scenes::Scene> load_data(const std::string& dir) {
  if (!fs::is_directory(dir)) throw scenes::DataError("data directory not found: " + dir);
  auto data = scenes::load_dataset(dir);
  if (data.empty()) throw scenes::DataError("no scenes under " + dir);
  return data;
}

void print_report(const kelvin::ScoreReport& report, std::ostream& out) {
  out << std::fixed << std::setprecision(4) << "scenes: " << report.scenes.size()
      << "\nmean cPSNR (dB): " << report.mean_cpsnr() << "\nmean ESA cPSNR (dB): " << report.mean_baseline_cpsnr()
      << "\nscore (lower is better): " << std::setprecision(6) << report.aggregate << '\n';
  out.unsetf(std::ios::floatfield);
}

void print_table(const std::vector<hrnet::ParamRow>& rows, std::ostream& out) {
  out << std::left << std::setw(10) << "stage" << std::setw(44) << "layer" << std::right << std::setw(12) << "params"
      << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(10) << r.stage << std::setw(44) << r.layer << std::right << std::setw(12) << r.count
        << '\n';
  }
  out << std::left << std::setw(54) << "total" << std::right << std::setw(12) << hrnet::total(rows) << '\n';
}

struct TrainFlags {
  std::string data, out, config;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta, lambda;
  std::optional<std::size_t> views, epochs, patch, batch, max_steps;
  std::optional<std::string> reference, registered;
  std::vector<std::string> sets;
};

trainer::TrainConfig resolve(const TrainFlags& f) {
  trainer::TrainConfig cfg;
  if (!f.config.empty()) trainer::apply(cfg, trainer::read_config_file(f.config));
  trainer::ConfigMap overrides;
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  auto put = [&](const char* key, const auto& opt) {
    if (!opt) return;
    std::ostringstream os;
    os << std::setprecision(17) << *opt;
    overrides[key] = os.str();
  };
  put("seed", f.seed);
  put("beta", f.beta);
  put("lambda", f.lambda);
  put("views", f.views);
  put("epochs", f.epochs);
  put("patch", f.patch);
  put("batch", f.batch);
  put("max_steps", f.max_steps);
  put("reference", f.reference);
  put("registered_loss", f.registered);
  trainer::apply(cfg, overrides);
  cfg.validate();
  return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-frame super-resolution: HighRes-net with ShiftNet registration", "mfsr"};
  app.require_subcommand(1);
  app.allow_extras(false);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-view dataset");
  std::string synth_out;
  std::size_t synth_count = 64;
  std::uint64_t synth_seed = 1;
  scenes::SynthConfig scfg;
  scfg.views = 8;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count, "Number of scenes")->check(CLI::PositiveNumber);
  synth->add_option("--views", scfg.views, "Views per scene")->check(CLI::PositiveNumber);
  synth->add_option("--size", scfg.lr_size, "Low-res side in pixels")->check(CLI::PositiveNumber);
  synth->add_option("--zoom", scfg.zoom, "Zoom factor")->check(CLI::PositiveNumber);
  synth->add_option("--noise", scfg.noise_sigma, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
  synth->add_option("--clouds", scfg.cloud_rate, "Expected occluded fraction")->check(CLI::Range(0.0, 0.5));
  synth->add_option("--max-shift", scfg.max_shift, "Max shift in low-res pixels")->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", synth_seed, "Seed of the first scene");

  // train
  auto* train = app.add_subcommand("train", "Train HighRes-net and ShiftNet");
  TrainFlags tf;
  train->add_option("--data", tf.data, "Dataset root")->required();
  train->add_option("--out", tf.out, "Run directory")->required();
  train->add_option("--config", tf.config, "key = value config file")->check(CLI::ExistingFile);
  train->add_option("--seed", tf.seed, "Random seed");
  train->add_option("--beta", tf.beta, "View sampling temperature (inf = clearest)");
  train->add_option("--views", tf.views, "Views per example (power of two)");
  train->add_option("--reference", tf.reference, "Reference frame")->check(CLI::IsMember({"median", "mean", "none"}));
  train->add_option("--registered-loss", tf.registered, "Register the output before the loss")
      ->check(CLI::IsMember({"on", "off"}));
  train->add_option("--lambda", tf.lambda, "Shift-norm penalty weight");
  train->add_option("--epochs", tf.epochs, "Epochs");
  train->add_option("--patch", tf.patch, "Low-res patch side");
  train->add_option("--batch", tf.batch, "Batch size");
  train->add_option("--max-steps", tf.max_steps, "Stop after this many steps (0 = no limit)");
  train->add_option("--set", tf.sets, "Extra config override key=value");

  // eval
  auto* eval = app.add_subcommand("eval", "Score trained checkpoints on a dataset");
  std::string eval_data, eval_ckpt, eval_ensemble, eval_out;
  trainer::EvalConfig ecfg;
  eval->add_option("--data", eval_data, "Dataset root")->required();
  auto* ckpt_opt = eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->check(CLI::ExistingFile);
  auto* ens_opt = eval->add_option("--ensemble", eval_ensemble, "Comma-separated checkpoints to average");
  ckpt_opt->excludes(ens_opt);
  eval->add_option("--out", eval_out, "Per-scene CSV");
  eval->add_option("--border", ecfg.border, "Registration search radius (HR px)")->check(CLI::NonNegativeNumber);
  eval->add_option("--n-clearest", ecfg.n_clearest, "Views in the ESA baseline")->check(CLI::PositiveNumber);

  // score
  auto* score = app.add_subcommand("score", "Score a classical baseline");
  std::string score_method = "esa", score_data, score_out;
  trainer::EvalConfig bcfg;
  score->add_option("--method", score_method, "Baseline")->check(CLI::IsMember({"esa", "bicubic"}));
  score->add_option("--data", score_data, "Dataset root")->required();
  score->add_option("--out", score_out, "Per-scene CSV");
  score->add_option("--border", bcfg.border, "Registration search radius (HR px)")->check(CLI::NonNegativeNumber);
  score->add_option("--n-clearest", bcfg.n_clearest, "Views averaged by the baseline")->check(CLI::PositiveNumber);

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks of every op and the training graph");
  std::uint64_t grad_seed = 1;
  grad->add_option("--seed", grad_seed, "Seed of the random inputs");

  // paramcount
  auto* pc = app.add_subcommand("paramcount", "Print the per-layer parameter table");
  std::string pc_model = "highresnet";
  pc->add_option("--model", pc_model, "Network")->check(CLI::IsMember({"highresnet", "shiftnet"}));

  // parallax
  auto* par = app.add_subcommand("parallax", "Displacement ratio of an elevated object");
  double altitude = 300'000, height = 0, motion = 0;
  par->add_option("--altitude", altitude, "Satellite altitude (m)");
  par->add_option("--height", height, "Object height (m)")->required();
  par->add_option("--motion", motion, "Ground motion between acquisitions (m)");

  // chirp
  auto* chirp = app.add_subcommand("chirp", "Chirp sampling and aliasing demo");
  std::string chirp_out;
  ChirpConfig ccfg;
  chirp->add_option("--out", chirp_out, "CSV path")->required();
  chirp->add_option("--hr-rate", ccfg.hr_rate, "High sampling rate (Hz)")->check(CLI::PositiveNumber);
  chirp->add_option("--lr-rate", ccfg.lr_rate, "Low sampling rate (Hz)")->check(CLI::PositiveNumber);
  chirp->add_option("--duration", ccfg.duration, "Seconds")->check(CLI::PositiveNumber);
  chirp->add_option("--omega", ccfg.omega, "Frequency at t = 0 (Hz)");
  chirp->add_option("--slope", ccfg.slope, "Frequency slope (Hz/s)");
  chirp->add_option("--amplitude", ccfg.amplitude, "Amplitude");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (synth->parsed()) {
    scenes::synth_dataset(synth_out, synth_count, scfg, synth_seed);
    out << "wrote " << synth_count << " scenes to " << synth_out << '\n';
  } else if (train->parsed()) {
    const trainer::TrainConfig cfg = resolve(tf);
    const auto data = load_data(tf.data);
    const auto result = trainer::train(cfg, data, tf.out, &err);
    for (const auto& e : result.record.epochs) {
      if (e.epoch == result.record.best_epoch) out << "best epoch " << e.epoch << " val loss " << e.val_loss << '\n';
    }
    out << "checkpoints in " << tf.out << '\n';
  } else if (eval->parsed()) {
    std::vector<std::string> ckpts = eval_ckpt.empty() ? split_list(eval_ensemble) : std::vector{eval_ckpt};
    if (ckpts.empty()) throw UsageError("eval: give --checkpoint or --ensemble");
    std::vector<trainer::Model> models;
    std::vector<trainer::Predictor> members;
    models.reserve(ckpts.size());
    for (const auto& c : ckpts) {
      if (!fs::exists(c)) throw scenes::DataError("checkpoint not found: " + c);
      models.push_back(trainer::load_model(c));
    }
    for (const auto& m : models) members.push_back(trainer::model_predictor(m));
    const auto predictor = members.size() == 1 ? members[0] : trainer::ensemble_predictor(members);
    const auto report = trainer::evaluate(predictor, load_data(eval_data), ecfg, &err);
    print_report(report, out);
    if (!eval_out.empty()) kelvin::save_csv(report, eval_out);
  } else if (score->parsed()) {
    const auto report =
        trainer::evaluate(trainer::baseline_predictor(score_method, bcfg.n_clearest), load_data(score_data), bcfg, &err);
    print_report(report, out);
    if (!score_out.empty()) kelvin::save_csv(report, score_out);
  } else if (grad->parsed()) {
    auto results = ndgrad::op_gradient_suite(grad_seed);
    results.push_back(trainer::end_to_end_gradient_check(grad_seed + 2));
    bool ok = true;
    for (const auto& r : results) {
      out << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(40) << r.name << " max rel err "
          << std::scientific << std::setprecision(2) << r.max_relative_error << std::defaultfloat << " ("
          << r.entries_checked << " entries)\n";
      ok = ok && r.passed;
    }
    out << (ok ? "all gradient checks passed\n" : "gradient check failed\n");
    return ok ? kOk : kNumerical;
  } else if (pc->parsed()) {
    std::vector<hrnet::ParamRow> rows;
    std::size_t expected = 0;
    if (pc_model == "highresnet") {
      rows = hrnet::HighResNet({}, ndgrad::Dtype::f32, 0).parameter_table();
      expected = kHighResNetTotal;
    } else {
      rows = hrnet::ShiftNet({}, ndgrad::Dtype::f32, 0).parameter_table();
      expected = kShiftNetTotal;
    }
    print_table(rows, out);
    if (hrnet::total(rows) != expected) {
      err << "error: total differs from the expected " << expected << '\n';
      return kFailure;
    }
  } else if (par->parsed()) {
    const Parallax p = parallax_ratio(altitude, height, motion);
    out << std::setprecision(12) << "ratio " << p.ratio << "\nmotion_lag_m " << p.motion_lag << '\n';
  } else if (chirp->parsed()) {
    const ChirpDemo demo = chirp_demo(chirp_out, ccfg);
    out << "hr dominant frequency (Hz): " << dominant_frequency(demo.hr.value, ccfg.hr_rate)
        << "\nlr dominant frequency (Hz): " << dominant_frequency(demo.lr.value, ccfg.lr_rate)
        << "\nsignals are identified only when sampled above 2 x their highest frequency\n";
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(argc, argv, out, err);
  } catch (const ndgrad::NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const scenes::DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\nrun with --help for usage\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace mfsr::cli
