#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "mfsr/kelvin/metrics.hpp"
#include "mfsr/trainer/config.hpp"

namespace mfsr::trainer {

using ndgrad::Tensor;
using scenes::Scene;

/// Multiplies the learning rate by `decay` once the validation loss has gone
/// more than `patience` consecutive epochs without a relative improvement of
/// at least `threshold`; the counter then restarts.
struct PlateauScheduler {
  double lr = 0.0007;
  double decay = 0.97;
  std::size_t patience = 2;
  double threshold = 1e-4;
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;

  /// Returns the learning rate for the next epoch.
  double step(double val_loss);
};

double lr_plateau_step(PlateauScheduler& state, double val_loss);

/// HighRes-net plus its ShiftNet; both are built from a TrainConfig and the
/// data's zoom factor.
struct Model {
  TrainConfig config;
  std::size_t zoom = 3;
  std::unique_ptr<hrnet::HighResNet> net;
  std::unique_ptr<hrnet::ShiftNet> shiftnet;

  std::vector<ndgrad::Parameter*> trainable();
};

Model build_model(const TrainConfig& cfg, std::size_t zoom);

/// Both networks in one archive, names prefixed "highresnet." and "shiftnet.".
void save_model(const Model& model, const std::filesystem::path& path);
/// Rebuilds the architecture from the config.txt next to the checkpoint and
/// loads the weights.
Model load_model(const std::filesystem::path& checkpoint);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct RunRecord {
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
  std::vector<std::string> checkpoints;
  std::size_t best_epoch = 0;
};

void write_run_csv(const RunRecord& record, std::ostream& out);

struct TrainResult {
  RunRecord record;
  Model model;  ///< weights of the best validation epoch
};

/// Cooperative training of HighRes-net and ShiftNet. Writes config.txt,
/// run.csv, steps.csv, last.ckpt and best.ckpt into `out_dir` unless it is
/// empty. Progress lines go to `log` when given.
TrainResult train(const TrainConfig& cfg, const std::vector<Scene>& dataset, const std::filesystem::path& out_dir = {},
                  std::ostream* log = nullptr);

/// Registered (or plain) loss of the model on deterministic center patches,
/// clearest views first, eval mode.
double validation_loss(const Model& model, const std::vector<Scene>& scenes);

// ---- evaluation ---------------------------------------------------------------

/// Produces a [1, zoom h, zoom w] reconstruction of a scene.
using Predictor = std::function<Tensor(const Scene&)>;

/// Clearest-first views (eval_views of them), padded to eval_pad, eval mode.
Predictor model_predictor(const Model& model);
/// Pixel average of several predictors.
Predictor ensemble_predictor(std::vector<Predictor> members);
Predictor baseline_predictor(const std::string& method, std::size_t n_clearest);

struct EvalConfig {
  int border = 3;
  std::size_t n_clearest = 9;
};

/// Registered cPSNR of every scene with an HR image against its ESA
/// baseline score. Scenes without HR are skipped with a note on `warn`.
kelvin::ScoreReport evaluate(const Predictor& predictor, const std::vector<Scene>& scenes, const EvalConfig& cfg = {},
                             std::ostream* warn = nullptr);

// ---- ablations ------------------------------------------------------------------

struct AblationArm {
  std::string name;
  TrainConfig config;
};

struct AblationRow {
  std::string arm;
  std::uint64_t seed = 0;
  double mean_cpsnr = 0.0;
  double score = 0.0;  ///< normalized against ESA
  double best_val_loss = 0.0;
};

/// Trains every arm under every seed on `train_scenes` and evaluates on
/// `holdout`. Runs go to out_dir/<arm>_seed<s> when out_dir is set.
std::vector<AblationRow> run_ablation(const std::vector<AblationArm>& arms, const std::vector<std::uint64_t>& seeds,
                                      const std::vector<Scene>& train_scenes, const std::vector<Scene>& holdout,
                                      const std::filesystem::path& out_dir = {}, std::ostream* log = nullptr);

/// Mean of mean_cpsnr over the rows of one arm.
double arm_mean_cpsnr(const std::vector<AblationRow>& rows, const std::string& arm);

void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out);

}  // namespace mfsr::trainer
