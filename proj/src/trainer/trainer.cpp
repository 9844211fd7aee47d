#include "mfsr/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include "mfsr/baselines/baselines.hpp"
#include "mfsr/ndgrad/adam.hpp"
#include "mfsr/ndgrad/checkpoint.hpp"

namespace mfsr::trainer {

namespace fs = std::filesystem;
using ndgrad::Mode;
using ndgrad::Var;

double PlateauScheduler::step(double val_loss) {
  if (val_loss < best * (1.0 - threshold)) {
    best = val_loss;
    bad_epochs = 0;
  } else if (++bad_epochs > patience) {
    lr *= decay;
    bad_epochs = 0;
  }
  return lr;
}

double lr_plateau_step(PlateauScheduler& state, double val_loss) { return state.step(val_loss); }

std::vector<ndgrad::Parameter*> Model::trainable() {
  std::vector<ndgrad::Parameter*> out;
  for (const auto& p : net->params().all()) {
    if (p->trainable) out.push_back(p.get());
  }
  if (config.registered_loss) {
    for (const auto& p : shiftnet->params().all()) {
      if (p->trainable) out.push_back(p.get());
    }
  }
  return out;
}

Model build_model(const TrainConfig& cfg, std::size_t zoom) {
  cfg.validate();
  Model m;
  m.config = cfg;
  m.zoom = zoom;
  m.net = std::make_unique<hrnet::HighResNet>(highresnet_config(cfg, zoom), cfg.dtype, cfg.seed);
  m.shiftnet = std::make_unique<hrnet::ShiftNet>(shiftnet_config(cfg, zoom), cfg.dtype, cfg.seed + 1);
  return m;
}

namespace {

std::vector<ndgrad::NamedArray> export_model(const Model& model) {
  std::vector<ndgrad::NamedArray> out;
  out.emplace_back("meta.zoom", Tensor({1}, {static_cast<double>(model.zoom)}));
  for (auto& [name, t] : ndgrad::export_parameters(model.net->params())) out.emplace_back("highresnet." + name, t);
  for (auto& [name, t] : ndgrad::export_parameters(model.shiftnet->params())) out.emplace_back("shiftnet." + name, t);
  return out;
}

void import_model(Model& model, const std::vector<ndgrad::NamedArray>& arrays) {
  std::vector<ndgrad::NamedArray> hr, sn;
  for (const auto& [name, t] : arrays) {
    if (name.starts_with("highresnet.")) hr.emplace_back(name.substr(11), t);
    if (name.starts_with("shiftnet.")) sn.emplace_back(name.substr(9), t);
  }
  ndgrad::import_parameters(model.net->params(), hr);
  ndgrad::import_parameters(model.shiftnet->params(), sn);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull ^ (b + 0x632BE59BD9B4E019ull) ^ (c * 0xD6E8FEB86659FD93ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct Batch {
  hrnet::ViewBatch views;
  Tensor hr;
  Tensor mask;
};

// Training draws a random patch and beta-sampled views; evaluation takes the
// center patch and the clearest views.
Batch build_batch(const Model& m, const std::vector<const Scene*>& members, bool training, std::uint64_t seed) {
  const auto& cfg = m.config;
  std::vector<scenes::PaddedSet> sets;
  std::vector<Tensor> refs;
  std::vector<Tensor> hrs, masks;
  for (std::size_t b = 0; b < members.size(); ++b) {
    const Scene& scene = *members[b];
    if (!scene.hr) throw scenes::DataError("scene '" + scene.id + "' has no HR image for training");
    const std::size_t k = std::min(cfg.views, scene.num_views());
    const scenes::Patch patch =
        training ? scenes::patchify(scene, cfg.patch, mix(seed, b, 1))
                 : scenes::crop_scene(scene, (scene.height() - cfg.patch) / 2, (scene.width() - cfg.patch) / 2, cfg.patch);
    const auto idx = training ? scenes::sample_views(scene, k, cfg.beta, mix(seed, b, 2))
                              : [&] {
                                  auto order = scenes::clearest_first(scenes::clearance(scene));
                                  order.resize(k);
                                  return order;
                                }();
    std::vector<Tensor> views;
    for (std::size_t i : idx) views.push_back(patch.scene.lr_views[i].astype(cfg.dtype));
    refs.push_back(scenes::reference_frame(views, cfg.reference));
    sets.push_back(scenes::pad_imageset(views, cfg.views));
    hrs.push_back(patch.scene.hr->astype(cfg.dtype));
    masks.push_back(cfg.mask_loss ? patch.scene.target_mask() : Tensor::full(patch.scene.hr->shape(), 1.0));
  }
  Batch out;
  out.views = hrnet::make_view_batch(sets, refs);
  const auto& hs = hrs[0].shape();
  const std::size_t per = hrs[0].numel();
  out.hr = Tensor({members.size(), hs[0], hs[1], hs[2]}, cfg.dtype);
  out.mask = Tensor({members.size(), hs[0], hs[1], hs[2]});
  for (std::size_t b = 0; b < members.size(); ++b) {
    std::copy_n(hrs[b].data(), per, out.hr.data() + b * per);
    std::copy_n(masks[b].data(), per, out.mask.data() + b * per);
  }
  return out;
}

shiftlanczos::RegisteredLossOptions loss_options(const TrainConfig& cfg) {
  shiftlanczos::RegisteredLossOptions o;
  o.lambda = cfg.lambda;
  o.kind = cfg.loss;
  o.a = cfg.lanczos_a;
  o.max_shift = cfg.max_shift;
  o.differentiable_kernel = cfg.differentiable_kernel;
  o.border = cfg.border;
  return o;
}

Var batch_loss(const Model& m, const Batch& batch, Mode mode, std::uint64_t seed) {
  Var sr = m.net->forward(batch.views);
  const auto opts = loss_options(m.config);
  if (!m.config.registered_loss) return shiftlanczos::unregistered_loss(sr, batch.hr, batch.mask, opts);
  const hrnet::ShiftNet& sn = *m.shiftnet;
  auto predictor = [&sn, mode, seed](const Var& s, const Tensor& hr) {
    Var d = sn.forward(ndgrad::constant(hr), s, mode, seed);
    // The network measures shifts on its own input grid.
    const double factor = static_cast<double>(hr.dim(2)) / static_cast<double>(sn.config().input_side);
    return factor == 1.0 ? d : ndgrad::scale(d, factor);
  };
  return shiftlanczos::registered_loss(sr, batch.hr, batch.mask, predictor, opts).total;
}

std::vector<std::vector<const Scene*>> chunks(const std::vector<const Scene*>& items, std::size_t size) {
  std::vector<std::vector<const Scene*>> out;
  for (std::size_t i = 0; i < items.size(); i += size) {
    out.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(i),
                     items.begin() + static_cast<std::ptrdiff_t>(std::min(items.size(), i + size)));
  }
  return out;
}

}  // namespace

void save_model(const Model& model, const fs::path& path) { ndgrad::save_archive(path, export_model(model)); }

Model load_model(const fs::path& checkpoint) {
  const fs::path cfg_path = checkpoint.parent_path() / "config.txt";
  TrainConfig cfg;
  if (fs::exists(cfg_path)) trainer::apply(cfg, read_config_file(cfg_path));
  const auto arrays = ndgrad::load_archive(checkpoint);
  std::size_t zoom = 3;
  for (const auto& [name, t] : arrays) {
    if (name == "meta.zoom") zoom = static_cast<std::size_t>(t[0]);
  }
  Model m = build_model(cfg, zoom);
  import_model(m, arrays);
  return m;
}

void write_run_csv(const RunRecord& record, std::ostream& out) {
  out << "epoch,train_loss,val_loss,lr\n" << std::setprecision(17);
  for (const auto& e : record.epochs) out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr << '\n';
}

double validation_loss(const Model& model, const std::vector<Scene>& scenes) {
  if (scenes.empty()) throw std::invalid_argument("validation_loss: no scenes");
  ndgrad::NoGradGuard no_grad;
  std::vector<const Scene*> ptrs;
  for (const auto& s : scenes) ptrs.push_back(&s);
  double total = 0.0;
  for (const auto& group : chunks(ptrs, model.config.batch)) {
    const Batch batch = build_batch(model, group, false, 0);
    total += batch_loss(model, batch, Mode::eval, 0).value()[0] * static_cast<double>(group.size());
  }
  return total / static_cast<double>(scenes.size());
}

TrainResult train(const TrainConfig& cfg, const std::vector<Scene>& dataset, const fs::path& out_dir, std::ostream* log) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& s : dataset) {
    scenes::validate(s);
    if (!s.hr) throw scenes::DataError("train: scene '" + s.id + "' has no HR image");
    if (s.zoom != dataset[0].zoom) throw scenes::DataError("train: scenes differ in zoom");
    if (s.height() < cfg.patch || s.width() < cfg.patch) {
      throw scenes::DataError("train: scene '" + s.id + "' is smaller than the patch size");
    }
  }
  const auto split = scenes::split_by_id(dataset, cfg.val_percent);
  if (split.train.empty()) throw std::invalid_argument("train: split left no training scenes");
  std::vector<const Scene*> train_set;
  std::vector<Scene> val_set;
  for (std::size_t i : split.train) train_set.push_back(&dataset[i]);
  for (std::size_t i : split.validation) val_set.push_back(dataset[i]);
  if (val_set.empty()) {
    for (std::size_t i : split.train) val_set.push_back(dataset[i]);
  }
  if (train_set.size() < 2) throw std::invalid_argument("train: need at least two training scenes per batch");

  TrainResult result;
  result.model = build_model(cfg, dataset[0].zoom);
  Model& model = result.model;
  RunRecord& record = result.record;
  record.config = cfg;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_config_file(cfg, out_dir / "config.txt");
  }

  ndgrad::AdamState adam;
  adam.config.lr = cfg.lr;
  PlateauScheduler sched{cfg.lr, cfg.lr_decay, cfg.patience, cfg.plateau_threshold};
  auto params = model.trainable();

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<ndgrad::NamedArray> best_weights;
  std::size_t global_step = 0;
  bool stop = false;
  const auto t_start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
    std::vector<const Scene*> order = train_set;
    std::mt19937_64 rng(mix(cfg.seed, epoch, 0xE90C));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (const auto& group : chunks(order, cfg.batch)) {
      if (group.size() < 2) continue;  // batch norm needs two samples
      const std::uint64_t step_seed = mix(cfg.seed, global_step, 0x57E9);
      const Batch batch = build_batch(model, group, true, step_seed);
      double value;
      try {
        Var loss = batch_loss(model, batch, Mode::train, step_seed);
        value = loss.value()[0];
        const auto grads = ndgrad::backward(loss);
        ndgrad::adam_step(params, grads, adam);
      } catch (const ndgrad::NumericalError& e) {
        throw ndgrad::NumericalError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                     std::to_string(global_step) + " (lr " + std::to_string(adam.config.lr) +
                                     "): " + e.what());
      }
      record.step_losses.push_back(value);
      epoch_loss += value;
      ++epoch_steps;
      ++global_step;
      if (cfg.max_steps && global_step >= cfg.max_steps) {
        stop = true;
        break;
      }
    }
    const double val = validation_loss(model, val_set);
    EpochRecord er{epoch, epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0, val, adam.config.lr};
    record.epochs.push_back(er);
    adam.config.lr = sched.step(val);

    if (val < best_val) {
      best_val = val;
      record.best_epoch = epoch;
      best_weights = export_model(model);
      if (!out_dir.empty()) {
        ndgrad::save_archive(out_dir / "best.ckpt", best_weights);
        if (std::find(record.checkpoints.begin(), record.checkpoints.end(), (out_dir / "best.ckpt").string()) ==
            record.checkpoints.end()) {
          record.checkpoints.push_back((out_dir / "best.ckpt").string());
        }
      }
    }
    if (!out_dir.empty()) save_model(model, out_dir / "last.ckpt");
    if (log) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      *log << "epoch " << epoch << "  train " << std::setprecision(6) << er.train_loss << "  val " << val << "  lr "
           << er.lr << "  (" << std::fixed << std::setprecision(1) << secs << " s)" << std::defaultfloat << std::endl;
    }
  }
  if (!out_dir.empty()) {
    record.checkpoints.push_back((out_dir / "last.ckpt").string());
    std::ofstream run(out_dir / "run.csv");
    write_run_csv(record, run);
    std::ofstream steps(out_dir / "steps.csv");
    steps << "step,loss\n" << std::setprecision(17);
    for (std::size_t i = 0; i < record.step_losses.size(); ++i) steps << i << ',' << record.step_losses[i] << '\n';
  }
  if (!best_weights.empty()) import_model(model, best_weights);
  return result;
}

// ---- evaluation -------------------------------------------------------------------

Predictor model_predictor(const Model& model) {
  return [&model](const Scene& scene) {
    const auto& cfg = model.config;
    const std::size_t want = cfg.eval_views ? cfg.eval_views : cfg.views;
    auto order = scenes::clearest_first(scenes::clearance(scene));
    order.resize(std::min(want, order.size()));
    std::vector<Tensor> views;
    for (std::size_t i : order) views.push_back(scene.lr_views[i].astype(cfg.dtype));
    const std::size_t pad = std::max(cfg.eval_pad, scenes::next_power_of_two(views.size()));
    return hrnet::highresnet_forward(*model.net, views, cfg.reference, pad);
  };
}

Predictor ensemble_predictor(std::vector<Predictor> members) {
  if (members.empty()) throw std::invalid_argument("ensemble_predictor: no members");
  return [members = std::move(members)](const Scene& scene) {
    Tensor acc = members[0](scene).astype(ndgrad::Dtype::f64);
    for (std::size_t i = 1; i < members.size(); ++i) {
      const Tensor t = members[i](scene);
      if (t.shape() != acc.shape()) throw ndgrad::ShapeError("ensemble members disagree on output shape");
      for (std::size_t p = 0; p < acc.numel(); ++p) acc[p] += t[p];
    }
    for (double& v : acc.values()) v /= static_cast<double>(members.size());
    return acc;
  };
}

Predictor baseline_predictor(const std::string& method, std::size_t n_clearest) {
  const baselines::BaselineConfig cfg{baselines::parse_method(method), n_clearest};
  return [cfg](const Scene& scene) { return baselines::run_baseline(scene, cfg); };
}

kelvin::ScoreReport evaluate(const Predictor& predictor, const std::vector<Scene>& scenes, const EvalConfig& cfg,
                             std::ostream* warn) {
  std::map<std::string, double> model, base;
  for (const auto& scene : scenes) {
    if (!scene.hr) {
      if (warn) *warn << "warning: scene '" << scene.id << "' has no HR image; skipped\n";
      continue;
    }
    if (model.count(scene.id)) throw scenes::DataError("evaluate: duplicate scene id '" + scene.id + "'");
    const Tensor mask = scene.target_mask();
    const Tensor sr = predictor(scene);
    model[scene.id] = kelvin::registered_cpsnr(*scene.hr, sr, mask, cfg.border);
    base[scene.id] = kelvin::registered_cpsnr(*scene.hr, baselines::esa_baseline(scene, cfg.n_clearest), mask, cfg.border);
  }
  if (model.empty()) throw scenes::DataError("evaluate: no scene has an HR image");
  return kelvin::make_report(model, base);
}

// ---- ablations ---------------------------------------------------------------------

std::vector<AblationRow> run_ablation(const std::vector<AblationArm>& arms, const std::vector<std::uint64_t>& seeds,
                                      const std::vector<Scene>& train_scenes, const std::vector<Scene>& holdout,
                                      const fs::path& out_dir, std::ostream* log) {
  std::vector<AblationRow> rows;
  for (const auto& arm : arms) {
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = arm.config;
      cfg.seed = seed;
      const fs::path dir = out_dir.empty() ? fs::path{} : out_dir / (arm.name + "_seed" + std::to_string(seed));
      if (log) *log << "== arm " << arm.name << ", seed " << seed << std::endl;
      TrainResult r = train(cfg, train_scenes, dir, log);
      const auto report = evaluate(model_predictor(r.model), holdout, {cfg.eval_border, cfg.n_clearest});
      double best_val = std::numeric_limits<double>::infinity();
      for (const auto& e : r.record.epochs) best_val = std::min(best_val, e.val_loss);
      rows.push_back({arm.name, seed, report.mean_cpsnr(), report.aggregate, best_val});
      if (log) {
        *log << "   mean cPSNR " << report.mean_cpsnr() << " dB, score " << report.aggregate << std::endl;
      }
    }
  }
  return rows;
}

double arm_mean_cpsnr(const std::vector<AblationRow>& rows, const std::string& arm) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.arm == arm) {
      total += r.mean_cpsnr;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("no ablation rows for arm '" + arm + "'");
  return total / static_cast<double>(n);
}

void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out) {
  out << "arm,seed,mean_cpsnr_db,normalized_score,best_val_loss\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.arm << ',' << r.seed << ',' << r.mean_cpsnr << ',' << r.score << ',' << r.best_val_loss << '\n';
  }
}

}  // namespace mfsr::trainer
