#include "mfsr/trainer/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mfsr::trainer {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config: bad value '" + value + "' for " + key);
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) bad(key, v);
    return d;
  } catch (const std::logic_error&) {
    bad(key, v);
  }
}

std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') bad(key, v);
    const auto n = std::stoull(v, &pos);
    if (pos != v.size()) bad(key, v);
    return static_cast<std::size_t>(n);
  } catch (const std::logic_error&) {
    bad(key, v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  bad(key, v);
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string onoff(bool b) { return b ? "on" : "off"; }

std::string join(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

std::vector<std::size_t> split_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_size(key, trim(item)));
  if (out.empty()) bad(key, v);
  return out;
}

}  // namespace

TrainConfig TrainConfig::paper_scale() {
  TrainConfig c;
  c.batch = 32;
  c.epochs = 400;
  c.views = 32;
  c.patch = 64;
  c.hidden = 64;
  c.shiftnet_channels = {64, 64, 64, 64, 128, 128, 128, 128};
  c.shiftnet_fc = 1024;
  c.shiftnet_side = 128;
  c.eval_views = 32;
  return c;
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + what);
  };
  need(lr > 0, "lr must be positive");
  need(lr_decay > 0 && lr_decay <= 1, "lr_decay must be in (0,1]");
  need(patience >= 1, "patience must be >= 1");
  need(plateau_threshold >= 0, "plateau_threshold must be >= 0");
  need(batch >= 2, "batch must be >= 2 (batch norm statistics)");
  need(epochs >= 1, "epochs must be >= 1");
  need(views >= 1 && (views & (views - 1)) == 0, "views must be a power of two");
  need(patch >= 1, "patch must be positive");
  need(!std::isnan(beta), "beta must be a number");
  need(val_percent <= 50, "val_percent must be <= 50");
  need(lambda >= 0, "lambda must be >= 0");
  need(lanczos_a >= 1, "lanczos_a must be >= 1");
  need(max_shift > 0, "max_shift must be positive");
  need(hidden >= 1, "hidden must be positive");
  need(shiftnet_fc >= 1, "shiftnet_fc must be positive");
  need(shiftnet_dropout >= 0 && shiftnet_dropout < 1, "shiftnet_dropout must be in [0,1)");
  need(eval_pad >= 1 && (eval_pad & (eval_pad - 1)) == 0, "eval_pad must be a power of two");
  need(eval_views <= eval_pad && views <= eval_pad, "eval_pad must cover the evaluated views");
  need(n_clearest >= 1, "n_clearest must be >= 1");
  need(eval_border >= 0, "eval_border must be >= 0");
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply(TrainConfig& c, const ConfigMap& values) {
  for (const auto& [k, v] : values) {
    if (k == "lr") c.lr = to_double(k, v);
    else if (k == "lr_decay") c.lr_decay = to_double(k, v);
    else if (k == "patience") c.patience = to_size(k, v);
    else if (k == "plateau_threshold") c.plateau_threshold = to_double(k, v);
    else if (k == "batch") c.batch = to_size(k, v);
    else if (k == "epochs") c.epochs = to_size(k, v);
    else if (k == "max_steps") c.max_steps = to_size(k, v);
    else if (k == "views") c.views = to_size(k, v);
    else if (k == "patch") c.patch = to_size(k, v);
    else if (k == "beta") c.beta = to_double(k, v);
    else if (k == "reference") c.reference = scenes::parse_reference_mode(v);
    else if (k == "val_percent") c.val_percent = to_size(k, v);
    else if (k == "mask_loss") c.mask_loss = to_bool(k, v);
    else if (k == "registered_loss") c.registered_loss = to_bool(k, v);
    else if (k == "loss") {
      if (v == "clear_bias_mse") c.loss = shiftlanczos::LossKind::clear_bias_mse;
      else if (v == "mse") c.loss = shiftlanczos::LossKind::mse;
      else bad(k, v);
    } else if (k == "lambda") c.lambda = to_double(k, v);
    else if (k == "differentiable_kernel") c.differentiable_kernel = to_bool(k, v);
    else if (k == "lanczos_a") c.lanczos_a = static_cast<int>(to_size(k, v));
    else if (k == "max_shift") c.max_shift = to_double(k, v);
    else if (k == "border") c.border = to_size(k, v);
    else if (k == "hidden") c.hidden = to_size(k, v);
    else if (k == "global_residual") c.global_residual = to_bool(k, v);
    else if (k == "shiftnet_channels") c.shiftnet_channels = split_sizes(k, v);
    else if (k == "shiftnet_fc") c.shiftnet_fc = to_size(k, v);
    else if (k == "shiftnet_side") c.shiftnet_side = to_size(k, v);
    else if (k == "shiftnet_dropout") c.shiftnet_dropout = to_double(k, v);
    else if (k == "dtype") c.dtype = ndgrad::parse_dtype(v);
    else if (k == "eval_views") c.eval_views = to_size(k, v);
    else if (k == "eval_pad") c.eval_pad = to_size(k, v);
    else if (k == "n_clearest") c.n_clearest = to_size(k, v);
    else if (k == "eval_border") c.eval_border = static_cast<int>(to_size(k, v));
    else if (k == "seed") c.seed = to_size(k, v);
    else throw std::invalid_argument("config: unknown key '" + k + "'");
  }
}

ConfigMap to_map(const TrainConfig& c) {
  return {
      {"lr", fmt(c.lr)},
      {"lr_decay", fmt(c.lr_decay)},
      {"patience", std::to_string(c.patience)},
      {"plateau_threshold", fmt(c.plateau_threshold)},
      {"batch", std::to_string(c.batch)},
      {"epochs", std::to_string(c.epochs)},
      {"max_steps", std::to_string(c.max_steps)},
      {"views", std::to_string(c.views)},
      {"patch", std::to_string(c.patch)},
      {"beta", fmt(c.beta)},
      {"reference", scenes::to_string(c.reference)},
      {"val_percent", std::to_string(c.val_percent)},
      {"mask_loss", onoff(c.mask_loss)},
      {"registered_loss", onoff(c.registered_loss)},
      {"loss", c.loss == shiftlanczos::LossKind::mse ? "mse" : "clear_bias_mse"},
      {"lambda", fmt(c.lambda)},
      {"differentiable_kernel", onoff(c.differentiable_kernel)},
      {"lanczos_a", std::to_string(c.lanczos_a)},
      {"max_shift", fmt(c.max_shift)},
      {"border", std::to_string(c.border)},
      {"hidden", std::to_string(c.hidden)},
      {"global_residual", onoff(c.global_residual)},
      {"shiftnet_channels", join(c.shiftnet_channels)},
      {"shiftnet_fc", std::to_string(c.shiftnet_fc)},
      {"shiftnet_side", std::to_string(c.shiftnet_side)},
      {"shiftnet_dropout", fmt(c.shiftnet_dropout)},
      {"dtype", ndgrad::to_string(c.dtype)},
      {"eval_views", std::to_string(c.eval_views)},
      {"eval_pad", std::to_string(c.eval_pad)},
      {"n_clearest", std::to_string(c.n_clearest)},
      {"eval_border", std::to_string(c.eval_border)},
      {"seed", std::to_string(c.seed)},
  };
}

void write_config_file(const TrainConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  for (const auto& [k, v] : to_map(cfg)) out << k << " = " << v << '\n';
}

hrnet::HighResNetConfig highresnet_config(const TrainConfig& cfg, std::size_t zoom) {
  return {1, cfg.hidden, zoom, 3, cfg.global_residual};
}

hrnet::ShiftNetConfig shiftnet_config(const TrainConfig& cfg, std::size_t zoom) {
  hrnet::ShiftNetConfig s;
  s.input_side = cfg.shiftnet_side ? cfg.shiftnet_side : cfg.patch * zoom;
  s.channels = cfg.shiftnet_channels;
  s.fc_width = cfg.shiftnet_fc;
  s.dropout = cfg.shiftnet_dropout;
  return s;
}

}  // namespace mfsr::trainer
