#include "mfsr/cli/utils.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <ostream>
#include <stdexcept>

namespace mfsr::cli {

Parallax parallax_ratio(double altitude_m, double height_m, double ground_motion_m) {
  if (!std::isfinite(altitude_m) || !std::isfinite(height_m) || !std::isfinite(ground_motion_m)) {
    throw std::invalid_argument("parallax: inputs must be finite");
  }
  if (height_m < 0) throw std::invalid_argument("parallax: object height must be >= 0");
  if (altitude_m <= height_m) throw std::invalid_argument("parallax: altitude must exceed the object height");
  Parallax p;
  p.ratio = altitude_m / (altitude_m - height_m);
  p.motion_lag = ground_motion_m * (p.ratio - 1.0) / p.ratio;
  return p;
}

double chirp_value(const ChirpConfig& cfg, double t) {
  const double w = cfg.omega + cfg.slope * t;
  return cfg.amplitude * std::sin(2.0 * std::numbers::pi * w * t);
}

SampleTrain sample_chirp(const ChirpConfig& cfg, double rate) {
  if (!(rate > 0) || !(cfg.duration > 0)) throw std::invalid_argument("chirp: rates and duration must be positive");
  // Tolerance keeps duration * rate = 24 from rounding down to 23.
  const auto n = static_cast<std::size_t>(std::ceil(cfg.duration * rate - 1e-9));
  SampleTrain s;
  s.t.reserve(n);
  s.value.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    s.t.push_back(t);
    s.value.push_back(chirp_value(cfg, t));
  }
  return s;
}

ChirpDemo chirp_demo(const ChirpConfig& cfg) {
  const double dense = cfg.dense_rate > 0 ? cfg.dense_rate : 20.0 * std::max(cfg.hr_rate, cfg.lr_rate);
  return {sample_chirp(cfg, dense), sample_chirp(cfg, cfg.hr_rate), sample_chirp(cfg, cfg.lr_rate)};
}

void write_chirp_csv(const ChirpDemo& demo, std::ostream& out) {
  struct Row {
    double chirp = 0;
    std::string hr, lr;
  };
  // Times from different trains are merged when they agree to 1e-9 s.
  auto key = [](double t) { return std::llround(t * 1e9); };
  std::map<long long, std::pair<double, Row>> rows;
  auto cell = [](double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
  };
  for (std::size_t i = 0; i < demo.dense.t.size(); ++i) {
    rows[key(demo.dense.t[i])] = {demo.dense.t[i], {demo.dense.value[i], {}, {}}};
  }
  auto merge = [&](const SampleTrain& s, bool hr) {
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      auto [it, fresh] = rows.try_emplace(key(s.t[i]), s.t[i], Row{s.value[i], {}, {}});
      (hr ? it->second.second.hr : it->second.second.lr) = cell(s.value[i]);
    }
  };
  merge(demo.hr, true);
  merge(demo.lr, false);
  out << "t,chirp,hr_samples,lr_samples\n";
  for (const auto& [k, tr] : rows) {
    out << cell(tr.first) << ',' << cell(tr.second.chirp) << ',' << tr.second.hr << ',' << tr.second.lr << '\n';
  }
}

ChirpDemo chirp_demo(const std::filesystem::path& out_csv, const ChirpConfig& cfg) {
  ChirpDemo demo = chirp_demo(cfg);
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write " + out_csv.string());
  write_chirp_csv(demo, out);
  return demo;
}

double dominant_frequency(const std::vector<double>& samples, double rate) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("dominant_frequency: need at least two samples");
  double mean = 0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n);
      acc += (samples[i] - mean) * std::polar(1.0, phase);
    }
    if (std::abs(acc) > best_mag + 1e-12) {
      best_mag = std::abs(acc);
      best = k;
    }
  }
  return static_cast<double>(best) * rate / static_cast<double>(n);
}

}  // namespace mfsr::cli
