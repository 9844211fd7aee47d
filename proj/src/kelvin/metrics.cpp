#include "mfsr/kelvin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace mfsr::kelvin {

using ndgrad::ShapeError;

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + ndgrad::to_string(a.shape()) + " vs " +
                     ndgrad::to_string(b.shape()));
  }
}

void require_spatial(const Tensor& t, const char* what) {
  if (t.rank() < 2) throw ShapeError(std::string(what) + ": need at least 2 dimensions");
}

struct ClearStats {
  double count = 0, sum_d = 0, sum_d2 = 0;
};

ClearStats clear_stats(const double* hr, const double* sr, const double* m, std::size_t n) {
  ClearStats s;
  for (std::size_t i = 0; i < n; ++i) {
    if (m[i] == 0.0) continue;
    const double d = hr[i] - sr[i];
    s.count += 1;
    s.sum_d += d;
  }
  if (s.count == 0) return s;
  const double b = s.sum_d / s.count;
  for (std::size_t i = 0; i < n; ++i) {
    if (m[i] == 0.0) continue;
    const double e = hr[i] - sr[i] - b;
    s.sum_d2 += e * e;
  }
  return s;
}

double to_db(double mse) { return -10.0 * std::log10(std::max(mse, kMseFloor)); }

}  // namespace

double brightness_bias(const Tensor& hr, const Tensor& sr, const Tensor& mask) {
  require_same(hr, sr, "brightness_bias");
  require_same(hr, mask, "brightness_bias");
  auto s = clear_stats(hr.data(), sr.data(), mask.data(), hr.numel());
  if (s.count == 0) throw std::invalid_argument("brightness_bias: mask has no clear pixels");
  return s.sum_d / s.count;
}

double clear_mse(const Tensor& hr, const Tensor& sr, const Tensor& mask) {
  require_same(hr, sr, "clear_mse");
  require_same(hr, mask, "clear_mse");
  auto s = clear_stats(hr.data(), sr.data(), mask.data(), hr.numel());
  if (s.count == 0) throw std::invalid_argument("clear_mse: mask has no clear pixels");
  return s.sum_d2 / s.count;
}

double cpsnr(const Tensor& hr, const Tensor& sr, const Tensor& mask) { return to_db(clear_mse(hr, sr, mask)); }

Tensor crop_spatial(const Tensor& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  require_spatial(img, "crop_spatial");
  const std::size_t H = img.dim(img.rank() - 2), W = img.dim(img.rank() - 1);
  if (top + h > H || left + w > W) throw ShapeError("crop_spatial: window exceeds the image");
  ndgrad::Shape shape = img.shape();
  shape[shape.size() - 2] = h;
  shape[shape.size() - 1] = w;
  Tensor out(shape, img.dtype());
  const std::size_t planes = img.numel() / (H * W);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < h; ++y) {
      const double* src = img.data() + p * H * W + (top + y) * W + left;
      std::copy(src, src + w, out.data() + (p * h + y) * w);
    }
  }
  return out;
}

double registered_cpsnr(const Tensor& hr, const Tensor& sr, const Tensor& mask, int border) {
  require_same(hr, sr, "registered_cpsnr");
  require_same(hr, mask, "registered_cpsnr");
  require_spatial(hr, "registered_cpsnr");
  if (border < 0) throw std::invalid_argument("registered_cpsnr: negative border");
  const std::size_t H = hr.dim(hr.rank() - 2), W = hr.dim(hr.rank() - 1);
  const std::size_t d = static_cast<std::size_t>(border);
  if (H < 2 * d + 1 || W < 2 * d + 1) {
    throw ShapeError("registered_cpsnr: image smaller than 2*border+1 per side");
  }
  const std::size_t h = H - 2 * d, w = W - 2 * d;
  const Tensor sr_c = crop_spatial(sr, d, d, h, w);
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t u = 0; u <= 2 * d; ++u) {
    for (std::size_t v = 0; v <= 2 * d; ++v) {
      const Tensor hr_c = crop_spatial(hr, u, v, h, w);
      const Tensor m_c = crop_spatial(mask, u, v, h, w);
      auto s = clear_stats(hr_c.data(), sr_c.data(), m_c.data(), hr_c.numel());
      if (s.count == 0) continue;
      any = true;
      best = std::max(best, to_db(s.sum_d2 / s.count));
    }
  }
  if (!any) throw std::invalid_argument("registered_cpsnr: no clear pixels at any offset");
  return best;
}

double ScoreReport::mean_cpsnr() const {
  double total = 0;
  for (const auto& s : scenes) total += s.cpsnr_db;
  return scenes.empty() ? 0.0 : total / static_cast<double>(scenes.size());
}

double ScoreReport::mean_baseline_cpsnr() const {
  double total = 0;
  for (const auto& s : scenes) total += s.baseline_cpsnr_db;
  return scenes.empty() ? 0.0 : total / static_cast<double>(scenes.size());
}

ScoreReport make_report(const std::map<std::string, double>& model, const std::map<std::string, double>& baseline) {
  if (model.size() != baseline.size()) throw std::invalid_argument("leaderboard_score: scene sets differ");
  if (model.empty()) throw std::invalid_argument("leaderboard_score: no scenes");
  ScoreReport report;
  double total = 0;
  for (const auto& [id, db] : model) {
    auto it = baseline.find(id);
    if (it == baseline.end()) throw std::invalid_argument("leaderboard_score: no baseline for scene '" + id + "'");
    if (db <= 0.0) throw std::invalid_argument("leaderboard_score: non-positive cPSNR for scene '" + id + "'");
    const double norm = it->second / db;
    report.scenes.push_back({id, db, it->second, norm});
    total += norm;
  }
  report.aggregate = total / static_cast<double>(report.scenes.size());
  return report;
}

double leaderboard_score(const std::map<std::string, double>& model,
                         const std::map<std::string, double>& baseline) {
  return make_report(model, baseline).aggregate;
}

void write_csv(const ScoreReport& report, std::ostream& out) {
  out << "scene_id,cpsnr_db,baseline_cpsnr_db,normalized_score\n";
  out << std::setprecision(17);
  for (const auto& s : report.scenes) {
    out << s.scene_id << ',' << s.cpsnr_db << ',' << s.baseline_cpsnr_db << ',' << s.normalized_score << '\n';
  }
}

void save_csv(const ScoreReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(report, out);
}

namespace {

// Per-sample residual statistics shared by both losses. With bias correction
// the residual is (hr - sr - b_n); the gradient of the mean squared residual
// with respect to sr is -2 m (hr - sr - b_n) / c_n because the clear residuals
// sum to zero.
Var masked_loss(const Var& sr, const Tensor& hr, const Tensor& mask, bool bias_corrected, const char* op) {
  if (sr.shape() != hr.shape() || hr.shape() != mask.shape()) {
    throw ShapeError(std::string(op) + ": sr, hr and mask shapes differ");
  }
  if (sr.value().rank() < 1 || sr.shape()[0] == 0) throw ShapeError(std::string(op) + ": empty batch");
  const std::size_t N = sr.shape()[0];
  const std::size_t per = sr.value().numel() / N;
  auto resid = std::make_shared<Tensor>(sr.shape());
  std::vector<double> counts(N, 0.0);
  double total = 0.0;
  const double* s = sr.value().data();
  for (std::size_t n = 0; n < N; ++n) {
    const double* h = hr.data() + n * per;
    const double* m = mask.data() + n * per;
    const double* p = s + n * per;
    double c = 0, sd = 0;
    for (std::size_t i = 0; i < per; ++i) {
      if (m[i] == 0.0) continue;
      c += 1;
      sd += h[i] - p[i];
    }
    counts[n] = c;
    if (c == 0) continue;
    const double b = bias_corrected ? sd / c : 0.0;
    double sq = 0;
    double* r = resid->data() + n * per;
    for (std::size_t i = 0; i < per; ++i) {
      if (m[i] == 0.0) continue;
      r[i] = h[i] - p[i] - b;
      sq += r[i] * r[i];
    }
    total += sq / c;
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(N), sr.dtype());
  return ndgrad::record(std::move(out), {sr}, op, [resid, counts, N, per](const Tensor& g, ndgrad::GradSink& sink) {
    auto d = sink.at(0).values();
    const double go = g[0] / static_cast<double>(N);
    for (std::size_t n = 0; n < N; ++n) {
      if (counts[n] == 0) continue;
      const double k = -2.0 * go / counts[n];
      const double* r = resid->data() + n * per;
      for (std::size_t i = 0; i < per; ++i) d[n * per + i] += k * r[i];
    }
  });
}

}  // namespace

Var clear_mse_loss(const Var& sr, const Tensor& hr, const Tensor& mask) {
  return masked_loss(sr, hr, mask, true, "clear_mse_loss");
}

Var masked_mse_loss(const Var& sr, const Tensor& hr, const Tensor& mask) {
  return masked_loss(sr, hr, mask, false, "masked_mse_loss");
}

}  // namespace mfsr::kelvin
