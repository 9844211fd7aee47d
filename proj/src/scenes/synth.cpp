#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>

#include "mfsr/scenes/scene.hpp"

namespace mfsr::scenes {

namespace fs = std::filesystem;

namespace {

using Image = std::vector<double>;  // row-major side x side

void gaussian_blur(Image& img, std::size_t side, double sigma) {
  if (sigma <= 0) return;
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * r + 1);
  double total = 0;
  for (int i = -r; i <= r; ++i) total += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= total;
  auto at = [side](long i) {
    const long n = static_cast<long>(side);
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return static_cast<std::size_t>(std::clamp(i, 0L, n - 1));
  };
  Image tmp(img.size());
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * img[y * side + at(static_cast<long>(x) + i)];
      tmp[y * side + x] = s;
    }
  }
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp[at(static_cast<long>(y) + i) * side + x];
      img[y * side + x] = s;
    }
  }
}

struct Point {
  double x, y;
};

bool inside(const std::vector<Point>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

Image make_canvas(const SynthConfig& cfg, std::size_t side, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Image img(side * side);
  for (double& v : img) v = gauss(rng);
  gaussian_blur(img, side, cfg.field_sigma);
  double mean = 0, var = 0;
  for (double v : img) mean += v;
  mean /= static_cast<double>(img.size());
  for (double v : img) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(img.size())) + 1e-12;
  for (double& v : img) v = 0.5 + 0.12 * (v - mean) / sd;

  for (std::size_t p = 0; p < cfg.polygons; ++p) {
    const double cx = unif(rng) * side, cy = unif(rng) * side;
    const double radius = (0.05 + 0.15 * unif(rng)) * side;
    const int n = 3 + static_cast<int>(unif(rng) * 4);
    std::vector<double> angles(n);
    for (double& a : angles) a = unif(rng) * 2 * M_PI;
    std::sort(angles.begin(), angles.end());
    std::vector<Point> poly;
    for (double a : angles) {
      const double rr = radius * (0.6 + 0.4 * unif(rng));
      poly.push_back({cx + rr * std::cos(a), cy + rr * std::sin(a)});
    }
    const double level = (unif(rng) < 0.5 ? -1.0 : 1.0) * (0.1 + 0.2 * unif(rng));
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        if (inside(poly, x + 0.5, y + 0.5)) img[y * side + x] += level;
      }
    }
  }
  for (double& v : img) v = std::clamp(v, 0.02, 0.98);
  return img;
}

}  // namespace

Scene synth_scene(const SynthConfig& cfg, std::uint64_t seed, const std::string& id) {
  if (cfg.lr_size == 0 || cfg.views == 0 || cfg.zoom == 0) throw std::invalid_argument("synth_scene: sizes must be positive");
  if (cfg.noise_sigma < 0 || cfg.cloud_rate < 0 || cfg.cloud_rate > 1 || cfg.max_shift < 0) {
    throw std::invalid_argument("synth_scene: invalid noise, cloud rate or shift range");
  }
  const std::size_t z = cfg.zoom, lr = cfg.lr_size, hr = lr * z;
  const std::size_t margin = static_cast<std::size_t>(std::ceil(cfg.max_shift * z)) + 4;
  const std::size_t side = hr + 2 * margin;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Image canvas_img = make_canvas(cfg, side, rng);
  const Tensor canvas({1, side, side}, canvas_img);

  auto center = [&](const Tensor& big) {
    Tensor out({1, hr, hr});
    for (std::size_t y = 0; y < hr; ++y) {
      for (std::size_t x = 0; x < hr; ++x) out[y * hr + x] = big[(y + margin) * side + x + margin];
    }
    return out;
  };

  Scene scene;
  scene.id = id;
  scene.band = Band::synthetic;
  scene.zoom = z;
  scene.hr = center(canvas);
  scene.hr_mask = Tensor::full({1, hr, hr}, 1.0);

  for (std::size_t k = 0; k < cfg.views; ++k) {
    const Shift s{(2 * unif(rng) - 1) * cfg.max_shift, (2 * unif(rng) - 1) * cfg.max_shift};
    scene.oracle_shifts.push_back(s);
    const Tensor moved = center(shiftlanczos::shift_image(
        canvas, {s.dx * static_cast<double>(z), s.dy * static_cast<double>(z)}, {3, cfg.max_shift * z + 1}));
    Tensor view({1, lr, lr});
    const double inv = 1.0 / static_cast<double>(z * z);
    for (std::size_t y = 0; y < lr; ++y) {
      for (std::size_t x = 0; x < lr; ++x) {
        double acc = 0;
        for (std::size_t dy = 0; dy < z; ++dy) {
          for (std::size_t dx = 0; dx < z; ++dx) acc += moved[(y * z + dy) * hr + x * z + dx];
        }
        view[y * lr + x] = acc * inv;
      }
    }
    if (cfg.noise_sigma > 0) {
      for (double& v : view.values()) v = std::clamp(v + cfg.noise_sigma * gauss(rng), 0.0, 1.0);
    }
    Tensor qm = Tensor::full({1, lr, lr}, 1.0);
    if (cfg.cloud_rate > 0) {
      const double target = std::min(0.9, 2.0 * cfg.cloud_rate * unif(rng));
      std::size_t occluded = 0;
      for (int attempt = 0; attempt < 200 && occluded < target * lr * lr; ++attempt) {
        const double cx = unif(rng) * lr, cy = unif(rng) * lr;
        const double rx = 1.5 + unif(rng) * lr / 5.0, ry = 1.5 + unif(rng) * lr / 5.0;
        const double bright = 0.85 + 0.1 * unif(rng);
        for (std::size_t y = 0; y < lr; ++y) {
          for (std::size_t x = 0; x < lr; ++x) {
            const double u = (x + 0.5 - cx) / rx, v = (y + 0.5 - cy) / ry;
            if (u * u + v * v > 1.0) continue;
            if (qm[y * lr + x] == 1.0) ++occluded;
            qm[y * lr + x] = 0.0;
            view[y * lr + x] = bright;
          }
        }
      }
    }
    scene.lr_views.push_back(std::move(view));
    scene.quality_maps.push_back(std::move(qm));
  }
  validate(scene);
  return scene;
}

std::vector<Scene> synth_dataset(const fs::path& root, std::size_t count, const SynthConfig& cfg, std::uint64_t seed) {
  std::vector<Scene> out;
  nlohmann::json ids = nlohmann::json::array();
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene%03zu", i);
    out.push_back(synth_scene(cfg, seed + i, name));
    ids.push_back(name);
  }
  if (!root.empty()) {
    fs::create_directories(root);
    for (const auto& s : out) write_scene(s, root / s.id);
    nlohmann::json j;
    j["generator"] = "synth_scene";
    j["seed"] = seed;
    j["count"] = count;
    j["config"] = {{"lr_size", cfg.lr_size},       {"views", cfg.views},         {"zoom", cfg.zoom},
                   {"noise_sigma", cfg.noise_sigma}, {"cloud_rate", cfg.cloud_rate}, {"max_shift", cfg.max_shift},
                   {"field_sigma", cfg.field_sigma}, {"polygons", cfg.polygons}};
    j["scenes"] = ids;
    std::ofstream m(root / "manifest.json");
    m << j.dump(2) << '\n';
    if (!m) throw DataError("cannot write " + (root / "manifest.json").string());
  }
  return out;
}

}  // namespace mfsr::scenes
