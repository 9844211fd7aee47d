#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mfsr/scenes/scene.hpp"

namespace mfsr::scenes {

std::vector<std::size_t> clearance(const Scene& scene) {
  std::vector<std::size_t> out;
  out.reserve(scene.quality_maps.size());
  for (std::size_t i = 0; i < scene.quality_maps.size(); ++i) {
    std::size_t count = 0;
    for (double v : scene.quality_maps[i].values()) {
      if (v == 1.0) {
        ++count;
      } else if (v != 0.0) {
        throw DataError("scene '" + scene.id + "': quality map " + std::to_string(i) + " is not binary");
      }
    }
    out.push_back(count);
  }
  return out;
}

std::vector<std::size_t> clearest_first(const std::vector<std::size_t>& clearances) {
  std::vector<std::size_t> idx(clearances.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return clearances[a] > clearances[b]; });
  return idx;
}

std::vector<std::size_t> sample_views(const std::vector<std::size_t>& clearances, std::size_t pixels,
                                      std::size_t k, double beta, std::uint64_t seed) {
  const std::size_t n = clearances.size();
  if (k > n) {
    throw std::invalid_argument("sample_views: k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " views");
  }
  if (std::isnan(beta)) throw std::invalid_argument("sample_views: beta is NaN");
  if (pixels == 0) throw std::invalid_argument("sample_views: pixel count must be positive");
  if (beta == kBetaInfinity) {
    auto order = clearest_first(clearances);
    order.resize(k);
    return order;
  }
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = static_cast<double>(clearances[i]) / static_cast<double>(pixels);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<std::size_t> out;
  out.reserve(k);
  std::vector<double> w;
  while (out.size() < k) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i : remaining) top = std::max(top, beta * score[i]);
    w.assign(remaining.size(), 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < remaining.size(); ++r) {
      w[r] = std::exp(beta * score[remaining[r]] - top);
      total += w[r];
    }
    double u = unif(rng) * total;
    std::size_t pick = remaining.size() - 1;
    for (std::size_t r = 0; r < remaining.size(); ++r) {
      if (u < w[r]) {
        pick = r;
        break;
      }
      u -= w[r];
    }
    out.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

std::vector<std::size_t> sample_views(const Scene& scene, std::size_t k, double beta, std::uint64_t seed) {
  return sample_views(clearance(scene), scene.height() * scene.width(), k, beta, seed);
}

std::string to_string(ReferenceMode mode) {
  switch (mode) {
    case ReferenceMode::median: return "median";
    case ReferenceMode::mean: return "mean";
    case ReferenceMode::none: return "none";
  }
  return "median";
}

ReferenceMode parse_reference_mode(const std::string& text) {
  if (text == "median") return ReferenceMode::median;
  if (text == "mean") return ReferenceMode::mean;
  if (text == "none") return ReferenceMode::none;
  throw std::invalid_argument("unknown reference mode '" + text + "' (expected median, mean or none)");
}

Tensor reference_frame(const std::vector<Tensor>& views, ReferenceMode mode) {
  if (views.empty()) throw std::invalid_argument("reference_frame: empty view list");
  const auto& shape = views[0].shape();
  for (const auto& v : views) {
    if (v.shape() != shape) throw ndgrad::ShapeError("reference_frame: views differ in shape");
  }
  Tensor out(shape, views[0].dtype());
  const std::size_t n = views[0].numel(), k = views.size();
  if (mode == ReferenceMode::none) return out;
  if (mode == ReferenceMode::mean) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (const auto& v : views) s += v[i];
      out[i] = s / static_cast<double>(k);
    }
  } else {
    std::vector<double> stack(k);
    const std::size_t mid = (k - 1) / 2;  // lower median
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) stack[j] = views[j][i];
      std::nth_element(stack.begin(), stack.begin() + static_cast<std::ptrdiff_t>(mid), stack.end());
      out[i] = stack[mid];
    }
  }
  out.round_to_dtype();
  return out;
}

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

PaddedSet pad_imageset(const std::vector<Tensor>& views, std::size_t target_k) {
  if (views.empty()) throw std::invalid_argument("pad_imageset: empty view list");
  if (views.size() > target_k) {
    throw std::invalid_argument("pad_imageset: " + std::to_string(views.size()) + " views exceed target " +
                                std::to_string(target_k));
  }
  PaddedSet out;
  out.views = views;
  out.alpha.assign(views.size(), 1);
  while (out.views.size() < target_k) {
    out.views.emplace_back(views[0].shape(), views[0].dtype());
    out.alpha.push_back(0);
  }
  return out;
}

namespace {

Tensor crop(const Tensor& t, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  const std::size_t W = t.dim(2);
  Tensor out({1, h, w}, t.dtype());
  for (std::size_t y = 0; y < h; ++y) {
    const double* src = t.data() + (top + y) * W + left;
    std::copy(src, src + w, out.data() + y * w);
  }
  return out;
}

}  // namespace

Patch crop_scene(const Scene& scene, std::size_t top, std::size_t left, std::size_t patch) {
  validate(scene);
  if (patch == 0 || top + patch > scene.height() || left + patch > scene.width()) {
    throw std::invalid_argument("patch of " + std::to_string(patch) + " at (" + std::to_string(top) + "," +
                                std::to_string(left) + ") exceeds the " + std::to_string(scene.height()) + "x" +
                                std::to_string(scene.width()) + " views");
  }
  Patch p;
  p.top = top;
  p.left = left;
  Scene& s = p.scene;
  s.id = scene.id;
  s.band = scene.band;
  s.zoom = scene.zoom;
  s.oracle_shifts = scene.oracle_shifts;
  for (std::size_t i = 0; i < scene.num_views(); ++i) {
    s.lr_views.push_back(crop(scene.lr_views[i], top, left, patch, patch));
    s.quality_maps.push_back(crop(scene.quality_maps[i], top, left, patch, patch));
  }
  const std::size_t z = scene.zoom;
  if (scene.hr) s.hr = crop(*scene.hr, top * z, left * z, patch * z, patch * z);
  if (scene.hr_mask) s.hr_mask = crop(*scene.hr_mask, top * z, left * z, patch * z, patch * z);
  return p;
}

Patch patchify(const Scene& scene, std::size_t patch, std::uint64_t seed) {
  validate(scene);
  if (patch == 0 || patch > scene.height() || patch > scene.width()) {
    throw std::invalid_argument("patch size " + std::to_string(patch) + " larger than the " +
                                std::to_string(scene.height()) + "x" + std::to_string(scene.width()) + " views");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> ry(0, scene.height() - patch), rx(0, scene.width() - patch);
  const std::size_t top = ry(rng);
  const std::size_t left = rx(rng);
  return crop_scene(scene, top, left, patch);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Split split_by_id(const std::vector<Scene>& scenes, std::size_t val_percent) {
  if (val_percent > 100) throw std::invalid_argument("split_by_id: val_percent above 100");
  Split s;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (fnv1a(scenes[i].id) % 100 >= 100 - val_percent) {
      s.validation.push_back(i);
    } else {
      s.train.push_back(i);
    }
  }
  return s;
}

}  // namespace mfsr::scenes
