#include <algorithm>
#include <cmath>
#include <cstring>

#include "mfsr/ndgrad/ops.hpp"

namespace mfsr::ndgrad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

Tensor like(const Var& x) { return Tensor(x.shape(), x.dtype()); }

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape(), promote(a.dtype(), b.dtype()));
  auto av = a.value().values(), bv = b.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[i];
  return record(std::move(out), {a, b}, "add", [](const Tensor& g, GradSink& sink) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!sink.wants(k)) continue;
      auto d = sink.at(k).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape(), promote(a.dtype(), b.dtype()));
  auto av = a.value().values(), bv = b.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] - bv[i];
  return record(std::move(out), {a, b}, "sub", [](const Tensor& g, GradSink& sink) {
    if (sink.wants(0)) {
      auto d = sink.at(0).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
    if (sink.wants(1)) {
      auto d = sink.at(1).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape(), promote(a.dtype(), b.dtype()));
  auto av = a.value().values(), bv = b.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
  return record(std::move(out), {a, b}, "mul", [a, b](const Tensor& g, GradSink& sink) {
    if (sink.wants(0)) {
      auto d = sink.at(0).values();
      auto bv = b.value().values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (sink.wants(1)) {
      auto d = sink.at(1).values();
      auto av = a.value().values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& x, double factor) {
  Tensor out = like(x);
  auto xv = x.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] * factor;
  return record(std::move(out), {x}, "scale", [factor](const Tensor& g, GradSink& sink) {
    auto d = sink.at(0).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * factor;
  });
}

Var add_scalar(const Var& x, double offset) {
  Tensor out = like(x);
  auto xv = x.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] + offset;
  return record(std::move(out), {x}, "add_scalar", [](const Tensor& g, GradSink& sink) {
    auto d = sink.at(0).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  });
}

Var square(const Var& x) {
  Tensor out = like(x);
  auto xv = x.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] * xv[i];
  return record(std::move(out), {x}, "square", [x](const Tensor& g, GradSink& sink) {
    auto d = sink.at(0).values();
    auto xv = x.value().values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * xv[i] * g[i];
  });
}

Var clamp(const Var& x, double lo, double hi) {
  Tensor out = like(x);
  auto xv = x.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(xv[i], lo, hi);
  return record(std::move(out), {x}, "clamp", [x, lo, hi](const Tensor& g, GradSink& sink) {
    auto d = sink.at(0).values();
    auto xv = x.value().values();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (xv[i] >= lo && xv[i] <= hi) d[i] += g[i];
    }
  });
}

Var sum(const Var& x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return record(Tensor({1}, {total}, x.dtype()), {x}, "sum", [](const Tensor& g, GradSink& sink) {
    auto d = sink.at(0).values();
    const double gv = g[0];
    for (double& v : d) v += gv;
  });
}

Var mean(const Var& x) {
  const auto n = static_cast<double>(x.value().numel());
  if (n == 0) throw ShapeError("mean of an empty tensor");
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return record(Tensor({1}, {total / n}, x.dtype()), {x}, "mean", [n](const Tensor& g, GradSink& sink) {
    auto d = sink.at(0).values();
    const double gv = g[0] / n;
    for (double& v : d) v += gv;
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshape(std::move(shape));
  return record(std::move(out), {x}, "reshape", [](const Tensor& g, GradSink& sink) {
    auto d = sink.at(0).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  });
}

Var row_norms(const Var& x) {
  if (x.shape().size() != 2) throw ShapeError("row_norms expects [N, D], got " + to_string(x.shape()));
  const std::size_t n = x.shape()[0], dim = x.shape()[1];
  Tensor out({n}, x.dtype());
  auto xv = x.value().values();
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) s += xv[r * dim + c] * xv[r * dim + c];
    out[r] = std::sqrt(s);
  }
  Tensor norms = out;
  return record(std::move(out), {x}, "row_norms", [x, norms, n, dim](const Tensor& g, GradSink& sink) {
    auto d = sink.at(0).values();
    auto xv = x.value().values();
    for (std::size_t r = 0; r < n; ++r) {
      if (norms[r] == 0.0) continue;
      for (std::size_t c = 0; c < dim; ++c) d[r * dim + c] += g[r] * xv[r * dim + c] / norms[r];
    }
  });
}

// ---- structural -------------------------------------------------------------

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat axis out of range for " + to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  Dtype dtype = parts[0].dtype();
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) {
        throw ShapeError("concat: extent mismatch on axis " + std::to_string(d) + ": " +
                         to_string(s) + " vs " + to_string(first));
      }
    }
    out_shape[axis] += s[axis];
    dtype = promote(dtype, p.dtype());
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  Tensor out(out_shape, dtype);
  const std::size_t out_block = out_shape[axis] * inner;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    offsets.push_back(offset);
    const std::size_t block = p.shape()[axis] * inner;
    const double* src = p.value().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * block, block, out.data() + o * out_block + offset);
    }
    offset += block;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  std::vector<std::size_t> blocks;
  for (const Var& p : parts) blocks.push_back(p.shape()[axis] * inner);
  return record(std::move(out), std::move(inputs), "concat",
                [offsets, blocks, outer, out_block](const Tensor& g, GradSink& sink) {
                  for (std::size_t k = 0; k < blocks.size(); ++k) {
                    if (!sink.wants(k)) continue;
                    double* d = sink.at(k).data();
                    for (std::size_t o = 0; o < outer; ++o) {
                      const double* src = g.data() + o * out_block + offsets[k];
                      for (std::size_t i = 0; i < blocks[k]; ++i) d[o * blocks[k] + i] += src[i];
                    }
                  }
                });
}

Var take_rows(const Var& x, std::span<const std::size_t> rows) {
  const Shape& s = x.shape();
  if (s.empty()) throw ShapeError("take_rows on a scalar");
  const std::size_t row_size = numel(s) / s[0];
  Shape out_shape = s;
  out_shape[0] = rows.size();
  Tensor out(out_shape, x.dtype());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= s[0]) throw ShapeError("take_rows: row index out of range");
    std::copy_n(x.value().data() + rows[r] * row_size, row_size, out.data() + r * row_size);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return record(std::move(out), {x}, "take_rows", [idx, row_size](const Tensor& g, GradSink& sink) {
    double* d = sink.at(0).data();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t i = 0; i < row_size; ++i) d[idx[r] * row_size + i] += g[r * row_size + i];
    }
  });
}

Var gated_add(const Var& base, const Var& update, std::span<const std::uint8_t> use_update) {
  require_same_shape(base, update, "gated_add");
  const Shape& s = base.shape();
  if (s.empty() || use_update.size() != s[0]) {
    throw ShapeError("gated_add: need one gate per row of " + to_string(s));
  }
  const std::size_t row_size = numel(s) / s[0];
  Tensor out(s, promote(base.dtype(), update.dtype()));
  auto bv = base.value().values(), uv = update.value().values();
  for (std::size_t r = 0; r < s[0]; ++r) {
    for (std::size_t i = r * row_size; i < (r + 1) * row_size; ++i) {
      out[i] = use_update[r] ? bv[i] + uv[i] : bv[i];
    }
  }
  std::vector<std::uint8_t> gates(use_update.begin(), use_update.end());
  return record(std::move(out), {base, update}, "gated_add",
                [gates, row_size](const Tensor& g, GradSink& sink) {
                  if (sink.wants(0)) {
                    auto d = sink.at(0).values();
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
                  }
                  if (sink.wants(1)) {
                    auto d = sink.at(1).values();
                    for (std::size_t r = 0; r < gates.size(); ++r) {
                      if (!gates[r]) continue;
                      for (std::size_t i = r * row_size; i < (r + 1) * row_size; ++i) d[i] += g[i];
                    }
                  }
                });
}

Var crop2d(const Var& x, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("crop2d expects NCHW, got " + to_string(s));
  if (top + h > s[2] || left + w > s[3]) {
    throw ShapeError("crop2d window exceeds extents " + to_string(s));
  }
  const std::size_t maps = s[0] * s[1], H = s[2], W = s[3];
  Tensor out({s[0], s[1], h, w}, x.dtype());
  for (std::size_t m = 0; m < maps; ++m) {
    for (std::size_t y = 0; y < h; ++y) {
      std::copy_n(x.value().data() + (m * H + top + y) * W + left, w, out.data() + (m * h + y) * w);
    }
  }
  return record(std::move(out), {x}, "crop2d", [=](const Tensor& g, GradSink& sink) {
    double* d = sink.at(0).data();
    for (std::size_t m = 0; m < maps; ++m) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t c = 0; c < w; ++c) d[(m * H + top + y) * W + left + c] += g[(m * h + y) * w + c];
      }
    }
  });
}

Var center_spatial(const Var& x) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("center_spatial expects NCHW, got " + to_string(s));
  const std::size_t maps = s[0] * s[1], area = s[2] * s[3];
  Tensor out = x.value();
  for (std::size_t m = 0; m < maps; ++m) {
    double* p = out.data() + m * area;
    double mu = 0.0;
    for (std::size_t i = 0; i < area; ++i) mu += p[i];
    mu /= static_cast<double>(area);
    for (std::size_t i = 0; i < area; ++i) p[i] -= mu;
  }
  return record(std::move(out), {x}, "center_spatial", [maps, area](const Tensor& g, GradSink& sink) {
    double* d = sink.at(0).data();
    for (std::size_t m = 0; m < maps; ++m) {
      double gm = 0.0;
      for (std::size_t i = 0; i < area; ++i) gm += g[m * area + i];
      gm /= static_cast<double>(area);
      for (std::size_t i = 0; i < area; ++i) d[m * area + i] += g[m * area + i] - gm;
    }
  });
}

}  // namespace mfsr::ndgrad
