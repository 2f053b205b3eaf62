// Copyright 2026 The embedlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "embedlab/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>

#include "embedlab/errors.h"

namespace embedlab::ops {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using Index = Eigen::Index;

[[noreturn]] void shape_mismatch(const char* kernel, const Shape& a,
                                 const Shape& b) {
  throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", kernel,
                               shape_string(a), shape_string(b)));
}

void require_rank(const char* kernel, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(fmt::format("{}: expected rank {}, got shape {}", kernel,
                                 rank, shape_string(t.shape())));
  }
}

Tensor make_output(Shape shape, std::vector<double> values, bool track) {
  return Tensor::from_values(std::move(shape), std::move(values), track);
}

ConstMatrixMap cmap(std::span<const double> v, std::size_t rows,
                    std::size_t cols) {
  return ConstMatrixMap(v.data(), static_cast<Index>(rows),
                        static_cast<Index>(cols));
}

MatrixMap map(std::span<double> v, std::size_t rows, std::size_t cols) {
  return MatrixMap(v.data(), static_cast<Index>(rows),
                   static_cast<Index>(cols));
}

// Shared body of matmul and batched_matmul for one [M,K]x[K,N] slice.
void gemm_forward(std::span<const double> a, std::span<const double> b,
                  std::span<double> c, std::size_t m, std::size_t k,
                  std::size_t n, bool transpose_b) {
  auto am = cmap(a, m, k);
  auto cm = map(c, m, n);
  if (transpose_b) {
    cm.noalias() = am * cmap(b, n, k).transpose();
  } else {
    cm.noalias() = am * cmap(b, k, n);
  }
}

void gemm_backward(std::span<const double> a, std::span<const double> b,
                   std::span<const double> dc, std::span<double> da,
                   std::span<double> db, std::size_t m, std::size_t k,
                   std::size_t n, bool transpose_b) {
  auto dcm = cmap(dc, m, n);
  if (!da.empty()) {
    auto dam = map(da, m, k);
    if (transpose_b) {
      dam.noalias() += dcm * cmap(b, n, k);
    } else {
      dam.noalias() += dcm * cmap(b, k, n).transpose();
    }
  }
  if (!db.empty()) {
    if (transpose_b) {
      map(db, n, k).noalias() += dcm.transpose() * cmap(a, m, k);
    } else {
      map(db, k, n).noalias() += cmap(a, m, k).transpose() * dcm;
    }
  }
}

std::size_t last_dim(const Tensor& t) { return t.shape().back(); }

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b, bool transpose_b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1);
  const std::size_t kb = transpose_b ? b.dim(1) : b.dim(0);
  const std::size_t n = transpose_b ? b.dim(0) : b.dim(1);
  if (k != kb) shape_mismatch("matmul", a.shape(), b.shape());

  std::vector<double> out(m * n);
  gemm_forward(a.values(), b.values(), out, m, k, n, transpose_b);
  const bool track = a.requires_grad() || b.requires_grad();
  Tensor c = make_output({m, n}, std::move(out), track);
  if (track) {
    tape.record(c, [a, b, c, m, k, n, transpose_b]() mutable {
      gemm_backward(a.values(), b.values(), c.grad(), a.mutable_grad(),
                    b.mutable_grad(), m, k, n, transpose_b);
    });
  }
  return c;
}

Tensor batched_matmul(Tape& tape, const Tensor& a, const Tensor& b,
                      bool transpose_b) {
  require_rank("batched_matmul", a, 3);
  require_rank("batched_matmul", b, 3);
  const std::size_t g = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t kb = transpose_b ? b.dim(2) : b.dim(1);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  if (b.dim(0) != g || k != kb) {
    shape_mismatch("batched_matmul", a.shape(), b.shape());
  }

  std::vector<double> out(g * m * n);
  const std::size_t sa = m * k, sb = k * n, sc = m * n;
  for (std::size_t i = 0; i < g; ++i) {
    gemm_forward(a.values().subspan(i * sa, sa), b.values().subspan(i * sb, sb),
                 std::span(out).subspan(i * sc, sc), m, k, n, transpose_b);
  }
  const bool track = a.requires_grad() || b.requires_grad();
  Tensor c = make_output({g, m, n}, std::move(out), track);
  if (track) {
    tape.record(c, [a, b, c, g, m, k, n, sa, sb, sc, transpose_b]() mutable {
      auto da = a.mutable_grad();
      auto db = b.mutable_grad();
      for (std::size_t i = 0; i < g; ++i) {
        gemm_backward(a.values().subspan(i * sa, sa),
                      b.values().subspan(i * sb, sb),
                      c.grad().subspan(i * sc, sc),
                      da.empty() ? da : da.subspan(i * sa, sa),
                      db.empty() ? db : db.subspan(i * sb, sb), m, k, n,
                      transpose_b);
      }
    });
  }
  return c;
}

Tensor transpose(Tape& tape, const Tensor& a) {
  require_rank("transpose", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  map(out, c, r) = cmap(a.values(), r, c).transpose();
  Tensor y = make_output({c, r}, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    tape.record(y, [a, y, r, c]() mutable {
      map(a.mutable_grad(), r, c) += cmap(y.grad(), c, r).transpose();
    });
  }
  return y;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() > sa.size() ||
      !std::equal(sb.begin(), sb.end(), sa.end() - sb.size())) {
    shape_mismatch("add", sa, sb);
  }
  const std::size_t inner = b.size();
  const std::size_t outer = a.size() / inner;
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += bv[i];
  }
  const bool track = a.requires_grad() || b.requires_grad();
  Tensor y = make_output(sa, std::move(out), track);
  if (track) {
    tape.record(y, [a, b, y, outer, inner]() mutable {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < inner; ++i) gb[i] += gy[o * inner + i];
        }
      }
    });
  }
  return y;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch("sub", a.shape(), b.shape());
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const bool track = a.requires_grad() || b.requires_grad();
  Tensor y = make_output(a.shape(), std::move(out), track);
  if (track) {
    tape.record(y, [a, b, y]() mutable {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gy[i];
      }
    });
  }
  return y;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch("mul", a.shape(), b.shape());
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const bool track = a.requires_grad() || b.requires_grad();
  Tensor y = make_output(a.shape(), std::move(out), track);
  if (track) {
    tape.record(y, [a, b, y]() mutable {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        auto bv = b.values();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        auto av = a.values();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * av[i];
      }
    });
  }
  return y;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= factor;
  Tensor y = make_output(a.shape(), std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    tape.record(y, [a, y, factor]() mutable {
      auto ga = a.mutable_grad();
      auto gy = y.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * gy[i];
    });
  }
  return y;
}

Tensor softmax_rows(Tape& tape, const Tensor& a,
                    std::span<const std::uint8_t> keep) {
  if (!keep.empty() && keep.size() != a.size()) {
    throw ShapeError(fmt::format(
        "softmax_rows: mask has {} entries for input shape {}", keep.size(),
        shape_string(a.shape())));
  }
  const std::size_t cols = last_dim(a);
  const std::size_t rows = a.size() / cols;
  auto av = a.values();
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * cols;
    double max = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (keep.empty() || keep[base + c]) max = std::max(max, av[base + c]);
    }
    if (max == -std::numeric_limits<double>::infinity()) {
      throw ShapeError(fmt::format("softmax_rows: row {} is fully masked", r));
    }
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (keep.empty() || keep[base + c]) {
        out[base + c] = std::exp(av[base + c] - max);
        total += out[base + c];
      }
    }
    for (std::size_t c = 0; c < cols; ++c) out[base + c] /= total;
  }
  Tensor y = make_output(a.shape(), std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    tape.record(y, [a, y, rows, cols]() mutable {
      auto ga = a.mutable_grad();
      auto gy = y.grad();
      auto yv = y.values();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          dot += gy[base + c] * yv[base + c];
        }
        for (std::size_t c = 0; c < cols; ++c) {
          ga[base + c] += yv[base + c] * (gy[base + c] - dot);
        }
      }
    });
  }
  return y;
}

Tensor logsumexp_rows(Tape& tape, const Tensor& a) {
  const std::size_t cols = last_dim(a);
  const std::size_t rows = a.size() / cols;
  auto av = a.values();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = av.subspan(r * cols, cols);
    const double max = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - max);
    out[r] = max + std::log(total);
  }
  Shape shape(a.shape().begin(), a.shape().end() - 1);
  if (shape.empty()) shape = {1};
  Tensor y = make_output(std::move(shape), std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    tape.record(y, [a, y, rows, cols]() mutable {
      auto ga = a.mutable_grad();
      auto av = a.values();
      auto gy = y.grad();
      auto yv = y.values();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          ga[r * cols + c] += gy[r] * std::exp(av[r * cols + c] - yv[r]);
        }
      }
    });
  }
  return y;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, double eps) {
  const std::size_t d = last_dim(x);
  if (gamma.shape() != Shape{d}) {
    shape_mismatch("layer_norm", x.shape(), gamma.shape());
  }
  if (beta.shape() != Shape{d}) {
    shape_mismatch("layer_norm", x.shape(), beta.shape());
  }
  const std::size_t rows = x.size() / d;
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> out(x.size());
  std::vector<double> normed(x.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = xv.subspan(r * d, d);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      const double n = (row[c] - mean) * inv_std[r];
      normed[r * d + c] = n;
      out[r * d + c] = n * gv[c] + bv[c];
    }
  }
  const bool track =
      x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  Tensor y = make_output(x.shape(), std::move(out), track);
  if (track) {
    tape.record(y, [x, gamma, beta, y, rows, d, normed = std::move(normed),
                    inv_std = std::move(inv_std)]() mutable {
      auto gy = y.grad();
      auto gv = gamma.values();
      if (gamma.requires_grad()) {
        auto gg = gamma.mutable_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < d; ++c) {
            gg[c] += gy[r * d + c] * normed[r * d + c];
          }
        }
      }
      if (beta.requires_grad()) {
        auto gb = beta.mutable_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < d; ++c) gb[c] += gy[r * d + c];
        }
      }
      if (x.requires_grad()) {
        auto gx = x.mutable_grad();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double sum_g = 0.0, sum_gn = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            const double g = gy[r * d + c] * gv[c];
            sum_g += g;
            sum_gn += g * normed[r * d + c];
          }
          for (std::size_t c = 0; c < d; ++c) {
            const double g = gy[r * d + c] * gv[c];
            gx[r * d + c] += inv_std[r] *
                             (g - inv_d * sum_g - normed[r * d + c] * inv_d * sum_gn);
          }
        }
      }
    });
  }
  return y;
}

Tensor gelu(Tape& tape, const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 / 2.0));
  }
  Tensor y = make_output(x.shape(), std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record(y, [x, y]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      auto xv = x.values();
      const double inv_sqrt_2pi = std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const double cdf =
            0.5 * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 / 2.0));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * xv[i] * xv[i]);
        gx[i] += gy[i] * (cdf + xv[i] * pdf);
      }
    });
  }
  return y;
}

Tensor embedding(Tape& tape, const Tensor& table, std::span<const int> ids) {
  require_rank("embedding", table, 2);
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw ShapeError("embedding: no ids");
  std::vector<double> out(ids.size() * d);
  auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw std::out_of_range(fmt::format(
          "embedding: id {} out of range for table {}", ids[i],
          shape_string(table.shape())));
    }
    std::copy_n(tv.begin() + ids[i] * d, d, out.begin() + i * d);
  }
  Tensor y = make_output({ids.size(), d}, std::move(out), table.requires_grad());
  if (table.requires_grad()) {
    tape.record(y, [table, y, d, ids = std::vector<int>(ids.begin(),
                                                        ids.end())]() mutable {
      auto gt = table.mutable_grad();
      auto gy = y.grad();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t c = 0; c < d; ++c) gt[ids[i] * d + c] += gy[i * d + c];
      }
    });
  }
  return y;
}

Tensor concat(Tape& tape, std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw ShapeError(fmt::format("concat: axis {} out of range for shape {}",
                                 axis, shape_string(first)));
  }
  std::size_t axis_total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_mismatch("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) shape_mismatch("concat", first, s);
    }
    axis_total += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  Shape shape = first;
  shape[axis] = axis_total;
  std::vector<double> out(num_elements(shape));
  const std::size_t out_stride = axis_total * inner;
  std::size_t offset = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    const std::size_t block = p.dim(axis) * inner;
    auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + o * block, block,
                  out.begin() + o * out_stride + offset);
    }
    offset += block;
    track = track || p.requires_grad();
  }
  Tensor y = make_output(std::move(shape), std::move(out), track);
  if (track) {
    tape.record(y, [inputs = std::vector<Tensor>(parts.begin(), parts.end()), y,
                    axis, outer, inner, out_stride]() mutable {
      auto gy = y.grad();
      std::size_t offset = 0;
      for (Tensor& p : inputs) {
        const std::size_t block = p.dim(axis) * inner;
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < block; ++i) {
              gp[o * block + i] += gy[o * out_stride + offset + i];
            }
          }
        }
        offset += block;
      }
    });
  }
  return y;
}

Tensor dropout(Tape& tape, const Tensor& x, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument(
        fmt::format("dropout: probability {} outside [0, 1)", p));
  }
  if (p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.uniform() >= p ? keep_scale : 0.0;
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  Tensor y = make_output(x.shape(), std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record(y, [x, y, mask = std::move(mask)]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * mask[i];
    });
  }
  return y;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (num_elements(shape) != x.size()) {
    shape_mismatch("reshape", x.shape(), shape);
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  Tensor y = make_output(std::move(shape), std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record(y, [x, y]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    });
  }
  return y;
}

Tensor permute_0213(Tape& tape, const Tensor& x) {
  require_rank("permute_0213", x, 4);
  const std::size_t a = x.dim(0), b = x.dim(1), c = x.dim(2), d = x.dim(3);
  auto xv = x.values();
  std::vector<double> out(x.size());
  // Source index (i,j,k,l) lands at (i,k,j,l).
  auto src = [=](std::size_t i, std::size_t j, std::size_t k) {
    return ((i * b + j) * c + k) * d;
  };
  auto dst = [=](std::size_t i, std::size_t j, std::size_t k) {
    return ((i * c + k) * b + j) * d;
  };
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      for (std::size_t k = 0; k < c; ++k) {
        std::copy_n(xv.begin() + src(i, j, k), d, out.begin() + dst(i, j, k));
      }
    }
  }
  Tensor y = make_output({a, c, b, d}, std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record(y, [x, y, a, b, c, d, src, dst]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
          for (std::size_t k = 0; k < c; ++k) {
            for (std::size_t l = 0; l < d; ++l) {
              gx[src(i, j, k) + l] += gy[dst(i, j, k) + l];
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor gather_rows(Tape& tape, const Tensor& x,
                   std::span<const std::size_t> rows) {
  require_rank("gather_rows", x, 2);
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (rows.empty()) throw ShapeError("gather_rows: no rows requested");
  auto xv = x.values();
  std::vector<double> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw std::out_of_range(fmt::format(
          "gather_rows: row {} out of range for shape {}", rows[i],
          shape_string(x.shape())));
    }
    std::copy_n(xv.begin() + rows[i] * d, d, out.begin() + i * d);
  }
  Tensor y = make_output({rows.size(), d}, std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record(y, [x, y, d, rows = std::vector<std::size_t>(
                                 rows.begin(), rows.end())]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < d; ++c) gx[rows[i] * d + c] += gy[i * d + c];
      }
    });
  }
  return y;
}

Tensor pick_per_row(Tape& tape, const Tensor& x,
                    std::span<const std::size_t> cols) {
  require_rank("pick_per_row", x, 2);
  const std::size_t n = x.dim(0), m = x.dim(1);
  if (cols.size() != n) {
    throw ShapeError(fmt::format("pick_per_row: {} columns for shape {}",
                                 cols.size(), shape_string(x.shape())));
  }
  auto xv = x.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (cols[i] >= m) {
      throw std::out_of_range(fmt::format(
          "pick_per_row: column {} out of range for shape {}", cols[i],
          shape_string(x.shape())));
    }
    out[i] = xv[i * m + cols[i]];
  }
  Tensor y = make_output({n}, std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record(y, [x, y, m, cols = std::vector<std::size_t>(
                                 cols.begin(), cols.end())]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t i = 0; i < cols.size(); ++i) gx[i * m + cols[i]] += gy[i];
    });
  }
  return y;
}

Tensor cross_entropy_rows(Tape& tape, const Tensor& logits,
                          std::span<const std::size_t> targets) {
  require_rank("cross_entropy_rows", logits, 2);
  const std::size_t n = logits.dim(0), m = logits.dim(1);
  if (targets.size() != n) {
    throw ShapeError(fmt::format("cross_entropy_rows: {} targets for shape {}",
                                 targets.size(), shape_string(logits.shape())));
  }
  auto lv = logits.values();
  std::vector<double> out(n);
  std::vector<double> probs(n * m);
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] >= m) {
      throw std::out_of_range(fmt::format(
          "cross_entropy_rows: target {} out of range for shape {}",
          targets[r], shape_string(logits.shape())));
    }
    const auto row = lv.subspan(r * m, m);
    const double max = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      probs[r * m + c] = std::exp(row[c] - max);
      total += probs[r * m + c];
    }
    for (std::size_t c = 0; c < m; ++c) probs[r * m + c] /= total;
    out[r] = std::log(total) + (max - row[targets[r]]);
  }
  Tensor y = make_output({n}, std::move(out), logits.requires_grad());
  if (logits.requires_grad()) {
    tape.record(y, [logits, y, m, probs = std::move(probs),
                    targets = std::vector<std::size_t>(
                        targets.begin(), targets.end())]() mutable {
      auto gl = logits.mutable_grad();
      auto gy = y.grad();
      for (std::size_t r = 0; r < targets.size(); ++r) {
        for (std::size_t c = 0; c < m; ++c) {
          gl[r * m + c] += gy[r] * probs[r * m + c];
        }
        gl[r * m + targets[r]] -= gy[r];
      }
    });
  }
  return y;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor y = make_output({1}, {total}, x.requires_grad());
  if (x.requires_grad()) {
    tape.record(y, [x, y]() mutable {
      const double g = y.grad()[0];
      for (double& gx : x.mutable_grad()) gx += g;
    });
  }
  return y;
}

Tensor mean(Tape& tape, const Tensor& x) {
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.size()));
}

Tensor normalize_rows(Tape& tape, const Tensor& x) {
  require_rank("normalize_rows", x, 2);
  const std::size_t n = x.dim(0), d = x.dim(1);
  auto xv = x.values();
  std::vector<double> norms(n);
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < n; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) sq += xv[r * d + c] * xv[r * d + c];
    norms[r] = std::sqrt(sq);
    if (norms[r] == 0.0) {
      throw ZeroNormError(
          fmt::format("normalize_rows: row {} has zero norm", r));
    }
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = xv[r * d + c] / norms[r];
  }
  Tensor y = make_output(x.shape(), std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record(y, [x, y, n, d, norms = std::move(norms)]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      auto yv = y.values();
      for (std::size_t r = 0; r < n; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += yv[r * d + c] * gy[r * d + c];
        for (std::size_t c = 0; c < d; ++c) {
          gx[r * d + c] += (gy[r * d + c] - yv[r * d + c] * dot) / norms[r];
        }
      }
    });
  }
  return y;
}

}  // namespace embedlab::ops
