// SPDX-License-Identifier: Apache-2.0
#include "ovl/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace ovl::oracle {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

template <class T>
Matrix to_matrix(const TensorBuffer<T>& buffer) {
  if (buffer.rank() != 2) throw Error(ErrorCode::kShape, "to_matrix needs a rank-2 buffer");
  Matrix m(buffer.shape()[0], buffer.shape()[1]);
  for (std::size_t k = 0; k < m.v.size(); ++k) m.v[k] = static_cast<double>(buffer.data()[k]);
  return m;
}

template <class T>
Matrix to_matrix(const BlockView<T>& view) {
  if (view.rank() != 2) throw Error(ErrorCode::kShape, "to_matrix needs a rank-2 view");
  Matrix m(view.extent(0), view.extent(1));
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = static_cast<double>(view(r, c));
  }
  return m;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw Error(ErrorCode::kShape, "multiply: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix lu(const Matrix& a) {
  if (a.rows != a.cols) throw Error(ErrorCode::kShape, "lu: matrix must be square");
  const std::size_t n = a.rows;
  Matrix l = Matrix::identity(n), u(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = k; j < n; ++j) {
      double s = a(k, j);
      for (std::size_t p = 0; p < k; ++p) s -= l(k, p) * u(p, j);
      u(k, j) = s;
    }
    if (std::abs(u(k, k)) < 1e-12) throw SingularPivotError(k, "oracle lu: singular pivot at " + std::to_string(k));
    for (std::size_t i = k + 1; i < n; ++i) {
      double s = a(i, k);
      for (std::size_t p = 0; p < k; ++p) s -= l(i, p) * u(p, k);
      l(i, k) = s / u(k, k);
    }
  }
  Matrix packed = u;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) packed(i, j) = l(i, j);
  }
  return packed;
}

Matrix unpack_lower(const Matrix& packed) {
  Matrix l = Matrix::identity(packed.rows);
  for (std::size_t i = 0; i < packed.rows; ++i) {
    for (std::size_t j = 0; j < i && j < packed.cols; ++j) l(i, j) = packed(i, j);
  }
  return l;
}

Matrix unpack_upper(const Matrix& packed) {
  Matrix u(packed.rows, packed.cols);
  for (std::size_t i = 0; i < packed.rows; ++i) {
    for (std::size_t j = i; j < packed.cols; ++j) u(i, j) = packed(i, j);
  }
  return u;
}

Matrix solve(const Matrix& a, const Matrix& b) {
  if (a.rows != a.cols || a.rows != b.rows) throw Error(ErrorCode::kShape, "solve: incompatible shapes");
  const std::size_t n = a.rows, k = b.cols;
  // Augmented [A | B].
  Matrix aug(n, n + k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug(i, j) = a(i, j);
    for (std::size_t j = 0; j < k; ++j) aug(i, n + j) = b(i, j);
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(aug(r, col)) > std::abs(aug(pivot, col))) pivot = r;
    }
    if (std::abs(aug(pivot, col)) < 1e-300) throw SingularPivotError(col, "oracle solve: singular matrix");
    if (pivot != col) {
      for (std::size_t j = 0; j < n + k; ++j) std::swap(aug(pivot, j), aug(col, j));
    }
    const double d = aug(col, col);
    for (std::size_t j = 0; j < n + k; ++j) aug(col, j) /= d;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || aug(r, col) == 0.0) continue;
      const double f = aug(r, col);
      for (std::size_t j = 0; j < n + k; ++j) aug(r, j) -= f * aug(col, j);
    }
  }
  Matrix x(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) x(i, j) = aug(i, n + j);
  }
  return x;
}

namespace {

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  }
  return t;
}

}  // namespace

Matrix solve_right(const Matrix& a, const Matrix& b) {
  // X A = B  <=>  A^T X^T = B^T
  return transpose(solve(transpose(a), transpose(b)));
}

std::vector<double> conv2d(const std::vector<double>& in, std::size_t h, std::size_t w, std::size_t cin,
                           const std::vector<double>& weights, std::size_t kh, std::size_t kw, std::size_t cout,
                           bool relu) {
  std::vector<double> out(h * w * cout, 0.0);
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t co = 0; co < cout; ++co) {
        double s = 0.0;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const long iy = static_cast<long>(y + ky) - ph;
            const long ix = static_cast<long>(x + kx) - pw;
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              s += in[(static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin + ci] *
                   weights[((ky * kw + kx) * cin + ci) * cout + co];
            }
          }
        }
        out[(y * w + x) * cout + co] = relu ? std::max(s, 0.0) : s;
      }
    }
  }
  return out;
}

std::vector<double> maxpool2x2(const std::vector<double>& in, std::size_t h, std::size_t w, std::size_t c) {
  std::vector<double> out((h / 2) * (w / 2) * c);
  for (std::size_t y = 0; y < h / 2; ++y) {
    for (std::size_t x = 0; x < w / 2; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double m = -INFINITY;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, in[((2 * y + dy) * w + 2 * x + dx) * c + ch]);
        }
        out[(y * (w / 2) + x) * c + ch] = m;
      }
    }
  }
  return out;
}

template <class T>
Matrix cnn_forward(const VggConfig& config, const TensorBuffer<T>& x, const VggWeights<T>& weights) {
  config.validate();
  if (x.shape() != Shape{config.height, config.width, config.channels, config.batch}) {
    throw Error(ErrorCode::kShape, "oracle cnn_forward: input shape mismatch");
  }
  const std::size_t batch = config.batch;
  Matrix result(config.fc.back(), batch);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t h = config.height, w = config.width, c = config.channels;
    std::vector<double> map(h * w * c);
    for (std::size_t k = 0; k < map.size(); ++k) map[k] = static_cast<double>(x.data()[k * batch + b]);

    std::size_t layer = 0;
    for (std::size_t stage = 0; stage < kStages; ++stage) {
      const Shape g = config.conv_group_shape(stage);  // kh kw cinmax cout L
      const auto& data = weights.conv[stage]->data();
      for (std::size_t k = 0; k < kConvsPerStage[stage]; ++k, ++layer) {
        const std::size_t cin = config.conv_in_channels(layer), cout = g[3];
        std::vector<double> wl(g[0] * g[1] * cin * cout);
        for (std::size_t ky = 0; ky < g[0]; ++ky)
          for (std::size_t kx = 0; kx < g[1]; ++kx)
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t co = 0; co < cout; ++co)
                wl[((ky * g[1] + kx) * cin + ci) * cout + co] =
                    static_cast<double>(data[(((ky * g[1] + kx) * g[2] + ci) * g[3] + co) * g[4] + k]);
        map = conv2d(map, h, w, cin, wl, g[0], g[1], cout, true);
        c = cout;
      }
      map = maxpool2x2(map, h, w, c);
      h /= 2;
      w /= 2;
    }

    for (std::size_t f = 0; f < kFcLayers; ++f) {
      const Shape s = config.fc_shape(f);
      const auto& data = weights.fc[f]->data();
      std::vector<double> next(s[1], 0.0);
      for (std::size_t o = 0; o < s[1]; ++o) {
        double acc = 0.0;
        for (std::size_t i = 0; i < s[0]; ++i) acc += map[i] * static_cast<double>(data[i * s[1] + o]);
        next[o] = std::max(acc, 0.0);
      }
      map = std::move(next);
    }
    for (std::size_t o = 0; o < map.size(); ++o) result(o, b) = map[o];
  }
  return result;
}

ComparisonReport compare(std::span<const double> expected, std::span<const double> actual, double tolerance) {
  if (expected.size() != actual.size()) {
    throw Error(ErrorCode::kShape, "compare: " + std::to_string(expected.size()) + " vs " +
                                       std::to_string(actual.size()) + " elements");
  }
  ComparisonReport r;
  r.tolerance = tolerance;
  double diff2 = 0.0, ref2 = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double d = expected[i] - actual[i];
    r.max_abs_err = std::max(r.max_abs_err, std::abs(d));
    diff2 += d * d;
    ref2 += expected[i] * expected[i];
  }
  r.rel_fro_err = ref2 > 0.0 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2);
  r.pass = r.rel_fro_err <= tolerance;
  return r;
}

ComparisonReport compare(const Matrix& expected, const Matrix& actual, double tolerance) {
  if (expected.rows != actual.rows || expected.cols != actual.cols) {
    throw Error(ErrorCode::kShape, "compare: matrix shapes differ");
  }
  return compare(std::span<const double>(expected.v), std::span<const double>(actual.v), tolerance);
}

template Matrix to_matrix<float>(const TensorBuffer<float>&);
template Matrix to_matrix<double>(const TensorBuffer<double>&);
template Matrix to_matrix<float>(const BlockView<float>&);
template Matrix to_matrix<double>(const BlockView<double>&);
template Matrix cnn_forward<float>(const VggConfig&, const TensorBuffer<float>&, const VggWeights<float>&);
template Matrix cnn_forward<double>(const VggConfig&, const TensorBuffer<double>&, const VggWeights<double>&);

}  // namespace ovl::oracle
