// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent brute-force references. Nothing here calls into the kernel
// library or the simd primitives; everything is computed in double with
// plain loops.

#include <cstddef>
#include <span>
#include <vector>

#include "ovl/tensor.hpp"
#include "ovl/vgg_model.hpp"

namespace ovl::oracle {

/// Row-major dense matrix in double.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

template <class T>
Matrix to_matrix(const TensorBuffer<T>& buffer);
template <class T>
Matrix to_matrix(const BlockView<T>& view);

Matrix multiply(const Matrix& a, const Matrix& b);

/// Doolittle LU without pivoting, straight from u_kj = a_kj - sum l_kp u_pj
/// and l_ik = (a_ik - sum l_ip u_pk) / u_kk. Returns the packed L\U form.
/// Throws SingularPivotError when |u_kk| < 1e-12.
Matrix lu(const Matrix& a);

/// Unit lower triangle of a packed L\U matrix.
Matrix unpack_lower(const Matrix& packed);
/// Upper triangle (with diagonal) of a packed L\U matrix.
Matrix unpack_upper(const Matrix& packed);

/// X with A X = B, by Gauss-Jordan elimination with partial pivoting on the
/// full dense system.
Matrix solve(const Matrix& a, const Matrix& b);
/// X with X A = B.
Matrix solve_right(const Matrix& a, const Matrix& b);

/// Direct nested-loop VGG forward: conv 3x3 pad 1 + ReLU, 2x2 max pool,
/// FC + ReLU. Returns fc.back() x batch.
template <class T>
Matrix cnn_forward(const VggConfig& config, const TensorBuffer<T>& x, const VggWeights<T>& weights);

/// One 3x3-or-any-odd-kernel conv layer on an H x W x Cin map (row-major),
/// weights Kh x Kw x Cin x Cout, zero padding preserving H x W.
std::vector<double> conv2d(const std::vector<double>& in, std::size_t h, std::size_t w, std::size_t cin,
                           const std::vector<double>& weights, std::size_t kh, std::size_t kw, std::size_t cout,
                           bool relu);
std::vector<double> maxpool2x2(const std::vector<double>& in, std::size_t h, std::size_t w, std::size_t c);

struct ComparisonReport {
  double max_abs_err = 0.0;
  /// ||expected - actual||_F / ||expected||_F, or the plain difference norm
  /// when expected is all zeros.
  double rel_fro_err = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

/// Throws kShape when the sizes differ.
ComparisonReport compare(std::span<const double> expected, std::span<const double> actual, double tolerance);
ComparisonReport compare(const Matrix& expected, const Matrix& actual, double tolerance);

}  // namespace ovl::oracle
