// SPDX-License-Identifier: Apache-2.0
#include "ovl/simd.hpp"

namespace ovl::simd::scalar {

namespace {

template <class T>
void axpy_impl(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void scal_impl(std::size_t n, T a, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

template <class T>
void relu_impl(std::size_t n, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] > T(0) ? y[i] : T(0);
}

template <class T>
void vmax_impl(std::size_t n, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > y[i] ? x[i] : y[i];
}

}  // namespace

void axpy(std::size_t n, double a, const double* x, double* y) { axpy_impl(n, a, x, y); }
void axpy(std::size_t n, float a, const float* x, float* y) { axpy_impl(n, a, x, y); }
void scal(std::size_t n, double a, double* y) { scal_impl(n, a, y); }
void scal(std::size_t n, float a, float* y) { scal_impl(n, a, y); }
void relu(std::size_t n, double* y) { relu_impl(n, y); }
void relu(std::size_t n, float* y) { relu_impl(n, y); }
void vmax(std::size_t n, const double* x, double* y) { vmax_impl(n, x, y); }
void vmax(std::size_t n, const float* x, float* y) { vmax_impl(n, x, y); }

}  // namespace ovl::simd::scalar
