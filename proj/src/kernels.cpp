// SPDX-License-Identifier: Apache-2.0
#include "ovl/kernels.hpp"

#include <cmath>
#include <string>

#include "ovl/simd.hpp"

namespace ovl {

template <class T>
const TensorBuffer<T>& FeatureBuffer<T>::get() const {
  if (!valid_) throw Error(ErrorCode::kEmptyFeatureBuffer, "feature buffer read before any write");
  return *slot_;
}

template <class T>
TensorBuffer<T>& FeatureBuffer<T>::store(const Shape& shape) {
  if (!slot_ || slot_->shape() != shape) slot_.emplace(shape);
  valid_ = true;
  return *slot_;
}

namespace {

void require_rank2(const Shape& s, const char* what) {
  if (s.size() != 2) throw Error(ErrorCode::kShape, std::string(what) + " must be rank 2");
}

// Block size of a panel: the crop's block size when it came from bcropped,
// otherwise the extent along the panel's short side.
template <class T>
std::size_t panel_block(const BlockView<T>& panel, std::size_t short_extent) {
  if (panel.origin().kind == CropKind::kBlock) {
    if (panel.origin().block_size != short_extent) {
      throw Error(ErrorCode::kShape, "panel side " + std::to_string(short_extent) +
                                         " differs from block size " +
                                         std::to_string(panel.origin().block_size));
    }
  }
  return short_extent;
}

// Leading `keep` axes of a view, after checking every trailing axis is 1.
Shape leading_extents(const Shape& s, std::size_t keep, const char* what) {
  if (s.size() < keep) {
    throw Error(ErrorCode::kShape, std::string(what) + " needs rank >= " + std::to_string(keep));
  }
  for (std::size_t a = keep; a < s.size(); ++a) {
    if (s[a] != 1) {
      throw Error(ErrorCode::kShape, std::string(what) + " has extent " + std::to_string(s[a]) +
                                         " on axis " + std::to_string(a) + ", expected 1");
    }
  }
  return Shape(s.begin(), s.begin() + keep);
}

}  // namespace

template <class T>
void lu_factor_block(const BlockView<T>& a) {
  const Shape s = a.extents();
  require_rank2(s, "LU block");
  if (s[0] != s[1]) throw Error(ErrorCode::kShape, "LU block must be square, got " + shape_string(s));
  const std::size_t m = s[0];
  for (std::size_t k = 0; k < m; ++k) {
    const T pivot = a(k, k);
    if (!(std::abs(pivot) >= pivot_epsilon<T>())) {
      throw SingularPivotError(k, "singular pivot at index " + std::to_string(k));
    }
    const T* urow = a.row(k) + k + 1;
    for (std::size_t i = k + 1; i < m; ++i) {
      const T l = a(i, k) / pivot;
      a(i, k) = l;
      simd::axpy(m - k - 1, -l, urow, a.row(i) + k + 1);
    }
  }
}

template <class T>
void transform_row_panel(const BlockView<T>& panel) {
  const Shape s = panel.extents();
  require_rank2(s, "row panel");
  const std::size_t m = panel_block(panel, s[0]);
  if (s[1] % m != 0 || s[1] / m < 2) {
    throw Error(ErrorCode::kShape, "row panel " + shape_string(s) + " is not m x (k*m) with k >= 2");
  }
  const std::size_t width = s[1] - m;
  // Forward substitution with the unit lower triangle, one row at a time.
  for (std::size_t r = 1; r < m; ++r) {
    T* target = panel.row(r) + m;
    for (std::size_t p = 0; p < r; ++p) {
      simd::axpy(width, -panel(r, p), panel.row(p) + m, target);
    }
  }
}

template <class T>
void transform_column_panel(const BlockView<T>& panel) {
  const Shape s = panel.extents();
  require_rank2(s, "column panel");
  const std::size_t m = panel_block(panel, s[1]);
  if (s[0] % m != 0 || s[0] / m < 2) {
    throw Error(ErrorCode::kShape, "column panel " + shape_string(s) + " is not (k*m) x m with k >= 2");
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (!(std::abs(panel(j, j)) >= pivot_epsilon<T>())) {
      throw SingularPivotError(j, "zero diagonal in U at index " + std::to_string(j));
    }
  }
  // Each row x solves x U = b left to right.
  for (std::size_t r = m; r < s[0]; ++r) {
    T* x = panel.row(r);
    for (std::size_t j = 0; j < m; ++j) {
      x[j] /= panel(j, j);
      simd::axpy(m - j - 1, -x[j], panel.row(j) + j + 1, x + j + 1);
    }
  }
}

template <class T>
void gemm(const BlockView<T>& c, const BlockView<T>& a, const BlockView<T>& b,
          GemmCoefficients co) {
  const Shape cs = c.extents(), as = a.extents(), bs = b.extents();
  require_rank2(cs, "GEMM C");
  require_rank2(as, "GEMM A");
  require_rank2(bs, "GEMM B");
  if (as[1] != bs[0] || cs[0] != as[0] || cs[1] != bs[1]) {
    throw Error(ErrorCode::kShape, "GEMM shapes C" + shape_string(cs) + " A" + shape_string(as) +
                                       " B" + shape_string(bs) + " do not agree");
  }
  const AccessSet cw = access_set(c, AccessMode::kWrite);
  if (overlaps(cw, access_set(a, AccessMode::kRead)) || overlaps(cw, access_set(b, AccessMode::kRead))) {
    throw Error(ErrorCode::kAliasing, "GEMM output overlaps an input");
  }
  const std::size_t rows = cs[0], cols = cs[1], inner = as[1];
  const T alpha = static_cast<T>(co.alpha);
  const T beta = static_cast<T>(co.beta);
  const T gamma = static_cast<T>(co.gamma);

  if (beta == T(0)) {
    if (alpha != T(1)) {
      for (std::size_t r = 0; r < rows; ++r) simd::scal(cols, alpha, c.row(r));
    }
    return;
  }

  // gamma*B, packed contiguously.
  std::vector<T> gb(inner * cols);
  for (std::size_t k = 0; k < inner; ++k) {
    const T* src = b.row(k);
    T* dst = gb.data() + k * cols;
    for (std::size_t j = 0; j < cols; ++j) dst[j] = src[j];
    if (gamma != T(1)) simd::scal(cols, gamma, dst);
  }

  std::vector<T> acc(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill(acc.begin(), acc.end(), T(0));
    const T* arow = a.row(r);
    for (std::size_t k = 0; k < inner; ++k) simd::axpy(cols, arow[k], gb.data() + k * cols, acc.data());
    T* crow = c.row(r);
    if (alpha != T(1)) simd::scal(cols, alpha, crow);
    simd::axpy(cols, beta, acc.data(), crow);
  }
}

template <class T>
Shape convolution(const BlockView<T>& x, const BlockView<T>& y, const BlockView<T>& w,
                  ConvControlFlags flags, FeatureBuffer<T>& fb) {
  std::vector<T> input;
  Shape in_shape;
  if (flags.read_input_from_buffer) {
    const TensorBuffer<T>& src = fb.get();
    input.assign(src.data().begin(), src.data().end());
    in_shape = src.shape();
  } else {
    input = x.gather();
    in_shape = x.extents();
  }

  std::vector<T> output;
  Shape out_shape;
  if (flags.is_fc_layer) {
    const Shape ws = leading_extents(w.extents(), 2, "FC weights");
    const std::size_t fan_in = ws[0], fan_out = ws[1];
    const bool exact = flags.read_input_from_buffer;
    if (input.size() < fan_in || (exact && input.size() != fan_in)) {
      throw Error(ErrorCode::kShape, "FC input has " + std::to_string(input.size()) +
                                         " elements, weights expect " + std::to_string(fan_in));
    }
    const std::vector<T> weights = w.gather();
    output.assign(fan_out, T(0));
    for (std::size_t i = 0; i < fan_in; ++i) {
      simd::axpy(fan_out, input[i], weights.data() + i * fan_out, output.data());
    }
    out_shape = {fan_out};
  } else {
    const Shape is = leading_extents(in_shape, 3, "convolution input");
    const Shape ws = leading_extents(w.extents(), 4, "convolution weights");
    const std::size_t height = is[0], width = is[1], cin = is[2];
    const std::size_t kh = ws[0], kw = ws[1], cout = ws[3];
    if (ws[2] != cin) {
      throw Error(ErrorCode::kShape, "input has " + std::to_string(cin) + " channels, weights expect " +
                                         std::to_string(ws[2]));
    }
    if (kh % 2 == 0 || kw % 2 == 0) throw Error(ErrorCode::kShape, "kernel extents must be odd");
    // Local weight buffer, packed [kh][kw][cin][cout].
    const std::vector<T> weights = w.gather();
    const std::ptrdiff_t pad_h = static_cast<std::ptrdiff_t>(kh / 2);
    const std::ptrdiff_t pad_w = static_cast<std::ptrdiff_t>(kw / 2);
    output.assign(height * width * cout, T(0));
    for (std::size_t oy = 0; oy < height; ++oy) {
      for (std::size_t ox = 0; ox < width; ++ox) {
        T* acc = output.data() + (oy * width + ox) * cout;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad_h;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad_w;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
            const T* in = input.data() + (static_cast<std::size_t>(iy) * width + static_cast<std::size_t>(ix)) * cin;
            const T* wk = weights.data() + (ky * kw + kx) * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) simd::axpy(cout, in[ci], wk + ci * cout, acc);
          }
        }
      }
    }
    out_shape = {height, width, cout};
  }

  if (flags.with_relu) simd::relu(output.size(), output.data());

  if (flags.store_output_to_buffer) {
    TensorBuffer<T>& dst = fb.store(out_shape);
    std::copy(output.begin(), output.end(), dst.data().begin());
  } else {
    y.scatter(output);
  }
  return out_shape;
}

template <class T>
Shape maxpool(const BlockView<T>& y, bool store_output_to_buffer, FeatureBuffer<T>& fb) {
  const TensorBuffer<T>& src = fb.get();
  const Shape is = leading_extents(src.shape(), 3, "maxpool input");
  const std::size_t height = is[0], width = is[1], ch = is[2];
  if (height % 2 || width % 2) {
    throw Error(ErrorCode::kShape, "maxpool needs even spatial extents, got " + shape_string(is));
  }
  const std::size_t oh = height / 2, ow = width / 2;
  const T* in = src.data().data();
  std::vector<T> output(oh * ow * ch);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      T* out = output.data() + (oy * ow + ox) * ch;
      const T* p00 = in + ((2 * oy) * width + 2 * ox) * ch;
      const T* p10 = p00 + width * ch;
      std::copy(p00, p00 + ch, out);
      simd::vmax(ch, p00 + ch, out);
      simd::vmax(ch, p10, out);
      simd::vmax(ch, p10 + ch, out);
    }
  }
  const Shape out_shape{oh, ow, ch};
  if (store_output_to_buffer) {
    TensorBuffer<T>& dst = fb.store(out_shape);
    std::copy(output.begin(), output.end(), dst.data().begin());
  } else {
    y.scatter(output);
  }
  return out_shape;
}

#define OVL_INSTANTIATE(T)                                                                        \
  template class FeatureBuffer<T>;                                                                \
  template void lu_factor_block<T>(const BlockView<T>&);                                          \
  template void transform_row_panel<T>(const BlockView<T>&);                                      \
  template void transform_column_panel<T>(const BlockView<T>&);                                   \
  template void gemm<T>(const BlockView<T>&, const BlockView<T>&, const BlockView<T>&,            \
                        GemmCoefficients);                                                        \
  template Shape convolution<T>(const BlockView<T>&, const BlockView<T>&, const BlockView<T>&,    \
                                ConvControlFlags, FeatureBuffer<T>&);                             \
  template Shape maxpool<T>(const BlockView<T>&, bool, FeatureBuffer<T>&);

OVL_INSTANTIATE(float)
OVL_INSTANTIATE(double)

#undef OVL_INSTANTIATE

}  // namespace ovl
