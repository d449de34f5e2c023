// SPDX-License-Identifier: Apache-2.0
#pragma once

// Compute bodies of the six IPs the two overlays are assembled from. Each
// kernel works in place on the views it is handed and touches nothing
// outside them (plus the feature-buffer slot for the CNN kernels).

#include <optional>

#include "ovl/tensor.hpp"

namespace ovl {

struct GemmCoefficients {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
};

struct ConvControlFlags {
  bool read_input_from_buffer = false;
  bool store_output_to_buffer = false;
  bool with_relu = false;
  bool is_fc_layer = false;

  bool operator==(const ConvControlFlags&) const = default;
};

/// The single on-chip slot carrying a feature map between two layers.
/// It has its own buffer id so the scheduler can reason about it like any
/// other buffer.
template <class T>
class FeatureBuffer {
 public:
  FeatureBuffer() : id_(next_buffer_id()) {}

  BufferId id() const { return id_; }
  bool valid() const { return valid_; }

  /// Throws kEmptyFeatureBuffer when nothing has been stored yet.
  const TensorBuffer<T>& get() const;
  /// Marks the slot valid and returns storage of the given shape, reusing
  /// the current allocation when the shape is unchanged.
  TensorBuffer<T>& store(const Shape& shape);
  void clear() { valid_ = false; }

  /// The whole slot is one element range; any two uses overlap.
  AccessSet access(AccessMode mode) const { return AccessSet{id_, {{0, 1}}, mode}; }

 private:
  BufferId id_;
  bool valid_ = false;
  std::optional<TensorBuffer<T>> slot_;
};

/// |pivot| below this is treated as zero.
template <class T>
constexpr T pivot_epsilon() {
  return sizeof(T) >= 8 ? T(1e-12) : T(1e-6);
}

/// Unpivoted Doolittle factorization of a square block into packed L\U.
/// Throws SingularPivotError naming the first zero pivot.
template <class T>
void lu_factor_block(const BlockView<T>& a);

/// panel = [L\U | B1 ... Bk-1] with m rows; replaces each Bj by L^-1 Bj
/// (unit lower L from the first block).
template <class T>
void transform_row_panel(const BlockView<T>& panel);

/// panel = [L\U ; B1 ; ... ; Bk-1] with m columns; replaces each Bj by
/// Bj U^-1 (upper U from the first block).
template <class T>
void transform_column_panel(const BlockView<T>& panel);

/// C := alpha*C + beta*A*(gamma*B). C must not overlap A or B.
template <class T>
void gemm(const BlockView<T>& c, const BlockView<T>& a, const BlockView<T>& b,
          GemmCoefficients co);

/// Convolution IP. Input comes from the feature buffer or `x`, output goes
/// to the feature buffer or `y`, per `flags`; the routed-away operand is
/// not touched.
///
/// Regular layers: input H x W x Cin, weights Kh x Kw x Cin x Cout with odd
/// kernel extents, stride 1 and zero padding that preserves H x W;
/// cross-correlation (no kernel flip). FC layers: input flattened, weights
/// Win x Wout, out = in * W. Weight/input views may carry trailing axes of
/// extent 1. DDR output is written over the leading elements of `y` in
/// row-major order, DDR input is read from the leading elements of `x`.
///
/// Returns the shape of the produced feature map.
template <class T>
Shape convolution(const BlockView<T>& x, const BlockView<T>& y, const BlockView<T>& w,
                  ConvControlFlags flags, FeatureBuffer<T>& fb);

/// 2x2 stride-2 max pooling of the feature buffer (H x W x C, H and W even).
/// Result goes back to the feature buffer or over the leading elements of
/// `y`. Returns the pooled shape.
template <class T>
Shape maxpool(const BlockView<T>& y, bool store_output_to_buffer, FeatureBuffer<T>& fb);

}  // namespace ovl
