// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shape bookkeeping for the VGG-style network: 13 conv layers in five
// stages (2,2,3,3,3), a 2x2 max pool closing each stage, then 3 FC layers.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "ovl/tensor.hpp"

namespace ovl {

inline constexpr std::size_t kStages = 5;
inline constexpr std::size_t kConvLayers = 13;
inline constexpr std::size_t kFcLayers = 3;
inline constexpr std::array<std::size_t, kStages> kConvsPerStage{2, 2, 3, 3, 3};
inline constexpr std::size_t kKernel = 3;

struct VggConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  std::array<std::size_t, kStages> stage_channels{2, 2, 4, 4, 4};
  std::array<std::size_t, kFcLayers> fc{8, 8, 4};
  std::size_t batch = 1;

  /// 32x32x3, channels [2,2,4,4,4], FC [8,8,4].
  static VggConfig tiny();
  /// 64x64x3, channels [4,4,8,8,8], FC [16,16,8].
  static VggConfig small();

  /// Throws kConfiguration unless H and W are multiples of 32 and every
  /// extent is positive.
  void validate() const;

  /// Stage of conv layer `layer` and its index within the stage.
  static std::pair<std::size_t, std::size_t> conv_position(std::size_t layer);
  std::size_t conv_in_channels(std::size_t layer) const;
  std::size_t conv_out_channels(std::size_t layer) const;
  /// [3, 3, max input channels in the stage, stage channels, convs in stage].
  Shape conv_group_shape(std::size_t stage) const;
  Shape fc_shape(std::size_t layer) const;
  /// Flattened length after the fifth pool.
  std::size_t flat_features() const;
  /// Rows of the per-map DDR output buffer; FC layers run in place in it.
  std::size_t output_rows() const;
};

template <class T>
struct VggWeights {
  std::array<BufferPtr<T>, kStages> conv;  // W01, W23, W46, W79, W1012
  std::array<BufferPtr<T>, kFcLayers> fc;  // WFC0..WFC2
};

/// Weights uniform in [lo, hi), each buffer seeded from `seed`.
template <class T>
VggWeights<T> make_vgg_weights(const VggConfig& config, std::uint64_t seed, double lo = -0.1, double hi = 0.1);
template <class T>
VggWeights<T> make_vgg_weights(const VggConfig& config, const FillSpec& fill);

std::string conv_kind(std::size_t layer);
std::string pool_kind(std::size_t layer);
std::string fc_kind(std::size_t layer);

}  // namespace ovl
