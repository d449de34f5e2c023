// SPDX-License-Identifier: Apache-2.0
#include "ovl/vgg_model.hpp"

#include <algorithm>

namespace ovl {

VggConfig VggConfig::tiny() { return VggConfig{}; }

VggConfig VggConfig::small() {
  VggConfig c;
  c.height = c.width = 64;
  c.stage_channels = {4, 4, 8, 8, 8};
  c.fc = {16, 16, 8};
  return c;
}

void VggConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfiguration, "VGG config: " + what); };
  if (height == 0 || width == 0 || height % 32 || width % 32) fail("H and W must be positive multiples of 32");
  if (channels == 0 || batch == 0) fail("input channels and batch must be >= 1");
  for (std::size_t c : stage_channels) {
    if (c == 0) fail("stage channel counts must be >= 1");
  }
  for (std::size_t f : fc) {
    if (f == 0) fail("FC widths must be >= 1");
  }
}

std::pair<std::size_t, std::size_t> VggConfig::conv_position(std::size_t layer) {
  std::size_t first = 0;
  for (std::size_t s = 0; s < kStages; ++s) {
    if (layer < first + kConvsPerStage[s]) return {s, layer - first};
    first += kConvsPerStage[s];
  }
  throw Error(ErrorCode::kConfiguration, "conv layer " + std::to_string(layer) + " out of range");
}

std::size_t VggConfig::conv_in_channels(std::size_t layer) const {
  const auto [stage, index] = conv_position(layer);
  if (index > 0) return stage_channels[stage];
  return stage == 0 ? channels : stage_channels[stage - 1];
}

std::size_t VggConfig::conv_out_channels(std::size_t layer) const { return stage_channels[conv_position(layer).first]; }

Shape VggConfig::conv_group_shape(std::size_t stage) const {
  const std::size_t first_in = stage == 0 ? channels : stage_channels[stage - 1];
  return {kKernel, kKernel, std::max(first_in, stage_channels[stage]), stage_channels[stage], kConvsPerStage[stage]};
}

Shape VggConfig::fc_shape(std::size_t layer) const {
  const std::size_t in = layer == 0 ? flat_features() : fc[layer - 1];
  return {in, fc[layer]};
}

std::size_t VggConfig::flat_features() const { return (height / 32) * (width / 32) * stage_channels.back(); }

std::size_t VggConfig::output_rows() const {
  return std::max({flat_features(), fc[0], fc[1], fc[2]});
}

template <class T>
VggWeights<T> make_vgg_weights(const VggConfig& config, std::uint64_t seed, double lo, double hi) {
  config.validate();
  VggWeights<T> w;
  for (std::size_t s = 0; s < kStages; ++s) {
    w.conv[s] = new_buffer<T>(config.conv_group_shape(s), SeededRandom{lo, hi, seed * 101 + s});
  }
  for (std::size_t f = 0; f < kFcLayers; ++f) {
    w.fc[f] = new_buffer<T>(config.fc_shape(f), SeededRandom{lo, hi, seed * 101 + kStages + f});
  }
  return w;
}

template <class T>
VggWeights<T> make_vgg_weights(const VggConfig& config, const FillSpec& fill) {
  config.validate();
  VggWeights<T> w;
  for (std::size_t s = 0; s < kStages; ++s) w.conv[s] = new_buffer<T>(config.conv_group_shape(s), fill);
  for (std::size_t f = 0; f < kFcLayers; ++f) w.fc[f] = new_buffer<T>(config.fc_shape(f), fill);
  return w;
}

std::string conv_kind(std::size_t layer) { return "ConvLayers[" + std::to_string(layer) + "]"; }
std::string pool_kind(std::size_t layer) { return "MaxpoolLayers[" + std::to_string(layer) + "]"; }
std::string fc_kind(std::size_t layer) { return "FCLayers[" + std::to_string(layer) + "]"; }

template VggWeights<float> make_vgg_weights<float>(const VggConfig&, std::uint64_t, double, double);
template VggWeights<double> make_vgg_weights<double>(const VggConfig&, std::uint64_t, double, double);
template VggWeights<float> make_vgg_weights<float>(const VggConfig&, const FillSpec&);
template VggWeights<double> make_vgg_weights<double>(const VggConfig&, const FillSpec&);

}  // namespace ovl
