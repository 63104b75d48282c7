#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "protoaudio/autodiff.hpp"
#include "protoaudio/checkpoint.hpp"

namespace protoaudio {

/// Single-channel conv embedding network: per block conv3x3 (pad 1) -> relu
/// -> maxpool2, then global average pooling. Stands in for a ResNet-18
/// feature extractor with its first layer swapped for one input channel.
struct BackboneConfig {
  std::size_t input_height = 224;
  std::size_t input_width = 224;
  std::vector<std::size_t> block_channels{16, 32, 64, 64};

  std::size_t embedding_dim() const { return block_channels.empty() ? 0 : block_channels.back(); }

  /// Throws Error(kInvalidArgument) when blocks are empty or the input is not
  /// divisible by 2^blocks.
  void validate() const;
  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

/// Kaiming-uniform (fan-in) conv weights, zero biases. Names are
/// "block<i>.weight" and "block<i>.bias". Deterministic in `seed`.
ParamSet init_params(const BackboneConfig& cfg, std::uint64_t seed);

/// Checks names and shapes of `params` against `cfg`.
void check_params(const BackboneConfig& cfg, const ParamSet& params);

/// input [B, 1, H, W] -> [B, embedding_dim]. The same parameters embed
/// support and query items.
ad::Tensor embed(const ad::Tensor& input, const ParamSet& params, const BackboneConfig& cfg);

/// Packs equally sized single-channel images into a [B, 1, H, W] tensor.
ad::Tensor stack_images(std::span<const std::vector<double>* const> images, std::size_t height, std::size_t width);

}  // namespace protoaudio
