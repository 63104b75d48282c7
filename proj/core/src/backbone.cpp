#include "protoaudio/backbone.hpp"

#include <cmath>
#include <string>

#include "protoaudio/error.hpp"
#include "protoaudio/rng.hpp"

namespace protoaudio {

void BackboneConfig::validate() const {
  if (block_channels.empty()) fail(ErrorCode::kInvalidArgument, "block_channels", "at least one block required");
  for (std::size_t c : block_channels)
    if (c == 0) fail(ErrorCode::kInvalidArgument, "block_channels", "channel counts must be positive");
  const std::size_t factor = std::size_t{1} << block_channels.size();
  if (input_height == 0 || input_width == 0 || input_height % factor != 0 || input_width % factor != 0)
    fail(ErrorCode::kInvalidArgument, "input_size",
         "input " + std::to_string(input_height) + "x" + std::to_string(input_width) + " not divisible by " +
             std::to_string(factor));
}

ParamSet init_params(const BackboneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamSet params;
  SplitMix64 gen(mix_seed(seed, 0x0BAC4B0E));
  std::size_t in_channels = 1;
  for (std::size_t i = 0; i < cfg.block_channels.size(); ++i) {
    const std::size_t out_channels = cfg.block_channels[i];
    const std::size_t fan_in = in_channels * 9;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> w(out_channels * fan_in);
    for (double& v : w) v = (2.0 * uniform01(gen) - 1.0) * bound;
    params.add("block" + std::to_string(i) + ".weight",
               ad::Tensor::from({out_channels, in_channels, 3, 3}, std::move(w), true));
    params.add("block" + std::to_string(i) + ".bias", ad::Tensor::zeros({out_channels}, true));
    in_channels = out_channels;
  }
  return params;
}

void check_params(const BackboneConfig& cfg, const ParamSet& params) {
  cfg.validate();
  if (params.size() != 2 * cfg.block_channels.size())
    fail(ErrorCode::kShapeMismatch, "params",
         "expected " + std::to_string(2 * cfg.block_channels.size()) + " tensors, got " + std::to_string(params.size()));
  std::size_t in_channels = 1;
  for (std::size_t i = 0; i < cfg.block_channels.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i);
    const ad::Shape want_w{cfg.block_channels[i], in_channels, 3, 3};
    const ad::Shape want_b{cfg.block_channels[i]};
    if (params.at(prefix + ".weight").shape() != want_w)
      fail(ErrorCode::kShapeMismatch, prefix + ".weight",
           prefix + ".weight has shape " + ad::shape_string(params.at(prefix + ".weight").shape()) + ", expected " +
               ad::shape_string(want_w));
    if (params.at(prefix + ".bias").shape() != want_b)
      fail(ErrorCode::kShapeMismatch, prefix + ".bias", prefix + ".bias has the wrong shape");
    in_channels = cfg.block_channels[i];
  }
}

ad::Tensor embed(const ad::Tensor& input, const ParamSet& params, const BackboneConfig& cfg) {
  if (input.rank() != 4 || input.dim(1) != 1 || input.dim(2) != cfg.input_height || input.dim(3) != cfg.input_width)
    fail(ErrorCode::kShapeMismatch, "input",
         "embed: input " + ad::shape_string(input.shape()) + " does not match config [B,1," +
             std::to_string(cfg.input_height) + "," + std::to_string(cfg.input_width) + "]");
  ad::Tensor x = input;
  for (std::size_t i = 0; i < cfg.block_channels.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i);
    x = ad::conv2d(x, params.at(prefix + ".weight"), params.at(prefix + ".bias"), 1, 1);
    x = ad::maxpool2(ad::relu(x));
  }
  return ad::global_avg_pool(x);
}

ad::Tensor stack_images(std::span<const std::vector<double>* const> images, std::size_t height, std::size_t width) {
  const std::size_t area = height * width;
  std::vector<double> data;
  data.reserve(images.size() * area);
  for (const auto* img : images) {
    if (img->size() != area)
      fail(ErrorCode::kShapeMismatch, "image",
           "image has " + std::to_string(img->size()) + " values, expected " + std::to_string(area));
    data.insert(data.end(), img->begin(), img->end());
  }
  return ad::Tensor::from({images.size(), 1, height, width}, std::move(data));
}

}  // namespace protoaudio
