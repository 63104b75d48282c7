#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "protoaudio/autodiff.hpp"

namespace protoaudio {

/// Ordered, named collection of learnable tensors.
struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

class ParamSet {
 public:
  void add(std::string name, ad::Tensor tensor);
  const ad::Tensor& at(const std::string& name) const;
  const ad::Tensor& operator[](std::size_t i) const { return entries_[i].tensor; }
  std::size_t size() const noexcept { return entries_.size(); }

  const std::vector<NamedTensor>& entries() const noexcept { return entries_; }
  std::vector<ad::Tensor> tensors() const;

  /// Deep copy: independent storage, same names, shapes and values.
  ParamSet clone() const;

  /// True when names, shapes and values are bit-identical.
  bool identical(const ParamSet& other) const;

 private:
  std::vector<NamedTensor> entries_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, all integers little-endian:
///   "PSHT" | u32 version | per parameter:
///   u32 name_len | name bytes | u32 rank | u64 dims[rank] | f64 data[prod(dims)]
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path);

}  // namespace protoaudio
