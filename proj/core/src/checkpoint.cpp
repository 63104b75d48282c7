#include "protoaudio/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "protoaudio/error.hpp"

namespace protoaudio {
namespace {

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint64_t read(int n, const char* field) {
    need(static_cast<std::size_t>(n), field);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string read_string(std::size_t n, const char* field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* field) {
    if (bytes_.size() - pos_ < n)
      fail(ErrorCode::kMalformedHeader, field, "checkpoint " + path_ + " truncated at " + field);
  }

  const std::vector<unsigned char>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void ParamSet::add(std::string name, ad::Tensor tensor) {
  for (const auto& e : entries_)
    if (e.name == name) fail(ErrorCode::kInvalidArgument, name, "duplicate parameter name " + name);
  entries_.push_back({std::move(name), std::move(tensor)});
}

const ad::Tensor& ParamSet::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  fail(ErrorCode::kInvalidArgument, name, "no parameter named " + name);
}

std::vector<ad::Tensor> ParamSet::tensors() const {
  std::vector<ad::Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor);
  return out;
}

ParamSet ParamSet::clone() const {
  ParamSet copy;
  for (const auto& e : entries_) copy.add(e.name, e.tensor.clone());
  return copy;
}

bool ParamSet::identical(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.tensor.shape() != b.tensor.shape()) return false;
    if (std::memcmp(a.tensor.data().data(), b.tensor.data().data(), a.tensor.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
  std::string out = "PSHT";
  put_le(out, kCheckpointVersion, 4);
  for (const auto& e : params.entries()) {
    put_le(out, e.name.size(), 4);
    out += e.name;
    put_le(out, e.tensor.rank(), 4);
    for (std::size_t d : e.tensor.shape()) put_le(out, d, 8);
    for (double v : e.tensor.data()) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) fail(ErrorCode::kIo, path.string(), "cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingFile, path.string(), "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(bytes, path.string());
  if (r.read_string(4, "magic") != "PSHT") fail(ErrorCode::kMalformedHeader, "magic", "not a PSHT checkpoint");
  const auto version = r.read(4, "version");
  if (version != kCheckpointVersion)
    fail(ErrorCode::kUnsupportedFormat, "version", "checkpoint version " + std::to_string(version));
  ParamSet params;
  while (!r.done()) {
    const auto name_len = r.read(4, "name_len");
    std::string name = r.read_string(name_len, "name");
    const auto rank = r.read(4, "rank");
    ad::Shape shape(rank);
    for (auto& d : shape) d = r.read(8, "dims");
    std::vector<double> data(ad::numel(shape));
    for (double& v : data) v = std::bit_cast<double>(r.read(8, "data"));
    params.add(std::move(name), ad::Tensor::from(std::move(shape), std::move(data), true));
  }
  return params;
}

}  // namespace protoaudio
