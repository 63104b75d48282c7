#include "protoaudio/audio_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "protoaudio/error.hpp"

namespace protoaudio {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kMissingFile: return "missing-file";
    case ErrorCode::kMalformedHeader: return "malformed-header";
    case ErrorCode::kUnsupportedFormat: return "unsupported-format";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kInsufficientSamples: return "insufficient-samples";
    case ErrorCode::kDegenerateData: return "degenerate-data";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

[[noreturn]] void malformed(const std::string& field, const std::string& what) {
  fail(ErrorCode::kMalformedHeader, field, "malformed WAV (" + field + "): " + what);
}

[[noreturn]] void unsupported(const std::string& field, const std::string& what) {
  fail(ErrorCode::kUnsupportedFormat, field, "unsupported WAV (" + field + "): " + what);
}

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

FormatChunk parse_format(const unsigned char* p, std::uint32_t size) {
  if (size < 16) malformed("fmt.size", "fmt chunk shorter than 16 bytes");
  FormatChunk f;
  f.format = read_u16(p);
  f.channels = read_u16(p + 2);
  f.sample_rate = read_u32(p + 4);
  f.block_align = read_u16(p + 12);
  f.bits = read_u16(p + 14);
  if (f.format == kFormatExtensible) {
    if (size < 26) malformed("fmt.extensible", "extensible fmt chunk too short");
    f.format = read_u16(p + 24);  // first two bytes of the sub-format GUID
  }
  if (f.format != kFormatPcm && f.format != kFormatFloat)
    unsupported("fmt.audio_format", "codec " + std::to_string(f.format));
  if (f.channels != 1 && f.channels != 2)
    unsupported("fmt.channels", std::to_string(f.channels) + " channels");
  if (f.sample_rate == 0) malformed("fmt.sample_rate", "zero sample rate");
  if (f.format == kFormatPcm && f.bits != 16)
    unsupported("fmt.bits_per_sample", std::to_string(f.bits) + "-bit PCM");
  if (f.format == kFormatFloat && f.bits != 32)
    unsupported("fmt.bits_per_sample", std::to_string(f.bits) + "-bit float");
  if (f.block_align != f.channels * (f.bits / 8))
    malformed("fmt.block_align", "block align " + std::to_string(f.block_align));
  return f;
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingFile, path.string(), "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());

  if (bytes.size() < 12) malformed("riff", "file shorter than RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0) malformed("riff", "missing RIFF tag");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) malformed("wave", "missing WAVE tag");

  FormatChunk fmt;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (body + size > bytes.size()) malformed("fmt.size", "fmt chunk runs past end of file");
      fmt = parse_format(bytes.data() + body, size);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (body + size > bytes.size()) malformed("data.size", "data chunk truncated");
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) malformed("fmt", "no fmt chunk before data");
  if (data == nullptr) malformed("data", "no data chunk");
  if (data_size % fmt.block_align != 0) malformed("data.size", "partial sample frame");

  const std::size_t frames = data_size / fmt.block_align;
  if (frames == 0) malformed("data.size", "no sample frames");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.samples.resize(frames);
  const std::size_t bytes_per_sample = fmt.bits / 8;
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt.channels; ++c) {
      const unsigned char* p = data + f * fmt.block_align + c * bytes_per_sample;
      double v;
      if (fmt.format == kFormatPcm) {
        v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        v = static_cast<double>(std::bit_cast<float>(read_u32(p)));
        if (!std::isfinite(v)) malformed("data", "non-finite float sample");
        v = std::clamp(v, -1.0, 1.0);
      }
      acc += v;
    }
    clip.samples[f] = acc / fmt.channels;
  }
  return clip;
}

void save_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding) {
  if (clip.sample_rate <= 0) fail(ErrorCode::kInvalidArgument, "sample_rate", "sample rate must be positive");
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint16_t block_align = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(clip.samples.size() * block_align);

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, pcm ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_size);
  for (double s : clip.samples) {
    if (pcm) {
      const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) fail(ErrorCode::kIo, path.string(), "cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) fail(ErrorCode::kIo, path.string(), "short write to " + path.string());
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) fail(ErrorCode::kInvalidArgument, "target_rate", "target rate must be positive");
  if (clip.sample_rate <= 0) fail(ErrorCode::kInvalidArgument, "sample_rate", "source rate must be positive");
  if (clip.sample_rate == target_rate) return clip;

  constexpr int kZeroCrossings = 64;
  const auto in_len = static_cast<std::int64_t>(clip.samples.size());
  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const auto out_len = static_cast<std::int64_t>(std::llround(in_len * ratio));
  const double cutoff = std::min(1.0, ratio);
  const double half_width = kZeroCrossings / cutoff;  // in input samples

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.assign(static_cast<std::size_t>(out_len), 0.0);
  for (std::int64_t i = 0; i < out_len; ++i) {
    // Exact rational position avoids drift over long clips.
    const double t = static_cast<double>(i * clip.sample_rate) / target_rate;
    const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::int64_t>(in_len - 1, static_cast<std::int64_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::int64_t k = lo; k <= hi; ++k) {
      const double x = t - static_cast<double>(k);
      if (std::abs(x) >= half_width) continue;
      const double arg = std::numbers::pi * cutoff * x;
      const double sinc = x == 0.0 ? 1.0 : std::sin(arg) / arg;
      const double window = 0.5 * (1.0 + std::cos(std::numbers::pi * x / half_width));
      acc += clip.samples[static_cast<std::size_t>(k)] * cutoff * sinc * window;
    }
    out.samples[static_cast<std::size_t>(i)] = std::clamp(acc, -1.0, 1.0);
  }
  return out;
}

AudioClip normalize_duration(const AudioClip& clip, double seconds) {
  if (!(seconds > 0.0)) fail(ErrorCode::kInvalidArgument, "seconds", "duration must be positive");
  if (clip.samples.empty()) fail(ErrorCode::kInvalidArgument, "samples", "clip is empty");
  const auto target = static_cast<std::size_t>(std::llround(seconds * clip.sample_rate));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.samples.begin(),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(std::min(target, clip.samples.size())));
  out.samples.resize(target, 0.0);
  return out;
}

AudioClip prepare_clip(const AudioClip& clip) {
  return normalize_duration(resample(clip, kCanonicalSampleRate), 1.0);
}

}  // namespace protoaudio
