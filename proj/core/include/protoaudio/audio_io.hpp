#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace protoaudio {

inline constexpr int kCanonicalSampleRate = 22050;

/// Mono audio. Samples lie in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kCanonicalSampleRate;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  friend bool operator==(const AudioClip&, const AudioClip&) = default;
};

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a RIFF/WAVE file (PCM16 or IEEE float32, mono or stereo). Stereo is
/// averaged to mono and the native sample rate is kept. Chunks other than
/// `fmt ` and `data` are skipped.
///
/// Throws Error with kMissingFile, kMalformedHeader or kUnsupportedFormat;
/// `Error::field()` names the header field that failed.
AudioClip load_wav(const std::filesystem::path& path);

/// Writes a mono WAV file. PCM16 output rounds and clips to [-32768, 32767].
void save_wav(const std::filesystem::path& path, const AudioClip& clip,
              WavEncoding encoding = WavEncoding::kPcm16);

/// Band-limited resampling with a Hann-windowed sinc kernel (64 zero
/// crossings per side). When downsampling the kernel cutoff moves to the
/// target Nyquist. Output length is round(n * target_rate / rate).
AudioClip resample(const AudioClip& clip, int target_rate);

/// Keeps the first `seconds * rate` samples, or zero-pads up to that length.
AudioClip normalize_duration(const AudioClip& clip, double seconds = 1.0);

/// resample() to the canonical rate followed by normalize_duration(1 s).
AudioClip prepare_clip(const AudioClip& clip);

}  // namespace protoaudio
