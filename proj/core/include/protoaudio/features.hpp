#pragma once

#include <cstddef>
#include <filesystem>

#include "protoaudio/audio_io.hpp"
#include "protoaudio/grid.hpp"

namespace protoaudio {

struct FeatureParams {
  std::size_t n_fft = 2048;
  std::size_t hop = 512;
  std::size_t n_mels = 128;
  double f_min = 0.0;
  double f_max = 11025.0;
  int sample_rate = kCanonicalSampleRate;
  std::size_t target_height = 224;
  std::size_t target_width = 224;

  /// Throws Error(kInvalidArgument) naming the first violated field.
  void validate() const;
  friend bool operator==(const FeatureParams&, const FeatureParams&) = default;
};

/// Standardized log-mel spectrogram after resizing. `n_mels` and `n_frames`
/// describe the grid before the resize step.
struct MelSpectrogram {
  Grid values;
  std::size_t n_mels = 0;
  std::size_t n_frames = 0;
  FeatureParams params;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Power spectrogram |DFT|^2 of Hann-windowed, reflect-padded (centered)
/// frames. Shape [n_fft/2 + 1, 1 + len/hop].
Grid stft_power(const AudioClip& clip, std::size_t n_fft, std::size_t hop);

/// HTK-scale triangular filters, shape [n_mels, n_fft/2 + 1]. Each row is
/// scaled so its largest sampled weight is exactly 1.
Grid mel_filterbank(std::size_t n_mels, std::size_t n_fft, int rate, double f_min, double f_max);

/// Center frequency (Hz) of every filter produced by mel_filterbank().
std::vector<double> mel_center_frequencies(std::size_t n_mels, double f_min, double f_max);

/// Filterbank applied to the power STFT, shape [n_mels, n_frames].
Grid mel_power(const AudioClip& clip, const FeatureParams& params);

/// log(x + 1e-10) followed by per-grid standardization (population std).
/// A grid with std < 1e-8 becomes all zeros.
Grid log_standardize(const Grid& mel);

/// Full pipeline: mel_power -> log_standardize -> resize to target size.
MelSpectrogram mel_spectrogram(const AudioClip& clip, const FeatureParams& params);

/// Bilinear interpolation with half-pixel centers (align_corners = false).
Grid resize_bilinear(const Grid& grid, std::size_t out_h, std::size_t out_w);

/// Row-major CSV, nine significant digits per value.
void write_grid_csv(const std::filesystem::path& path, const Grid& grid);

/// 8-bit binary PGM; values min-max scaled to [0, 255], first row at the top.
void write_grid_pgm(const std::filesystem::path& path, const Grid& grid);

}  // namespace protoaudio
