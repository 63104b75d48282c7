#include "protoaudio/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "protoaudio/error.hpp"

namespace protoaudio {
namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT.
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const std::complex<double> w = std::polar(1.0, angle * static_cast<double>(k));
      for (std::size_t i = k; i < n; i += len) {
        const std::complex<double> u = a[i];
        const std::complex<double> v = a[i + half] * w;
        a[i] = u + v;
        a[i + half] = u - v;
      }
    }
  }
}

}  // namespace

void FeatureParams::validate() const {
  auto bad = [](const char* field, const std::string& msg) {
    fail(ErrorCode::kInvalidArgument, field, std::string("feature params: ") + msg);
  };
  if (hop == 0) bad("hop", "hop must be positive");
  if (n_fft < hop) bad("n_fft", "n_fft must be >= hop");
  if (n_mels == 0) bad("n_mels", "n_mels must be >= 1");
  if (sample_rate <= 0) bad("sample_rate", "sample rate must be positive");
  if (!(f_min >= 0.0) || !(f_min < f_max)) bad("f_min", "require 0 <= f_min < f_max");
  if (f_max > sample_rate / 2.0) bad("f_max", "f_max exceeds Nyquist");
  if (target_height == 0 || target_width == 0) bad("target_size", "target size must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Grid stft_power(const AudioClip& clip, std::size_t n_fft, std::size_t hop) {
  if (!is_power_of_two(n_fft)) fail(ErrorCode::kInvalidArgument, "n_fft", "n_fft must be a power of two");
  if (hop == 0 || hop > n_fft) fail(ErrorCode::kInvalidArgument, "hop", "hop must be in [1, n_fft]");
  const std::size_t len = clip.samples.size();
  const std::size_t pad = n_fft / 2;
  if (len <= pad) fail(ErrorCode::kInvalidArgument, "samples", "clip too short for reflect padding");

  // Reflect padding excludes the edge sample: x[-1] = x[1].
  std::vector<double> padded(len + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) padded[i] = clip.samples[pad - i];
  std::copy(clip.samples.begin(), clip.samples.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) padded[pad + len + i] = clip.samples[len - 2 - i];

  std::vector<double> window(n_fft);
  for (std::size_t i = 0; i < n_fft; ++i)  // periodic Hann
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_fft));

  const std::size_t n_frames = 1 + len / hop;
  const std::size_t n_bins = n_fft / 2 + 1;
  Grid power(n_bins, n_frames);
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const double* frame = padded.data() + f * hop;
    for (std::size_t i = 0; i < n_fft; ++i) buf[i] = {frame[i] * window[i], 0.0};
    fft(buf);
    for (std::size_t k = 0; k < n_bins; ++k) power(k, f) = std::norm(buf[k]);
  }
  return power;
}

std::vector<double> mel_center_frequencies(std::size_t n_mels, double f_min, double f_max) {
  const double lo = hz_to_mel(f_min);
  const double hi = hz_to_mel(f_max);
  std::vector<double> centers(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m)
    centers[m] = mel_to_hz(lo + (hi - lo) * static_cast<double>(m + 1) / static_cast<double>(n_mels + 1));
  return centers;
}

Grid mel_filterbank(std::size_t n_mels, std::size_t n_fft, int rate, double f_min, double f_max) {
  if (n_mels == 0) fail(ErrorCode::kInvalidArgument, "n_mels", "n_mels must be >= 1");
  if (n_fft < 2) fail(ErrorCode::kInvalidArgument, "n_fft", "n_fft must be >= 2");
  if (rate <= 0) fail(ErrorCode::kInvalidArgument, "rate", "sample rate must be positive");
  if (f_max > rate / 2.0) fail(ErrorCode::kInvalidArgument, "f_max", "f_max exceeds Nyquist");
  if (!(f_min >= 0.0) || !(f_min < f_max)) fail(ErrorCode::kInvalidArgument, "f_min", "require 0 <= f_min < f_max");

  const double lo = hz_to_mel(f_min);
  const double hi = hz_to_mel(f_max);
  std::vector<double> corners(n_mels + 2);
  for (std::size_t i = 0; i < corners.size(); ++i)
    corners[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));

  const std::size_t n_bins = n_fft / 2 + 1;
  Grid bank(n_mels, n_bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = corners[m], center = corners[m + 1], right = corners[m + 2];
    double peak = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * rate / static_cast<double>(n_fft);
      const double w = std::max(0.0, std::min((f - left) / (center - left), (right - f) / (right - center)));
      bank(m, k) = w;
      peak = std::max(peak, w);
    }
    if (peak == 0.0)
      fail(ErrorCode::kInvalidArgument, "n_mels",
           "mel band " + std::to_string(m) + " covers no FFT bin; lower n_mels or raise n_fft");
    for (double& w : bank.row(m)) w /= peak;
  }
  return bank;
}

Grid mel_power(const AudioClip& clip, const FeatureParams& params) {
  params.validate();
  if (clip.sample_rate != params.sample_rate)
    fail(ErrorCode::kInvalidArgument, "sample_rate",
         "clip rate " + std::to_string(clip.sample_rate) + " != feature rate " + std::to_string(params.sample_rate));
  const Grid power = stft_power(clip, params.n_fft, params.hop);
  const Grid bank = mel_filterbank(params.n_mels, params.n_fft, params.sample_rate, params.f_min, params.f_max);

  Grid mel(params.n_mels, power.cols);
  for (std::size_t m = 0; m < bank.rows; ++m) {
    for (std::size_t k = 0; k < bank.cols; ++k) {
      const double w = bank(m, k);
      if (w == 0.0) continue;
      const double* src = power.data.data() + k * power.cols;
      double* dst = mel.data.data() + m * mel.cols;
      for (std::size_t f = 0; f < power.cols; ++f) dst[f] += w * src[f];
    }
  }
  return mel;
}

Grid log_standardize(const Grid& mel) {
  Grid out = mel;
  for (double& v : out.data) v = std::log(v + 1e-10);
  const double n = static_cast<double>(out.data.size());
  double mean = 0.0;
  for (double v : out.data) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : out.data) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (sd < 1e-8) {
    std::fill(out.data.begin(), out.data.end(), 0.0);
    return out;
  }
  for (double& v : out.data) v = (v - mean) / sd;
  return out;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip, const FeatureParams& params) {
  const Grid standardized = log_standardize(mel_power(clip, params));
  MelSpectrogram spec;
  spec.n_mels = standardized.rows;
  spec.n_frames = standardized.cols;
  spec.values = resize_bilinear(standardized, params.target_height, params.target_width);
  spec.params = params;
  return spec;
}

Grid resize_bilinear(const Grid& grid, std::size_t out_h, std::size_t out_w) {
  if (grid.empty()) fail(ErrorCode::kInvalidArgument, "grid", "cannot resize an empty grid");
  if (out_h == 0 || out_w == 0) fail(ErrorCode::kInvalidArgument, "size", "output dimensions must be positive");

  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(grid.rows, out_h);
  const auto tx = taps(grid.cols, out_w);

  Grid out(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto [y0, y1, fy] = ty[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto [x0, x1, fx] = tx[x];
      const double top = grid(y0, x0) + fx * (grid(y0, x1) - grid(y0, x0));
      const double bottom = grid(y1, x0) + fx * (grid(y1, x1) - grid(y1, x0));
      out(y, x) = top + fy * (bottom - top);
    }
  }
  return out;
}

void write_grid_csv(const std::filesystem::path& path, const Grid& grid) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, path.string(), "cannot write " + path.string());
  char buf[32];
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", grid(r, c));
      if (c) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

void write_grid_pgm(const std::filesystem::path& path, const Grid& grid) {
  if (grid.empty()) fail(ErrorCode::kInvalidArgument, "grid", "cannot export an empty grid");
  const auto [lo_it, hi_it] = std::minmax_element(grid.data.begin(), grid.data.end());
  const double lo = *lo_it, span = *hi_it - *lo_it;
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, path.string(), "cannot write " + path.string());
  out << "P5\n" << grid.cols << ' ' << grid.rows << "\n255\n";
  for (double v : grid.data) {
    const double scaled = span > 0.0 ? (v - lo) / span * 255.0 : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
  }
}

}  // namespace protoaudio
