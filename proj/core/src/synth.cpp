#include "protoaudio/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "protoaudio/error.hpp"
#include "protoaudio/rng.hpp"

namespace protoaudio::synth {

void SynthClassSpec::validate(int sample_rate) const {
  const double nyquist = sample_rate / 2.0;
  if (burst_min > burst_max) fail(ErrorCode::kInvalidArgument, "burst_count", class_name + ": burst_min > burst_max");
  if (!(freq_lo > 0.0) || !(freq_lo <= freq_hi) || !(freq_hi < nyquist))
    fail(ErrorCode::kInvalidArgument, "center_frequency", class_name + ": frequency range outside (0, Nyquist)");
  if (!(bandwidth > 0.0)) fail(ErrorCode::kInvalidArgument, "bandwidth", class_name + ": bandwidth must be positive");
  if (!(decay >= 0.0)) fail(ErrorCode::kInvalidArgument, "decay", class_name + ": decay must be non-negative");
  if (!(noise_floor >= 0.0)) fail(ErrorCode::kInvalidArgument, "noise_floor", class_name + ": noise floor must be >= 0");
}

std::vector<SynthClassSpec> default_classes() {
  return {
      {"low_band", 1, 3, 150.0, 950.0, 400.0, 14.0, 0.32},
      {"mid_band", 1, 3, 850.0, 2300.0, 400.0, 14.0, 0.32},
      {"high_band", 1, 3, 2100.0, 6000.0, 400.0, 14.0, 0.32},
  };
}

AudioClip generate_clip(const SynthClassSpec& spec, std::uint64_t seed) {
  constexpr int kRate = kCanonicalSampleRate;
  spec.validate(kRate);
  SplitMix64 gen(mix_seed(seed, 0x5717));
  AudioClip clip;
  clip.sample_rate = kRate;
  clip.samples.assign(kRate, 0.0);

  const std::size_t bursts =
      spec.burst_min + static_cast<std::size_t>(uniform_index(gen, spec.burst_max - spec.burst_min + 1));
  for (std::size_t b = 0; b < bursts; ++b) {
    const double center = spec.freq_lo + (spec.freq_hi - spec.freq_lo) * uniform01(gen);
    const auto onset = static_cast<std::size_t>(0.7 * kRate * uniform01(gen));
    const double gain = 0.5 + 0.5 * uniform01(gen);

    // RBJ constant-peak band-pass biquad.
    const double w0 = 2.0 * std::numbers::pi * center / kRate;
    const double q = center / spec.bandwidth;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    const double b0 = alpha / a0, b2 = -alpha / a0;
    const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = onset; i < clip.samples.size(); ++i) {
      const double t = static_cast<double>(i - onset) / kRate;
      const double x = standard_normal(gen);
      const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x;
      y2 = y1;
      y1 = y;
      clip.samples[i] += gain * std::exp(-spec.decay * t) * y;
    }
  }
  if (spec.noise_floor > 0.0)
    for (double& s : clip.samples) s += spec.noise_floor * standard_normal(gen);

  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0)
    for (double& s : clip.samples) s *= 0.9 / peak;
  return clip;
}

ClipPool generate_pool(const std::vector<SynthClassSpec>& classes, std::size_t n_per_class, std::uint64_t seed) {
  ClipPool pool;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    classes[c].validate();
    pool.class_names.push_back(classes[c].class_name);
    const std::uint64_t class_seed = mix_seed(seed, hash_name(classes[c].class_name));
    for (std::size_t i = 0; i < n_per_class; ++i)
      pool.clips.push_back({c, classes[c].class_name + "#" + std::to_string(i),
                            generate_clip(classes[c], mix_seed(class_seed, i))});
  }
  return pool;
}

SplitPool generate_dataset(const std::vector<SynthClassSpec>& classes, std::size_t n_per_class, std::uint64_t seed) {
  if (n_per_class < 5) fail(ErrorCode::kInvalidArgument, "n_per_class", "at least 5 clips per class required");
  return split_pool(generate_pool(classes, n_per_class, seed), 0.8, mix_seed(seed, 0x5011));
}

SplitPool generate_dataset(std::size_t n_per_class, std::uint64_t seed) {
  return generate_dataset(default_classes(), n_per_class, seed);
}

}  // namespace protoaudio::synth
