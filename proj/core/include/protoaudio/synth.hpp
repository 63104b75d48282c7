#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "protoaudio/audio_io.hpp"
#include "protoaudio/dataset.hpp"

namespace protoaudio::synth {

/// Parameters of one synthetic cough-like class: a few exponentially decaying
/// band-passed noise bursts over a white-noise floor.
struct SynthClassSpec {
  std::string class_name;
  std::size_t burst_min = 1;
  std::size_t burst_max = 3;
  double freq_lo = 200.0;   // Hz, range of burst center frequencies
  double freq_hi = 600.0;
  double bandwidth = 150.0; // Hz
  double decay = 12.0;      // 1/s, envelope exp(-decay * t)
  double noise_floor = 0.02;

  void validate(int sample_rate = kCanonicalSampleRate) const;
};

/// Three classes with slightly overlapping center-frequency ranges: low_band, mid_band,
/// high_band.
std::vector<SynthClassSpec> default_classes();

/// One second at 22050 Hz, peak-normalized to 0.9 unless silent.
AudioClip generate_clip(const SynthClassSpec& spec, std::uint64_t seed);

/// n_per_class clips per default class (disjoint seed streams per class),
/// split 80/20 per class. Requires n_per_class >= 5.
SplitPool generate_dataset(std::size_t n_per_class, std::uint64_t seed);

/// Same, for caller-supplied classes.
SplitPool generate_dataset(const std::vector<SynthClassSpec>& classes, std::size_t n_per_class, std::uint64_t seed);

/// Unsplit pool, useful for writing a dataset directory.
ClipPool generate_pool(const std::vector<SynthClassSpec>& classes, std::size_t n_per_class, std::uint64_t seed);

}  // namespace protoaudio::synth
