#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "protoaudio/audio_io.hpp"
#include "protoaudio/features.hpp"

namespace protoaudio {

struct LabeledClip {
  std::size_t class_id = 0;
  std::string source;  // file path or synthetic identifier
  AudioClip clip;
};

struct ClipPool {
  std::vector<std::string> class_names;
  std::vector<LabeledClip> clips;

  std::size_t count(std::size_t class_id) const;
};

struct SplitPool {
  ClipPool train;
  ClipPool test;
};

/// Stratified split: per class, round(train_fraction * n) clips go to train
/// after a seeded shuffle. Within each side clips keep their original order.
SplitPool split_pool(const ClipPool& pool, double train_fraction, std::uint64_t seed);

struct IngestOptions {
  bool skip_undecodable = false;
};

struct IngestReport {
  std::vector<std::string> skipped;  // "path: reason"
};

/// Reads root/<class_name>/*.wav. Class ids follow the lexicographic order of
/// the directory names and files are read in lexicographic order.
ClipPool ingest_directory(const std::filesystem::path& root, const IngestOptions& options = {},
                          IngestReport* report = nullptr);

/// Writes every clip as root/<class_name>/<class_name>_<index>.wav (PCM16).
void save_pool_wav(const ClipPool& pool, const std::filesystem::path& root);

/// One spectrogram image per clip. `id` is the clip's index in the source pool.
struct SpectrogramItem {
  std::size_t id = 0;
  std::size_t class_id = 0;
  std::vector<double> pixels;
};

struct SpectrogramPool {
  std::vector<std::string> class_names;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<SpectrogramItem> items;

  std::vector<std::size_t> labels() const;
};

/// prepare_clip() then mel_spectrogram() for every clip.
SpectrogramPool featurize(const ClipPool& pool, const FeatureParams& params);

/// Keeps only the named classes, relabelled 0..names.size()-1 in the given order.
SpectrogramPool select_classes(const SpectrogramPool& pool, std::span<const std::string> names);

}  // namespace protoaudio
