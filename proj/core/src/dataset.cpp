#include "protoaudio/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <numeric>

#include "protoaudio/error.hpp"
#include "protoaudio/rng.hpp"

namespace fs = std::filesystem;

namespace protoaudio {

std::size_t ClipPool::count(std::size_t class_id) const {
  return static_cast<std::size_t>(
      std::count_if(clips.begin(), clips.end(), [&](const LabeledClip& c) { return c.class_id == class_id; }));
}

SplitPool split_pool(const ClipPool& pool, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(ErrorCode::kInvalidArgument, "train_fraction", "train fraction must lie in (0, 1)");
  std::vector<bool> to_train(pool.clips.size(), false);
  for (std::size_t c = 0; c < pool.class_names.size(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pool.clips.size(); ++i)
      if (pool.clips[i].class_id == c) members.push_back(i);
    SplitMix64 gen(mix_seed(seed, c));
    for (std::size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[uniform_index(gen, i)]);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < n_train; ++i) to_train[members[i]] = true;
  }
  SplitPool out;
  out.train.class_names = pool.class_names;
  out.test.class_names = pool.class_names;
  for (std::size_t i = 0; i < pool.clips.size(); ++i)
    (to_train[i] ? out.train : out.test).clips.push_back(pool.clips[i]);
  return out;
}

ClipPool ingest_directory(const fs::path& root, const IngestOptions& options, IngestReport* report) {
  if (!fs::is_directory(root)) fail(ErrorCode::kMissingFile, root.string(), "dataset root " + root.string() + " is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) fail(ErrorCode::kInsufficientSamples, root.string(), "no class directories under " + root.string());

  ClipPool pool;
  for (const auto& dir : class_dirs) {
    const std::string name = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (entry.is_regular_file() && ext == ".wav") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    const std::size_t class_id = pool.class_names.size();
    std::size_t loaded = 0;
    for (const auto& file : files) {
      try {
        pool.clips.push_back({class_id, file.string(), load_wav(file)});
        ++loaded;
      } catch (const Error& e) {
        if (!options.skip_undecodable)
          fail(e.code(), file.string(), "cannot decode " + file.string() + ": " + e.what());
        if (report) report->skipped.push_back(file.string() + ": " + e.what());
      }
    }
    if (loaded == 0) fail(ErrorCode::kInsufficientSamples, name, "class directory '" + name + "' has no usable WAV files");
    pool.class_names.push_back(name);
  }
  return pool;
}

void save_pool_wav(const ClipPool& pool, const fs::path& root) {
  std::vector<std::size_t> next(pool.class_names.size(), 0);
  for (const auto& name : pool.class_names) fs::create_directories(root / name);
  char index[16];
  for (const auto& c : pool.clips) {
    const std::string& name = pool.class_names.at(c.class_id);
    std::snprintf(index, sizeof index, "%04zu", next[c.class_id]++);
    save_wav(root / name / (name + "_" + index + ".wav"), c.clip);
  }
}

std::vector<std::size_t> SpectrogramPool::labels() const {
  std::vector<std::size_t> out(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) out[i] = items[i].class_id;
  return out;
}

SpectrogramPool featurize(const ClipPool& pool, const FeatureParams& params) {
  params.validate();
  SpectrogramPool out;
  out.class_names = pool.class_names;
  out.height = params.target_height;
  out.width = params.target_width;
  out.items.reserve(pool.clips.size());
  for (std::size_t i = 0; i < pool.clips.size(); ++i) {
    const auto& c = pool.clips[i];
    MelSpectrogram spec = mel_spectrogram(prepare_clip(c.clip), params);
    out.items.push_back({i, c.class_id, std::move(spec.values.data)});
  }
  return out;
}

SpectrogramPool select_classes(const SpectrogramPool& pool, std::span<const std::string> names) {
  SpectrogramPool out;
  out.height = pool.height;
  out.width = pool.width;
  std::vector<std::size_t> remap(pool.class_names.size(), SIZE_MAX);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto it = std::find(pool.class_names.begin(), pool.class_names.end(), names[i]);
    if (it == pool.class_names.end()) fail(ErrorCode::kConfig, names[i], "unknown class '" + names[i] + "'");
    remap[static_cast<std::size_t>(it - pool.class_names.begin())] = i;
    out.class_names.push_back(names[i]);
  }
  for (const auto& item : pool.items)
    if (remap[item.class_id] != SIZE_MAX) out.items.push_back({item.id, remap[item.class_id], item.pixels});
  return out;
}

}  // namespace protoaudio
