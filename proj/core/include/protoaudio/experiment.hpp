#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "protoaudio/autodiff.hpp"
#include "protoaudio/backbone.hpp"
#include "protoaudio/features.hpp"
#include "protoaudio/fewshot.hpp"
#include "protoaudio/stats.hpp"
#include "protoaudio/tsne.hpp"

namespace protoaudio {

enum class TaskKind {
  kBinary,      // one pair of classes
  kMulticlass,  // three classes
  kStudy,       // multiclass + every binary pair + statistics + t-SNE
};

struct DatasetSource {
  bool synthetic = true;
  std::filesystem::path directory;  // root/<class>/*.wav when not synthetic
  std::size_t n_per_class = 100;    // synthetic only
  bool skip_undecodable = false;
};

struct ExperimentConfig {
  DatasetSource dataset;
  TaskKind task = TaskKind::kStudy;
  std::vector<std::string> classes;  // empty: every class of the dataset
  std::vector<std::size_t> k_values{1, 5, 10, 15};
  std::size_t q_query = 5;
  std::size_t train_episodes = 300;
  std::size_t eval_episodes = 100;
  double margin = 15.0;  // percentage points
  std::size_t bootstrap_resamples = 10000;
  double train_fraction = 0.8;
  ad::AdamConfig adam;
  BackboneConfig backbone;
  FeatureParams features;
  tsne::TsneConfig tsne;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  /// Checks everything that does not need the dataset. Throws Error(kConfig).
  void validate() const;
};

/// Parses the JSON config. Unknown keys and type errors throw Error(kConfig)
/// naming the key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

/// Derived seed for one experiment: hash(seed, name, K).
std::uint64_t sub_seed(std::uint64_t seed, const std::string& name, std::size_t k = 0);

struct PairedComparison {
  std::vector<double> multiclass;  // per-K mean accuracy
  std::vector<double> binary;      // per-K mean over binary pairs
  std::optional<stats::PairedTestResult> t_test;
  std::optional<std::string> t_test_error;
  std::optional<stats::PairedTestResult> wilcoxon;
  std::optional<std::string> wilcoxon_error;
};

struct StatisticsReport {
  stats::EquivalenceReport tost;
  stats::EquivalenceReport bootstrap;
  PairedComparison paired;
};

struct TaskRun {
  std::string name;                       // "multiclass" or "binary_<a>_vs_<b>"
  std::vector<std::string> class_names;
  std::map<std::size_t, RunSummary> by_k;
};

struct ExperimentReport {
  std::vector<TaskRun> runs;
  std::optional<StatisticsReport> statistics;
  std::filesystem::path output_dir;
};

/// Runs every configured experiment and writes the report bundle:
///   <out>/<task>/<K>/{summary.json, episodes.csv, confusion.csv, model.psht}
///   <out>/stats/equivalence.json          (study only)
///   <out>/tsne/{points.csv, points.svg}   (largest-K multiclass model)
///   <out>/spectrograms/{support,query}_<class>.{csv,pgm}
///   <out>/summary.md
/// Config and dataset problems throw Error(kConfig) before training starts.
ExperimentReport run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

std::string run_summary_json(const RunSummary& summary, const std::string& task,
                             const std::vector<std::string>& class_names, const EpisodeSpec& spec);
std::string statistics_json(const StatisticsReport& report);
std::string markdown_summary(const ExperimentReport& report, const ExperimentConfig& cfg);

}  // namespace protoaudio
