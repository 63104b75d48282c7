#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "protoaudio/autodiff.hpp"
#include "protoaudio/backbone.hpp"
#include "protoaudio/checkpoint.hpp"
#include "protoaudio/dataset.hpp"
#include "protoaudio/grid.hpp"
#include "protoaudio/rng.hpp"

namespace protoaudio {

struct EpisodeSpec {
  std::size_t n_way = 3;
  std::size_t k_shot = 5;
  std::size_t q_query = 5;

  void validate() const;
};

/// `item` indexes the sampled pool; `label` is the episode-local class.
struct EpisodeItem {
  std::size_t item = 0;
  std::size_t label = 0;
};

/// Support and query are ordered class-major: all items of episode class 0
/// first. `class_map[label]` is the pool class id.
struct Episode {
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;
  std::vector<std::size_t> class_map;
};

/// Draws N classes without replacement, then K + Q distinct items per class.
/// Fails with kInsufficientSamples naming the first class (in id order) that
/// holds fewer than K + Q items.
Episode sample_episode(std::span<const std::size_t> item_labels, std::size_t n_classes, const EpisodeSpec& spec,
                       SplitMix64& rng);
Episode sample_episode(const SpectrogramPool& pool, const EpisodeSpec& spec, SplitMix64& rng);

/// Row n is the mean of the support rows labelled n. Every label 0..N-1 must
/// occur the same number of times.
ad::Tensor compute_prototypes(const ad::Tensor& support, std::span<const std::size_t> labels, std::size_t n_classes);

struct Classification {
  std::vector<std::size_t> predictions;
  ad::Tensor logits;  // [M, N], negative squared Euclidean distances
};

/// Nearest prototype by squared Euclidean distance; ties go to the lowest index.
Classification classify_queries(const ad::Tensor& queries, const ad::Tensor& prototypes);

/// Mean softmax cross-entropy over rows of `logits` (max-shifted log-sum-exp).
ad::Tensor episode_loss(const ad::Tensor& logits, std::span<const std::size_t> labels);

struct EpisodeResult {
  double accuracy = 0.0;  // fraction
  std::vector<std::size_t> per_class_correct;
  std::vector<std::size_t> per_class_total;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted], episode-local
  std::vector<std::size_t> class_map;
};

EpisodeResult score_episode(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                            std::size_t n_classes);

struct ClassSummary {
  std::size_t class_id = 0;
  std::size_t episodes = 0;  // episodes in which the class was sampled
  double mean = 0.0;         // percent
  double std_error = 0.0;    // percent
};

/// Aggregate over evaluation episodes. Accuracies are in percent; standard
/// errors are sample std / sqrt(n) and 0 for a single episode.
struct RunSummary {
  std::size_t episodes = 0;
  double mean_accuracy = 0.0;
  double std_error = 0.0;
  std::vector<ClassSummary> per_class;
  std::vector<std::vector<std::size_t>> confusion;  // pool classes, [true][predicted]
  std::vector<double> episode_accuracies;
};

RunSummary summarize_episodes(std::span<const EpisodeResult> results, std::size_t pool_classes);

struct TrainOptions {
  std::size_t episodes = 300;
  ad::AdamConfig adam;
  std::uint64_t seed = 0;
};

struct TrainResult {
  ParamSet params;
  std::vector<double> losses;
};

/// Episodic training. Per episode: sample, embed support and query with the
/// shared backbone, build prototypes, take the loss, backpropagate and step
/// Adam. Episode i draws from the stream mix_seed(seed, i).
TrainResult train(const SpectrogramPool& pool, const EpisodeSpec& spec, const BackboneConfig& cfg,
                  const ParamSet& initial, const TrainOptions& options);

/// Embeds every pool item with frozen parameters; row i belongs to item i.
Grid embed_pool(const SpectrogramPool& pool, const ParamSet& params, const BackboneConfig& cfg,
                std::size_t batch_size = 32);

/// Evaluation over precomputed embeddings (rows aligned with `labels`).
/// Episode i draws from the stream mix_seed(seed, i).
std::vector<EpisodeResult> evaluate_embeddings(const Grid& embeddings, std::span<const std::size_t> labels,
                                               std::size_t n_classes, const EpisodeSpec& spec,
                                               std::size_t episodes, std::uint64_t seed);

RunSummary evaluate(const SpectrogramPool& pool, const EpisodeSpec& spec, std::size_t episodes,
                    const ParamSet& params, const BackboneConfig& cfg, std::uint64_t seed);

}  // namespace protoaudio
