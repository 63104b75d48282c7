#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "protoaudio/grid.hpp"

namespace protoaudio::tsne {

struct TsneConfig {
  double perplexity = 15.0;
  std::size_t iterations = 1000;
  double learning_rate = 100.0;
  double early_exaggeration = 4.0;
  std::size_t exaggeration_iterations = 100;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  std::uint64_t seed = 0;

  /// Requires perplexity < (points - 1) / 3 and iterations >= 1.
  void validate(std::size_t points) const;
};

/// Squared Euclidean distances between rows.
Grid pairwise_sq_distances(const Grid& points);

/// Row-conditional affinities P(j|i) whose Shannon entropy (bits) matches
/// log2(perplexity): per row a bisection on the Gaussian precision, at most
/// 50 steps, tolerance 1e-5. Requires 1 <= perplexity <= points - 1.
Grid calibrate_perplexity(const Grid& sq_distances, double perplexity);

/// (P(j|i) + P(i|j)) / (2M).
Grid symmetrize(const Grid& conditional);

/// Student-t affinities q_ij of a 2-D layout, normalized to sum to 1.
Grid student_affinities(const Grid& layout);

/// KL(P || Q) for the layout's Student-t affinities.
double kl_divergence(const Grid& p, const Grid& layout);

/// dKL/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2).
Grid kl_gradient(const Grid& p, const Grid& layout);

struct IterationView {
  std::size_t iteration = 0;
  const Grid& p;       // symmetrized affinities in use (exaggerated early on)
  const Grid& q;
  const Grid& layout;  // layout before this iteration's update
};

struct TsneResult {
  Grid layout;              // [M, 2]
  std::vector<double> kl;   // KL(P || Q) per iteration, without exaggeration
};

/// Exact O(M^2) t-SNE with momentum gradient descent and per-coordinate
/// gains. `observer` (optional) sees every iteration before its update.
TsneResult tsne_embed(const Grid& embeddings, const TsneConfig& cfg,
                      const std::function<void(const IterationView&)>& observer = {});

/// CSV with header `x,y,class_label`.
void write_points_csv(const std::filesystem::path& path, const Grid& layout, std::span<const std::string> labels);

/// Scatter plot, one fill colour per distinct label.
void write_points_svg(const std::filesystem::path& path, const Grid& layout, std::span<const std::string> labels);

}  // namespace protoaudio::tsne
