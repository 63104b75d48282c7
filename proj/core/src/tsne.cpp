#include "protoaudio/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "protoaudio/error.hpp"
#include "protoaudio/rng.hpp"
#include "protoaudio/stats.hpp"

namespace protoaudio::tsne {

void TsneConfig::validate(std::size_t points) const {
  if (points < 5) fail(ErrorCode::kInvalidArgument, "points", "t-SNE needs at least 5 points");
  if (!(perplexity > 0.0) || !(perplexity < (static_cast<double>(points) - 1.0) / 3.0))
    fail(ErrorCode::kInvalidArgument, "perplexity",
         "perplexity must be below (points - 1) / 3 = " + std::to_string((static_cast<double>(points) - 1.0) / 3.0));
  if (iterations < 1) fail(ErrorCode::kInvalidArgument, "iterations", "at least one iteration required");
  if (!(learning_rate > 0.0)) fail(ErrorCode::kInvalidArgument, "learning_rate", "learning rate must be positive");
}

Grid pairwise_sq_distances(const Grid& points) {
  const std::size_t m = points.rows;
  Grid d(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < points.cols; ++k) {
        const double diff = points(i, k) - points(j, k);
        acc += diff * diff;
      }
      d(i, j) = d(j, i) = acc;
    }
  return d;
}

Grid calibrate_perplexity(const Grid& sq_distances, double perplexity) {
  const std::size_t m = sq_distances.rows;
  if (sq_distances.cols != m || m < 2) fail(ErrorCode::kShapeMismatch, "distances", "distance grid must be square, size >= 2");
  for (std::size_t i = 0; i < m; ++i)
    if (sq_distances(i, i) != 0.0) fail(ErrorCode::kInvalidArgument, "distances", "distance grid diagonal must be zero");
  if (!(perplexity >= 1.0) || perplexity > static_cast<double>(m - 1))
    fail(ErrorCode::kInvalidArgument, "perplexity",
         "perplexity " + std::to_string(perplexity) + " infeasible for " + std::to_string(m) + " points");

  const double target = std::log2(perplexity);
  Grid p(m, m);
  std::vector<double> row(m);
  for (std::size_t i = 0; i < m; ++i) {
    // Distances are shifted by the row minimum so exp() never underflows the
    // nearest neighbour; the shift cancels in the normalization.
    double d_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) d_min = std::min(d_min, sq_distances(i, j));

    double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 50; ++step) {
      double z = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == i) {
          row[j] = 0.0;
          continue;
        }
        const double shifted = sq_distances(i, j) - d_min;
        row[j] = std::exp(-beta * shifted);
        z += row[j];
        weighted += shifted * row[j];
      }
      // H (nats) = log Z + beta * E[d]; converted to bits.
      const double entropy_bits = (std::log(z) + beta * weighted / z) / std::log(2.0);
      for (std::size_t j = 0; j < m; ++j) row[j] /= z;
      const double gap = entropy_bits - target;
      if (std::abs(gap) < 1e-5) break;
      if (gap > 0.0) {
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
      } else {
        beta_hi = beta;
        beta = 0.5 * (beta + beta_lo);
      }
    }
    std::copy(row.begin(), row.end(), p.row(i).begin());
  }
  return p;
}

Grid symmetrize(const Grid& conditional) {
  const std::size_t m = conditional.rows;
  Grid p(m, m);
  const double scale = 1.0 / (2.0 * static_cast<double>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) p(i, j) = (conditional(i, j) + conditional(j, i)) * scale;
  return p;
}

namespace {

// Unnormalized kernel (1 + |yi - yj|^2)^-1 and its total.
double student_kernel(const Grid& layout, Grid& kernel) {
  const std::size_t m = layout.rows;
  kernel = Grid(m, m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < layout.cols; ++k) {
        const double diff = layout(i, k) - layout(j, k);
        d2 += diff * diff;
      }
      const double v = 1.0 / (1.0 + d2);
      kernel(i, j) = kernel(j, i) = v;
      total += 2.0 * v;
    }
  return total;
}

Grid gradient_from(const Grid& p, const Grid& kernel, double total, const Grid& layout) {
  const std::size_t m = layout.rows;
  Grid grad(m, layout.cols);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const double coeff = 4.0 * (p(i, j) - kernel(i, j) / total) * kernel(i, j);
      for (std::size_t k = 0; k < layout.cols; ++k) grad(i, k) += coeff * (layout(i, k) - layout(j, k));
    }
  return grad;
}

double kl_from(const Grid& p, const Grid& kernel, double total) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.data.size(); ++i)
    if (p.data[i] > 0.0) kl += p.data[i] * std::log(p.data[i] / (kernel.data[i] / total));
  return kl;
}

}  // namespace

Grid student_affinities(const Grid& layout) {
  Grid kernel;
  const double total = student_kernel(layout, kernel);
  for (double& v : kernel.data) v /= total;
  return kernel;
}

double kl_divergence(const Grid& p, const Grid& layout) {
  Grid kernel;
  const double total = student_kernel(layout, kernel);
  return kl_from(p, kernel, total);
}

Grid kl_gradient(const Grid& p, const Grid& layout) {
  Grid kernel;
  const double total = student_kernel(layout, kernel);
  return gradient_from(p, kernel, total, layout);
}

TsneResult tsne_embed(const Grid& embeddings, const TsneConfig& cfg,
                      const std::function<void(const IterationView&)>& observer) {
  const std::size_t m = embeddings.rows;
  cfg.validate(m);
  const Grid p = symmetrize(calibrate_perplexity(pairwise_sq_distances(embeddings), cfg.perplexity));
  Grid p_exaggerated = p;
  for (double& v : p_exaggerated.data) v *= cfg.early_exaggeration;

  SplitMix64 gen(mix_seed(cfg.seed, 0x75E));
  TsneResult result;
  Grid& y = result.layout;
  y = Grid(m, 2);
  for (double& v : y.data) v = 1e-4 * standard_normal(gen);
  Grid velocity(m, 2), gains(m, 2, 1.0);
  Grid kernel;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Grid& p_use = it < cfg.exaggeration_iterations ? p_exaggerated : p;
    const double total = student_kernel(y, kernel);
    result.kl.push_back(kl_from(p, kernel, total));
    if (observer) {
      Grid q = kernel;
      for (double& v : q.data) v /= total;
      observer(IterationView{it, p_use, q, y});
    }
    const Grid grad = gradient_from(p_use, kernel, total, y);
    const double momentum = it < cfg.momentum_switch ? cfg.initial_momentum : cfg.final_momentum;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      // Gains grow when the step and gradient disagree in sign.
      const bool same_sign = (grad.data[i] > 0.0) == (velocity.data[i] > 0.0);
      gains.data[i] = same_sign ? std::max(0.01, gains.data[i] * 0.8) : gains.data[i] + 0.2;
      velocity.data[i] = momentum * velocity.data[i] - cfg.learning_rate * gains.data[i] * grad.data[i];
      y.data[i] += velocity.data[i];
    }
    for (std::size_t k = 0; k < 2; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < m; ++i) mean += y(i, k);
      mean /= static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) y(i, k) -= mean;
    }
  }
  return result;
}

void write_points_csv(const std::filesystem::path& path, const Grid& layout, std::span<const std::string> labels) {
  if (labels.size() != layout.rows) fail(ErrorCode::kShapeMismatch, "labels", "one label per point required");
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, path.string(), "cannot write " + path.string());
  out << "x,y,class_label\n";
  for (std::size_t i = 0; i < layout.rows; ++i)
    out << stats::format_double(layout(i, 0)) << ',' << stats::format_double(layout(i, 1)) << ',' << labels[i] << '\n';
}

void write_points_svg(const std::filesystem::path& path, const Grid& layout, std::span<const std::string> labels) {
  if (labels.size() != layout.rows) fail(ErrorCode::kShapeMismatch, "labels", "one label per point required");
  static constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                             "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::vector<std::string> distinct;
  for (const auto& l : labels)
    if (std::find(distinct.begin(), distinct.end(), l) == distinct.end()) distinct.push_back(l);

  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (layout.rows > 0) {
    x_lo = x_hi = layout(0, 0);
    y_lo = y_hi = layout(0, 1);
    for (std::size_t i = 0; i < layout.rows; ++i) {
      x_lo = std::min(x_lo, layout(i, 0));
      x_hi = std::max(x_hi, layout(i, 0));
      y_lo = std::min(y_lo, layout(i, 1));
      y_hi = std::max(y_hi, layout(i, 1));
    }
  }
  const double size = 480.0, margin = 20.0;
  auto sx = [&](double v) { return margin + (x_hi > x_lo ? (v - x_lo) / (x_hi - x_lo) : 0.5) * size; };
  auto sy = [&](double v) { return margin + (y_hi > y_lo ? (y_hi - v) / (y_hi - y_lo) : 0.5) * size; };

  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, path.string(), "cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"520\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  char buf[160];
  for (std::size_t i = 0; i < layout.rows; ++i) {
    const auto c = static_cast<std::size_t>(std::find(distinct.begin(), distinct.end(), labels[i]) - distinct.begin());
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"%s\"/>\n", sx(layout(i, 0)),
                  sy(layout(i, 1)), kPalette[c % std::size(kPalette)]);
    out << buf;
  }
  for (std::size_t c = 0; c < distinct.size(); ++c) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"530\" cy=\"%zu\" r=\"5\" fill=\"%s\"/>", 30 + 20 * c,
                  kPalette[c % std::size(kPalette)]);
    out << buf << "<text x=\"542\" y=\"" << 35 + 20 * c << "\" font-size=\"12\">" << distinct[c] << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace protoaudio::tsne
