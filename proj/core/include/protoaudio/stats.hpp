#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace protoaudio::stats {

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> std_dev;    // sample (n - 1), absent for n = 1
  std::optional<double> std_error;  // std_dev / sqrt(n), absent for n = 1
};

/// Throws Error(kInvalidArgument) on an empty input.
Summary summarize(std::span<const double> values);

/// I_x(a, b) by Lentz's continued fraction, accurate to ~1e-12.
double regularized_incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);
/// Inverse of student_t_cdf for p in (0, 1).
double student_t_quantile(double p, double df);
double normal_cdf(double z);

struct PairedTestResult {
  double statistic = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t n = 0;     // pairs used (non-zero differences for Wilcoxon)
  bool exact = false;
};

/// t = mean(d) / (sd(d) / sqrt(n)) with d = a - b and n - 1 degrees of freedom.
PairedTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Zero differences are dropped and ties receive mid-ranks. The statistic is
/// min(W+, W-). For n <= 12 the p-value is exact over all 2^n sign flips;
/// otherwise a tie-corrected normal approximation with continuity correction.
PairedTestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

enum class Verdict { kEquivalent, kNotEquivalent };
const char* to_string(Verdict v);

/// Equivalence summary for the difference mean(a) - mean(b), in the units of
/// the inputs (accuracy percentage points throughout this project).
struct EquivalenceReport {
  std::string method;  // "tost" or "bootstrap"
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double mean_diff = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double confidence = 0.90;
  double margin = 0.0;
  Verdict verdict = Verdict::kNotEquivalent;
  // TOST only: the two one-sided p-values against -margin and +margin.
  std::optional<double> p_lower;
  std::optional<double> p_upper;
  std::optional<double> std_error;
  std::optional<double> df;
  // Bootstrap only.
  std::optional<std::size_t> resamples;
  std::optional<std::uint64_t> seed;
};

/// Equivalent iff margin >= 0 and [ci_low, ci_high] lies inside [-margin, margin].
Verdict equivalence_verdict(double ci_low, double ci_high, double margin);

/// Unpaired pooled-variance design: SE = sp * sqrt(1/n_a + 1/n_b),
/// df = n_a + n_b - 2, CI = diff +- t((1 + confidence) / 2, df) * SE.
EquivalenceReport tost_equivalence(std::span<const double> a, std::span<const double> b, double margin,
                                   double confidence = 0.90);

/// Percentile bootstrap of mean(a*) - mean(b*), each side resampled with
/// replacement at its own size. Iteration i draws from mix_seed(seed, i).
EquivalenceReport bootstrap_equivalence(std::span<const double> a, std::span<const double> b, double margin,
                                        std::size_t resamples = 10000, double confidence = 0.90,
                                        std::uint64_t seed = 0);

/// Linear-interpolation quantile of sorted data at position q * (n - 1).
double percentile_sorted(std::span<const double> sorted, double q);

/// Per-episode accuracy CSV: header `accuracy_pct`, then one value per line.
void write_accuracy_csv(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_accuracy_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal text for `v`.
std::string format_double(double v);

}  // namespace protoaudio::stats
