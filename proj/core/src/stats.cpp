#include "protoaudio/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "protoaudio/error.hpp"
#include "protoaudio/rng.hpp"

namespace protoaudio::stats {
namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sum_sq_dev(std::span<const double> v, double mean) {
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc;
}

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

void require_pairs(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    fail(ErrorCode::kInvalidArgument, "b",
         "paired samples differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

}  // namespace

Summary summarize(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::kInvalidArgument, "values", "summarize needs at least one value");
  // Welford's single-pass update.
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double x : values) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  Summary s;
  s.n = n;
  s.mean = mean;
  if (n >= 2) {
    s.std_dev = std::sqrt(m2 / static_cast<double>(n - 1));
    s.std_error = *s.std_dev / std::sqrt(static_cast<double>(n));
  }
  return s;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) fail(ErrorCode::kInvalidArgument, "a", "beta parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) fail(ErrorCode::kInvalidArgument, "df", "degrees of freedom must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::kInvalidArgument, "p", "quantile level must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  double lo = -1.0, hi = 1.0;
  while (student_t_cdf(lo, df) > p) lo *= 2.0;
  while (student_t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

PairedTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  require_pairs(a, b);
  if (a.size() < 2) fail(ErrorCode::kInvalidArgument, "a", "paired t-test needs at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  const double n = static_cast<double>(d.size());
  const double mean = mean_of(d);
  const double var = sum_sq_dev(d, mean) / (n - 1.0);
  if (!(var > 0.0)) fail(ErrorCode::kDegenerateData, "differences", "paired differences have zero variance");
  PairedTestResult r;
  r.n = d.size();
  r.statistic = mean / (std::sqrt(var) / std::sqrt(n));
  r.p_value = std::min(1.0, 2.0 * student_t_cdf(-std::abs(r.statistic), n - 1.0));
  r.exact = true;
  return r;
}

PairedTestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  require_pairs(a, b);
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  if (d.empty()) fail(ErrorCode::kDegenerateData, "differences", "all paired differences are zero");
  const std::size_t n = d.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  std::vector<double> rank(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  double w_plus = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank[i];
    if (d[i] > 0) w_plus += rank[i];
  }
  const double w = std::min(w_plus, total - w_plus);

  PairedTestResult r;
  r.n = n;
  r.statistic = w;
  if (n <= 12) {
    // Mid-ranks are multiples of 0.5, so a half-unit slack compares exactly.
    std::size_t extreme = 0;
    const std::size_t masks = std::size_t{1} << n;
    for (std::size_t mask = 0; mask < masks; ++mask) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (std::size_t{1} << i)) s += rank[i];
      if (std::min(s, total - s) <= w + 0.25) ++extreme;
    }
    r.p_value = static_cast<double>(extreme) / static_cast<double>(masks);
    r.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double z = std::max(0.0, std::abs(w - mu) - 0.5) / std::sqrt(var);
    r.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(z)));
  }
  return r;
}

const char* to_string(Verdict v) { return v == Verdict::kEquivalent ? "equivalent" : "not-equivalent"; }

Verdict equivalence_verdict(double ci_low, double ci_high, double margin) {
  return (margin >= 0.0 && ci_low >= -margin && ci_high <= margin) ? Verdict::kEquivalent : Verdict::kNotEquivalent;
}

EquivalenceReport tost_equivalence(std::span<const double> a, std::span<const double> b, double margin,
                                   double confidence) {
  if (a.size() < 2 || b.size() < 2) fail(ErrorCode::kInvalidArgument, "samples", "TOST needs at least 2 values per sample");
  if (!(margin > 0.0)) fail(ErrorCode::kInvalidArgument, "margin", "equivalence margin must be positive");
  if (!(confidence > 0.0 && confidence < 1.0)) fail(ErrorCode::kInvalidArgument, "confidence", "confidence must lie in (0, 1)");

  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  EquivalenceReport r;
  r.method = "tost";
  r.n_a = a.size();
  r.n_b = b.size();
  r.mean_a = mean_of(a);
  r.mean_b = mean_of(b);
  r.mean_diff = r.mean_a - r.mean_b;
  const double df = na + nb - 2.0;
  const double pooled_var = (sum_sq_dev(a, r.mean_a) + sum_sq_dev(b, r.mean_b)) / df;
  const double se = std::sqrt(pooled_var) * std::sqrt(1.0 / na + 1.0 / nb);
  const double t_crit = student_t_quantile(0.5 + confidence / 2.0, df);
  r.ci_low = r.mean_diff - t_crit * se;
  r.ci_high = r.mean_diff + t_crit * se;
  r.confidence = confidence;
  r.margin = margin;
  r.verdict = equivalence_verdict(r.ci_low, r.ci_high, margin);
  r.std_error = se;
  r.df = df;
  if (se > 0.0) {
    r.p_lower = 1.0 - student_t_cdf((r.mean_diff + margin) / se, df);
    r.p_upper = student_t_cdf((r.mean_diff - margin) / se, df);
  } else {
    r.p_lower = r.mean_diff > -margin ? 0.0 : 1.0;
    r.p_upper = r.mean_diff < margin ? 0.0 : 1.0;
  }
  return r;
}

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(ErrorCode::kInvalidArgument, "values", "percentile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

EquivalenceReport bootstrap_equivalence(std::span<const double> a, std::span<const double> b, double margin,
                                        std::size_t resamples, double confidence, std::uint64_t seed) {
  if (a.empty() || b.empty()) fail(ErrorCode::kInvalidArgument, "samples", "bootstrap needs non-empty samples");
  if (resamples < 1000) fail(ErrorCode::kInvalidArgument, "resamples", "at least 1000 resamples required");
  if (!(confidence > 0.0 && confidence < 1.0)) fail(ErrorCode::kInvalidArgument, "confidence", "confidence must lie in (0, 1)");

  std::vector<double> diffs(resamples);
  for (std::size_t it = 0; it < resamples; ++it) {
    SplitMix64 gen(mix_seed(seed, it));
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sa += a[uniform_index(gen, a.size())];
    for (std::size_t i = 0; i < b.size(); ++i) sb += b[uniform_index(gen, b.size())];
    diffs[it] = sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
  }
  std::sort(diffs.begin(), diffs.end());

  EquivalenceReport r;
  r.method = "bootstrap";
  r.n_a = a.size();
  r.n_b = b.size();
  r.mean_a = mean_of(a);
  r.mean_b = mean_of(b);
  r.mean_diff = r.mean_a - r.mean_b;
  r.ci_low = percentile_sorted(diffs, 0.5 - confidence / 2.0);
  r.ci_high = percentile_sorted(diffs, 0.5 + confidence / 2.0);
  r.confidence = confidence;
  r.margin = margin;
  r.verdict = equivalence_verdict(r.ci_low, r.ci_high, margin);
  r.resamples = resamples;
  r.seed = seed;
  return r;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_accuracy_csv(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, path.string(), "cannot write " + path.string());
  out << "accuracy_pct\n";
  for (double v : values) out << format_double(v) << '\n';
}

std::vector<double> read_accuracy_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingFile, path.string(), "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kMalformedHeader, "accuracy_pct", path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "accuracy_pct") fail(ErrorCode::kMalformedHeader, "accuracy_pct", path.string() + ": expected header accuracy_pct");
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v = 0.0;
    const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc() || res.ptr != line.data() + line.size() || !std::isfinite(v))
      fail(ErrorCode::kMalformedHeader, "line " + std::to_string(line_no),
           path.string() + ":" + std::to_string(line_no) + ": not a number: " + line);
    values.push_back(v);
  }
  return values;
}

}  // namespace protoaudio::stats
