#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "protoaudio/error.hpp"
#include "protoaudio/rng.hpp"
#include "protoaudio/stats.hpp"

using namespace protoaudio;
using namespace protoaudio::stats;

namespace {

std::vector<double> normals(std::size_t n, double mean, double sd, std::uint64_t seed) {
  SplitMix64 gen(seed);
  std::vector<double> v(n);
  for (double& x : v) x = mean + sd * standard_normal(gen);
  return v;
}

double quantile_oracle(double p, double df) {
  double lo = -100, hi = 100;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (oracle::t_cdf_integral(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("summaries") {
  const std::vector<double> one{5.0};
  const Summary s1 = summarize(one);
  CHECK(s1.mean == 5.0);
  CHECK_FALSE(s1.std_error.has_value());

  const std::vector<double> two{1.0, 3.0};
  const Summary s2 = summarize(two);
  CHECK(s2.mean == 2.0);
  CHECK(*s2.std_dev == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(*s2.std_error == doctest::Approx(1.0).epsilon(1e-15));

  const auto v = normals(1000, 70.0, 12.0, 1);
  double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const Summary s = summarize(v);
  CHECK(std::abs(s.mean - mean) <= 1e-12);
  CHECK(std::abs(*s.std_dev - std::sqrt(ss / (v.size() - 1))) <= 1e-12);
  CHECK_THROWS_AS(summarize(std::vector<double>{}), Error);
}

TEST_CASE("distribution functions") {
  // Frozen reference values (scipy 1.15).
  CHECK(regularized_incomplete_beta(2.5, 3.5, 0.3) == doctest::Approx(0.29675298929566646).epsilon(1e-12));
  CHECK(regularized_incomplete_beta(0.5, 10, 0.01) == doctest::Approx(0.3420718248432154).epsilon(1e-12));
  CHECK(student_t_cdf(0.5, 3) == doctest::Approx(0.6742760175759246).epsilon(1e-12));
  CHECK(student_t_cdf(-2.1, 7) == doctest::Approx(0.0369355981064613).epsilon(1e-12));
  CHECK(student_t_cdf(1.7, 30) == doctest::Approx(0.9502610622057416).epsilon(1e-12));
  CHECK(student_t_cdf(3.3, 2) == doctest::Approx(0.959576153098166).epsilon(1e-12));
  CHECK(student_t_cdf(-0.2, 1) == doctest::Approx(0.43716704181099886).epsilon(1e-12));
  CHECK(student_t_quantile(0.95, 1198) == doctest::Approx(1.646126544573367).epsilon(1e-10));
  CHECK(student_t_quantile(0.95, 5) == doctest::Approx(2.0150483733330233).epsilon(1e-10));
  CHECK(student_t_quantile(0.975, 10) == doctest::Approx(2.2281388519649385).epsilon(1e-10));
  CHECK(normal_cdf(0.0) == 0.5);

  SplitMix64 gen(2);
  for (int i = 0; i < 50; ++i) {
    const double t = 8 * uniform01(gen) - 4;
    const double df = 1 + 40 * uniform01(gen);
    CHECK(std::abs(student_t_cdf(t, df) - oracle::t_cdf_integral(t, df)) < 1e-9);
  }
}

TEST_CASE("paired t-test") {
  const std::vector<double> a{1, 2, 1, 2}, b{2, 1, 2, 1};
  const auto sym = paired_t_test(a, b);
  CHECK(sym.statistic == 0.0);
  CHECK(sym.p_value == doctest::Approx(1.0));
  const std::vector<double> c{3, 4, 5, 6}, d{1, 2, 3, 4};
  CHECK_THROWS_AS(paired_t_test(c, d), Error);

  const std::vector<double> x{71.2, 65.4, 80.1, 77.7, 69.9, 74.3, 68.8, 79.5, 72.0, 70.6};
  const std::vector<double> y{70.1, 66.9, 78.4, 75.2, 71.3, 72.8, 66.1, 77.9, 72.5, 69.0};
  const auto r = paired_t_test(x, y);
  CHECK(r.statistic == doctest::Approx(1.9335411141463075).epsilon(1e-10));
  CHECK(std::abs(r.p_value - 0.0851874108626523) < 1e-6);
  CHECK(std::abs(r.p_value - 2 * (1 - oracle::t_cdf_integral(std::abs(r.statistic), 9))) < 1e-6);
  const auto flipped = paired_t_test(y, x);
  CHECK(flipped.statistic == -r.statistic);
  CHECK(flipped.p_value == r.p_value);

  SplitMix64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto u = normals(10, 0, 1, gen()), v = normals(10, 0.3, 1, gen());
    const auto res = paired_t_test(u, v);
    CHECK(std::abs(res.p_value - 2 * (1 - oracle::t_cdf_integral(std::abs(res.statistic), 9))) < 1e-6);
  }
}

TEST_CASE("wilcoxon signed-rank") {
  const std::vector<double> up{1, 0}, down{0, 1};
  CHECK(wilcoxon_signed_rank(up, down).p_value == 1.0);

  const std::vector<double> four_a{80, 75, 90, 70}, four_b{70, 72, 85, 60};
  const auto four = wilcoxon_signed_rank(four_a, four_b);
  CHECK(four.exact);
  CHECK(four.p_value == 0.125);

  SplitMix64 gen(4);
  for (std::size_t n = 1; n <= 12; ++n)
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> a(n), b(n, 0.0), d(n);
      for (std::size_t i = 0; i < n; ++i) {
        // Small integers so ties and zeros occur.
        a[i] = static_cast<double>(uniform_index(gen, 9)) - 3.0;
        d[i] = a[i];
      }
      if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) continue;
      CHECK(wilcoxon_signed_rank(a, b).p_value == doctest::Approx(oracle::wilcoxon_enumerate(d)).epsilon(1e-12));
    }

  const std::vector<double> big{1.5, -2.0, 3.0, 3.0, 0.5, -0.5, 4.0, 2.0, -1.0, 6.0,
                                2.5, 1.5, -3.5, 5.0, 0.75, 2.0, -0.25, 1.0, 4.5, 3.25};
  const auto approx = wilcoxon_signed_rank(big, std::vector<double>(20, 0.0));
  CHECK_FALSE(approx.exact);
  CHECK(approx.statistic == 35.0);
  CHECK(approx.p_value == doctest::Approx(0.00941979518229564).epsilon(1e-9));
}

TEST_CASE("tost") {
  const std::vector<double> flat(30, 80.0);
  for (double margin : {0.1, 15.0}) {
    const auto r = tost_equivalence(flat, flat, margin);
    CHECK(r.mean_diff == 0.0);
    CHECK(r.ci_low == 0.0);
    CHECK(r.ci_high == 0.0);
    CHECK(r.verdict == Verdict::kEquivalent);
  }

  const auto a = normals(60, 90.0, 6.0, 5), b = normals(80, 70.0, 6.0, 6);
  const auto r = tost_equivalence(a, b, 15.0);
  const Summary sa = summarize(a), sb = summarize(b);
  const double sp2 = ((59 * *sa.std_dev * *sa.std_dev) + (79 * *sb.std_dev * *sb.std_dev)) / 138.0;
  const double se = std::sqrt(sp2 * (1.0 / 60 + 1.0 / 80));
  const double t = quantile_oracle(0.95, 138);
  CHECK(r.ci_low == doctest::Approx(sa.mean - sb.mean - t * se).epsilon(1e-8));
  CHECK(r.ci_high == doctest::Approx(sa.mean - sb.mean + t * se).epsilon(1e-8));
  CHECK(r.ci_high > 15.0);
  CHECK(r.verdict == Verdict::kNotEquivalent);

  // Monotone in the margin.
  const auto c = normals(100, 70.0, 10.0, 7), d = normals(300, 72.0, 10.0, 8);
  bool seen = false;
  for (double m = 0.5; m < 10; m += 0.25) {
    const bool eq = tost_equivalence(c, d, m).verdict == Verdict::kEquivalent;
    if (seen) CHECK(eq);
    seen = seen || eq;
  }
  CHECK(seen);
}

TEST_CASE("bootstrap") {
  const std::vector<double> a(20, 3.0), b(30, 1.0);
  const auto flat = bootstrap_equivalence(a, b, 5.0, 1000, 0.9, 1);
  CHECK(flat.ci_low == 2.0);
  CHECK(flat.ci_high == 2.0);

  const auto x = normals(400, 72, 12, 10), y = normals(1200, 78, 12, 11);
  const auto r1 = bootstrap_equivalence(x, y, 15, 10000, 0.9, 99);
  const auto r2 = bootstrap_equivalence(x, y, 15, 10000, 0.9, 99);
  CHECK(r1.ci_low == r2.ci_low);
  CHECK(r1.ci_high == r2.ci_high);
  const auto tost = tost_equivalence(x, y, 15);
  CHECK(std::abs(r1.ci_low - tost.ci_low) < 0.5);
  CHECK(std::abs(r1.ci_high - tost.ci_high) < 0.5);

  const auto small = bootstrap_equivalence(normals(50, 0, 1, 12), normals(50, 0, 1, 13), 1, 4000, 0.9, 3);
  const auto large = bootstrap_equivalence(normals(200, 0, 1, 14), normals(200, 0, 1, 15), 1, 4000, 0.9, 3);
  const double ratio = (small.ci_high - small.ci_low) / (large.ci_high - large.ci_low);
  CHECK(ratio >= 1.6);
  CHECK(ratio <= 2.4);
  CHECK_THROWS_AS(bootstrap_equivalence(x, y, 15, 999), Error);
}

TEST_CASE("percentiles and csv") {
  const std::vector<double> s{1, 2, 3, 4};
  CHECK(percentile_sorted(s, 0.0) == 1.0);
  CHECK(percentile_sorted(s, 1.0) == 4.0);
  CHECK(percentile_sorted(s, 0.5) == 2.5);

  const auto dir = oracle::fresh_dir("csv");
  const std::vector<double> values{60.0, 1.0 / 3.0, 100.0, 0.1};
  write_accuracy_csv(dir / "a.csv", values);
  CHECK(read_accuracy_csv(dir / "a.csv") == values);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(15.0) == "15");
}
