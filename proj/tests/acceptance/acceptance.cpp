// Acceptance suite: one PASS/FAIL line per criterion. Usage: acceptance [cli]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "protoaudio/audio_io.hpp"
#include "protoaudio/backbone.hpp"
#include "protoaudio/dataset.hpp"
#include "protoaudio/error.hpp"
#include "protoaudio/features.hpp"
#include "protoaudio/fewshot.hpp"
#include "protoaudio/stats.hpp"
#include "protoaudio/synth.hpp"
#include "protoaudio/tsne.hpp"

using namespace protoaudio;
using ad::Tensor;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << ": " << detail << std::endl;
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

void gradient_correctness() {
  const auto t0 = Clock::now();
  double worst_op = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitMix64 gen(seed);
    const Tensor a = gradcheck::random_tensor({4}, gen), b = gradcheck::random_tensor({4}, gen);
    const Tensor img = gradcheck::random_tensor({2, 2, 4, 4}, gen);
    const Tensor w = gradcheck::random_tensor({3, 2, 3, 3}, gen), bias = gradcheck::random_tensor({3}, gen);
    const Tensor x = gradcheck::random_tensor({2, 5}, gen), lw = gradcheck::random_tensor({3, 5}, gen);
    const auto ws = [&](const Tensor& t) { return gradcheck::weighted_sum(t, seed + 7); };
    const std::vector<std::pair<gradcheck::Builder, std::vector<Tensor>>> cases = {
        {[&](const auto& t) { return ws(ad::add(t[0], t[1])); }, {a, b}},
        {[&](const auto& t) { return ws(ad::mul(t[0], t[1])); }, {a, b}},
        {[&](const auto& t) { return ad::sum(t[0]); }, {a}},
        {[&](const auto& t) { return ws(ad::relu(t[0])); }, {a}},
        {[&](const auto& t) { return ws(ad::conv2d(t[0], t[1], t[2], 1, 1)); }, {img, w, bias}},
        {[&](const auto& t) { return ws(ad::maxpool2(t[0])); }, {img}},
        {[&](const auto& t) { return ws(ad::global_avg_pool(t[0])); }, {img}},
        {[&](const auto& t) { return ws(ad::linear(t[0], t[1], t[2])); }, {x, lw, bias}},
    };
    for (const auto& [build, inputs] : cases) worst_op = std::max(worst_op, gradcheck::max_error(build, inputs));
  }

  // Full backbone + prototypical loss on 64x64 inputs: directional derivative
  // along a random unit direction plus 24 random coordinates. A stencil whose
  // one-sided differences disagree straddles a relu/maxpool switch and is
  // redrawn.
  constexpr double h = 1e-6;
  std::size_t redrawn = 0;
  BackboneConfig cfg;
  cfg.input_height = 64;
  cfg.input_width = 64;
  const std::vector<std::size_t> support_labels{0, 1, 2}, query_labels{0, 1, 2};
  double worst_full = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitMix64 gen(mix_seed(99, seed));
    const ParamSet base = init_params(cfg, seed);
    ParamSet biased = base.clone();
    for (const auto& e : biased.entries())
      if (e.name.ends_with(".bias"))
        for (double& v : e.tensor.node()->data) v = 0.05 * standard_normal(gen);
    const Tensor support = gradcheck::random_tensor({3, 1, 64, 64}, gen);
    const Tensor query = gradcheck::random_tensor({3, 1, 64, 64}, gen);
    const auto loss_of = [&](const ParamSet& p) {
      const Tensor protos = compute_prototypes(embed(support, p, cfg), support_labels, 3);
      return episode_loss(classify_queries(embed(query, p, cfg), protos).logits, query_labels);
    };

    ParamSet live = biased.clone();
    for (const auto& e : live.entries()) e.tensor.node()->requires_grad = true;
    ad::backward(loss_of(live));

    std::vector<double> flat, grad;
    for (const auto& e : live.entries()) {
      flat.insert(flat.end(), e.tensor.data().begin(), e.tensor.data().end());
      grad.insert(grad.end(), e.tensor.grad().begin(), e.tensor.grad().end());
    }
    const auto eval_flat = [&](const std::vector<double>& values) {
      ad::NoGradGuard guard;
      ParamSet p = biased.clone();
      std::size_t off = 0;
      for (const auto& e : p.entries()) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), e.tensor.size(), e.tensor.node()->data.begin());
        off += e.tensor.size();
      }
      return loss_of(p).item();
    };

    const double f0 = eval_flat(flat);
    // Central difference along `dir`, or nullopt when the stencil crosses a kink.
    const auto probe = [&](const std::vector<double>& dir) -> std::optional<double> {
      std::vector<double> up = flat, down = flat;
      for (std::size_t i = 0; i < flat.size(); ++i) {
        up[i] += h * dir[i];
        down[i] -= h * dir[i];
      }
      const double fu = eval_flat(up), fd = eval_flat(down);
      const double forward = (fu - f0) / h, backward = (f0 - fd) / h, central = (fu - fd) / (2 * h);
      if (std::abs(forward - backward) > 1e-4 * std::abs(central) + 1e-8) {
        ++redrawn;
        return std::nullopt;
      }
      return central;
    };

    for (;;) {
      std::vector<double> dir(flat.size());
      double norm = 0;
      for (double& v : dir) {
        v = standard_normal(gen);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      double analytic = 0;
      for (std::size_t i = 0; i < flat.size(); ++i) {
        dir[i] /= norm;
        analytic += grad[i] * dir[i];
      }
      const auto numeric = probe(dir);
      if (!numeric) continue;
      worst_full = std::max(worst_full, std::abs(analytic - *numeric) / std::max(std::abs(analytic), std::abs(*numeric)));
      break;
    }

    std::vector<double> a_sub, n_sub;
    while (a_sub.size() < 24) {
      const std::size_t i = uniform_index(gen, flat.size());
      std::vector<double> unit(flat.size(), 0.0);
      unit[i] = 1.0;
      const auto numeric = probe(unit);
      if (!numeric) continue;
      a_sub.push_back(grad[i]);
      n_sub.push_back(*numeric);
    }
    worst_full = std::max(worst_full, oracle::relative_error(a_sub, n_sub));
  }
  const double elapsed = seconds_since(t0);
  report("1 gradient correctness", worst_op < 1e-4 && worst_full < 1e-4 && elapsed < 60.0,
         "max rel err ops " + num(worst_op) + ", backbone+loss 64x64 " + num(worst_full) + " over 20 seeds (< 1e-4, " +
             std::to_string(redrawn) + " kink-straddling stencils redrawn); " +
             num(elapsed, 3) + " s (< 60 s)");
}

// ---------------------------------------------------------------------------

void prototype_oracles() {
  SplitMix64 gen(2);
  double worst_mean = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + uniform_index(gen, 4), k = 1 + uniform_index(gen, 15), d = 1 + uniform_index(gen, 64);
    const Tensor s = gradcheck::random_tensor({n * k, d}, gen, 10.0);
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < n; ++c) labels.insert(labels.end(), k, c);
    std::shuffle(labels.begin(), labels.end(), gen);
    const Tensor p = compute_prototypes(s, labels, n);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0;
        for (std::size_t i = 0; i < n * k; ++i)
          if (labels[i] == c) acc += s.data()[i * d + j];
        worst_mean = std::max(worst_mean, std::abs(p.data()[c * d + j] - acc / static_cast<double>(k)));
      }
  }

  const auto nearest = [](const Tensor& q, const Tensor& p, std::size_t i) {
    const std::size_t d = q.dim(1);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < p.dim(0); ++c) {
      double dist = 0;
      for (std::size_t j = 0; j < d; ++j) dist += std::pow(q.data()[i * d + j] - p.data()[c * d + j], 2);
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    return best;
  };
  std::size_t mismatched = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + uniform_index(gen, 20), n = 2 + uniform_index(gen, 4), d = 1 + uniform_index(gen, 16);
    const Tensor q = gradcheck::random_tensor({m, d}, gen), p = gradcheck::random_tensor({n, d}, gen);
    const auto pred = classify_queries(q, p).predictions;
    for (std::size_t i = 0; i < m; ++i) mismatched += pred[i] != nearest(q, p, i);
  }

  std::size_t nn_mismatched = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + uniform_index(gen, 4), d = 1 + uniform_index(gen, 16), m = 10;
    const Tensor support = gradcheck::random_tensor({n, d}, gen), q = gradcheck::random_tensor({m, d}, gen);
    std::vector<std::size_t> labels(n);
    std::iota(labels.begin(), labels.end(), 0);
    std::shuffle(labels.begin(), labels.end(), gen);
    const auto pred = classify_queries(q, compute_prototypes(support, labels, n)).predictions;
    for (std::size_t i = 0; i < m; ++i) nn_mismatched += pred[i] != labels[nearest(q, support, i)];
  }
  report("2 prototype/classification oracles", worst_mean <= 1e-12 && mismatched == 0 && nn_mismatched == 0,
         "prototype max abs err " + num(worst_mean) + " (<= 1e-12), nearest-centroid mismatches " +
             std::to_string(mismatched) + "/1000 instances, K=1 vs 1-NN mismatches " + std::to_string(nn_mismatched));
}

// ---------------------------------------------------------------------------

void wilcoxon_exactness() {
  SplitMix64 gen(3);
  std::size_t cases = 0, mismatched = 0;
  while (cases < 100) {
    const std::size_t n = 1 + uniform_index(gen, 12);
    std::vector<double> a(n), b(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = 50 + static_cast<double>(uniform_index(gen, 21));
      b[i] = 50 + static_cast<double>(uniform_index(gen, 21));
      d[i] = a[i] - b[i];
    }
    if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) continue;
    ++cases;
    const auto r = stats::wilcoxon_signed_rank(a, b);
    if (!r.exact || std::abs(r.p_value - oracle::wilcoxon_enumerate(d)) > 1e-12) ++mismatched;
  }
  // Four K-shot settings where the binary mean beats the multiclass mean.
  const std::vector<double> multi{60.1, 68.4, 71.0, 74.9}, binary{70.2, 77.3, 80.8, 81.6};
  const double p4 = stats::wilcoxon_signed_rank(multi, binary).p_value;
  report("3 wilcoxon exactness", mismatched == 0 && p4 == 0.125,
         std::to_string(mismatched) + "/100 mismatches vs 2^n enumeration (n <= 12); 4 same-signed pairs p = " +
             num(p4) + " (expected 0.125)");
}

// ---------------------------------------------------------------------------

// Two-sided-symmetric samples with the given mean and sample sd.
std::vector<double> spread_sample(std::size_t n, double mean, double sd) {
  const double d = sd * std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n));
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = mean + (i % 2 == 0 ? d : -d);
  return v;
}

double t_quantile_oracle(double p, double df) {
  double lo = 0, hi = 10;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (oracle::t_cdf_integral(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void tost_arithmetic() {
  const std::size_t na = 400, nb = 1200;
  const double half_width = 1.33;
  const double se = half_width / t_quantile_oracle(0.95, static_cast<double>(na + nb - 2));
  const double sd = se / std::sqrt(1.0 / na + 1.0 / nb);
  const auto a = spread_sample(na, 73.22, sd), b = spread_sample(nb, 79.66, sd);
  const auto r15 = stats::tost_equivalence(a, b, 15.0);
  const auto r5 = stats::tost_equivalence(a, b, 5.0);
  const bool bounds = std::abs(r15.ci_low - -7.77) <= 0.01 && std::abs(r15.ci_high - -5.11) <= 0.01;
  const bool pass = bounds && std::abs(r15.mean_diff - -6.44) < 1e-9 && r15.verdict == stats::Verdict::kEquivalent &&
                    r5.verdict == stats::Verdict::kNotEquivalent;
  report("4 TOST arithmetic", pass,
         "diff " + num(r15.mean_diff) + ", 90% CI [" + num(r15.ci_low) + ", " + num(r15.ci_high) +
             "] vs [-7.77, -5.11] (tol 0.01); margin 15 -> " + stats::to_string(r15.verdict) + ", margin 5 -> " +
             stats::to_string(r5.verdict));
}

// ---------------------------------------------------------------------------

void bootstrap_consistency() {
  SplitMix64 gen(5);
  std::vector<double> a(400), b(1200);
  for (double& v : a) v = 73.22 + 14.0 * standard_normal(gen);
  for (double& v : b) v = 79.66 + 14.0 * standard_normal(gen);
  const auto boot = stats::bootstrap_equivalence(a, b, 15.0, 10000, 0.90, 2024);
  const auto again = stats::bootstrap_equivalence(a, b, 15.0, 10000, 0.90, 2024);
  const auto tost = stats::tost_equivalence(a, b, 15.0);
  const double gap = std::max(std::abs(boot.ci_low - tost.ci_low), std::abs(boot.ci_high - tost.ci_high));
  const bool reproducible = boot.ci_low == again.ci_low && boot.ci_high == again.ci_high;
  report("5 bootstrap consistency", gap <= 0.5 && reproducible,
         "bootstrap CI [" + num(boot.ci_low) + ", " + num(boot.ci_high) + "] vs TOST [" + num(tost.ci_low) + ", " +
             num(tost.ci_high) + "], max gap " + num(gap) + " (<= 0.5), reseeded run identical: " +
             (reproducible ? "yes" : "no"));
}

// ---------------------------------------------------------------------------

void synthetic_trend() {
  const auto t0 = Clock::now();
  FeatureParams fp;
  fp.target_height = 64;
  fp.target_width = 64;
  BackboneConfig cfg;
  cfg.input_height = 64;
  cfg.input_width = 64;
  const SplitPool data = synth::generate_dataset(100, 2024);
  const SpectrogramPool train_pool = featurize(data.train, fp);
  const SpectrogramPool test_pool = featurize(data.test, fp);

  const std::vector<std::size_t> ks{1, 5, 15};
  std::vector<std::vector<double>> acc(3);
  int monotone_votes = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (std::size_t k : ks) {
      const EpisodeSpec spec{3, k, 5};
      TrainOptions opts;
      opts.episodes = 300;
      opts.seed = mix_seed(seed, 100 + k);
      const auto trained = train(train_pool, spec, cfg, init_params(cfg, mix_seed(seed, k)), opts);
      acc[seed].push_back(evaluate(test_pool, spec, 100, trained.params, cfg, 777 + k).mean_accuracy);
    }
    const bool mono = acc[seed][0] <= acc[seed][1] && acc[seed][1] <= acc[seed][2];
    monotone_votes += mono;
    detail += "seed " + std::to_string(seed) + ": " + num(acc[seed][0]) + "/" + num(acc[seed][1]) + "/" +
              num(acc[seed][2]) + (mono ? " monotone; " : " not monotone; ");
  }
  double k1 = 0, k15 = 0;
  for (const auto& a : acc) {
    k1 += a[0] / 3;
    k15 += a[2] / 3;
  }
  const double elapsed = seconds_since(t0);
  report("6 synthetic trend", monotone_votes >= 2 && k15 >= 85.0 && elapsed < 1800.0,
         detail + "K=1/5/15 %; monotone in " + std::to_string(monotone_votes) + "/3 seeds (majority), mean K=15 " +
             num(k15) + "% (>= 85), " + num(elapsed, 4) + " s (< 1800 s)");
  report("6b K=15 gain over K=1", k15 - k1 >= 10.0,
         "mean K=15 - K=1 = " + num(k15 - k1) + " points (>= 10, 64x64 proxy of the default config)");
}

// ---------------------------------------------------------------------------

void dsp_properties() {
  const FeatureParams params;
  const auto centers = mel_center_frequencies(params.n_mels, params.f_min, params.f_max);
  int tones_ok = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const std::size_t band = 24 + 5 * i;
    AudioClip c;
    c.samples.resize(22050);
    for (std::size_t n = 0; n < c.samples.size(); ++n)
      c.samples[n] = 0.5 * std::sin(2 * std::numbers::pi * centers[band] * n / 22050.0);
    const Grid mel = mel_power(c, params);
    bool ok = true;
    for (std::size_t t = 2; t + 2 < mel.cols; ++t) {
      std::size_t best = 0;
      for (std::size_t r = 1; r < mel.rows; ++r)
        if (mel(r, t) > mel(best, t)) best = r;
      ok = ok && best == band;
    }
    tones_ok += ok;
  }

  AudioClip silent;
  silent.samples.assign(22050, 0.0);
  const auto sg = mel_spectrogram(silent, params);
  const bool silence_ok = std::all_of(sg.values.data.begin(), sg.values.data.end(), [](double v) { return v == 0.0; });

  AudioClip hi;
  hi.sample_rate = 44100;
  hi.samples.resize(44100);
  for (std::size_t n = 0; n < hi.samples.size(); ++n) hi.samples[n] = 0.5 * std::sin(2 * std::numbers::pi * 440.0 * n / 44100.0);
  const AudioClip lo = resample(hi, 22050);
  std::vector<double> frame(lo.samples.begin(), lo.samples.begin() + 8192);
  for (std::size_t n = 0; n < frame.size(); ++n) frame[n] *= 0.5 - 0.5 * std::cos(2 * std::numbers::pi * n / 8192);
  const double peak = static_cast<double>(oracle::argmax(oracle::dft_power(frame))) * 22050.0 / 8192;
  const bool resample_ok = std::abs(peak - 440.0) <= 22050.0 / 8192;

  const auto dir = oracle::fresh_dir("wav_roundtrip");
  const ClipPool pool = synth::generate_pool(synth::default_classes(), 20, 3);
  save_pool_wav(pool, dir);
  const ClipPool back = ingest_directory(dir);
  bool drift_free = back.clips.size() == pool.clips.size();
  for (std::size_t c = 0; c < pool.class_names.size() && drift_free; ++c) {
    const auto it = std::find(back.class_names.begin(), back.class_names.end(), pool.class_names[c]);
    drift_free = it != back.class_names.end() &&
                 back.count(static_cast<std::size_t>(it - back.class_names.begin())) == pool.count(c);
  }
  report("7 DSP properties", tones_ok == 20 && silence_ok && resample_ok && drift_free,
         std::to_string(tones_ok) + "/20 tones in their mel band; silence -> zero grid: " + (silence_ok ? "yes" : "no") +
             "; 440 Hz peak after 44.1k->22.05k at " + num(peak) + " Hz; WAV round trip " +
             std::to_string(back.clips.size()) + "/" + std::to_string(pool.clips.size()) + " clips, labels " +
             (drift_free ? "identical" : "drifted"));
}

// ---------------------------------------------------------------------------

void tsne_checks() {
  SplitMix64 gen(8);
  Grid pts(60, 5);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 60; ++i) {
    labels.push_back(i / 20);
    for (std::size_t d = 0; d < 5; ++d) pts(i, d) = (d == i / 20 ? 10.0 : 0.0) + 0.1 * standard_normal(gen);
  }
  Grid spread(60, 5);
  for (double& v : spread.data) v = standard_normal(gen);
  double worst_entropy = 0;
  for (double perp : {5.0, 15.0, 30.0}) {
    const Grid p = tsne::calibrate_perplexity(tsne::pairwise_sq_distances(spread), perp);
    for (std::size_t i = 0; i < p.rows; ++i) {
      double h = 0;
      for (double v : p.row(i))
        if (v > 0) h -= v * std::log2(v);
      worst_entropy = std::max(worst_entropy, std::abs(h - std::log2(perp)));
    }
  }

  tsne::TsneConfig cfg;
  cfg.seed = 9;
  const Grid p = tsne::symmetrize(tsne::calibrate_perplexity(tsne::pairwise_sq_distances(spread), cfg.perplexity));
  Grid at10;
  tsne::TsneConfig short_cfg = cfg;
  short_cfg.iterations = 11;
  tsne::tsne_embed(spread, short_cfg, [&](const tsne::IterationView& v) {
    if (v.iteration == 10) at10 = v.layout;
  });
  const Grid g = tsne::kl_gradient(p, at10);
  const auto numeric = oracle::numeric_gradient(
      [&](const std::vector<double>& y) {
        Grid l = at10;
        l.data = y;
        return tsne::kl_divergence(p, l);
      },
      at10.data);
  const double grad_err = oracle::relative_error(g.data, numeric);

  const auto result = tsne::tsne_embed(pts, cfg);
  const Grid d = tsne::pairwise_sq_distances(result.layout);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < d.rows; ++i) {
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < d.cols; ++j)
      if (j != i && d(i, j) < d(i, best)) best = j;
    agree += labels[best] == labels[i];
  }
  const double agreement = static_cast<double>(agree) / 60.0;
  report("8 t-SNE", worst_entropy <= 1e-3 && grad_err < 1e-4 && agreement >= 0.95,
         "max |entropy - log2(perp)| " + num(worst_entropy) + " (<= 1e-3), KL gradient rel err " + num(grad_err) +
             " (< 1e-4), 3-cluster 1-NN agreement " + num(100 * agreement) + "% (>= 95%)");
}

// ---------------------------------------------------------------------------

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void determinism(const std::string& cli) {
  if (cli.empty()) {
    report("9 determinism", false, "CLI path not supplied");
    return;
  }
  const auto dir = oracle::fresh_dir("determinism");
  {
    std::ofstream cfg(dir / "study.json");
    cfg << R"({"dataset": {"source": "synthetic", "n_per_class": 40}, "task": "study", "k_values": [1, 3],
  "q_query": 3, "train_episodes": 10, "eval_episodes": 10, "features": {"target_size": [32, 32]},
  "tsne": {"perplexity": 5, "iterations": 250}, "bootstrap_resamples": 2000, "seed": 42})";
  }
  int codes = 0;
  for (const char* run : {"a", "b"})
    codes += run_command("\"" + cli + "\" run -q --config \"" + (dir / "study.json").string() + "\" --output \"" +
                         (dir / run).string() + "\" > /dev/null");
  std::size_t files = 0, differing = 0;
  if (codes == 0) {
    for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
      if (!entry.is_regular_file()) continue;
      ++files;
      const fs::path twin = dir / "b" / fs::relative(entry.path(), dir / "a");
      if (!fs::exists(twin) || read_file(entry.path()) != read_file(twin)) ++differing;
    }
    for (const auto& entry : fs::recursive_directory_iterator(dir / "b"))
      if (entry.is_regular_file() && !fs::exists(dir / "a" / fs::relative(entry.path(), dir / "b"))) ++differing;
  }
  report("9 determinism", codes == 0 && files > 0 && differing == 0,
         "two CLI study runs: " + std::to_string(files) + " report files, " + std::to_string(differing) +
             " differing (exit codes " + (codes == 0 ? "0" : "non-zero") + ")");
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<const char*, std::function<void()>>> criteria = {
      {"1", gradient_correctness}, {"2", prototype_oracles}, {"3", wilcoxon_exactness},
      {"4", tost_arithmetic},      {"5", bootstrap_consistency}, {"6", synthetic_trend},
      {"7", dsp_properties},       {"8", tsne_checks},        {"9", [&] { determinism(cli); }},
  };
  for (const auto& [id, check] : criteria) {
    try {
      check();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
