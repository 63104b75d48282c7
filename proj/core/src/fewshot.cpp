#include "protoaudio/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "protoaudio/error.hpp"
#include "protoaudio/stats.hpp"

namespace protoaudio {

void EpisodeSpec::validate() const {
  if (n_way < 2) fail(ErrorCode::kInvalidArgument, "n_way", "episodes need at least 2 classes");
  if (k_shot < 1) fail(ErrorCode::kInvalidArgument, "k_shot", "k_shot must be >= 1");
  if (q_query < 1) fail(ErrorCode::kInvalidArgument, "q_query", "q_query must be >= 1");
}

namespace {

// Partial Fisher-Yates: the first `take` entries of `v` become a uniform
// sample without replacement.
void partial_shuffle(std::vector<std::size_t>& v, std::size_t take, SplitMix64& rng) {
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, v.size() - i));
    std::swap(v[i], v[j]);
  }
}

std::pair<double, double> mean_and_se(std::span<const double> values) {
  const auto s = stats::summarize(values);
  return {s.mean, s.std_error.value_or(0.0)};
}

Episode sample_impl(std::span<const std::size_t> item_labels, std::size_t n_classes, const EpisodeSpec& spec,
                    SplitMix64& rng, std::span<const std::string> names) {
  spec.validate();
  if (n_classes < spec.n_way)
    fail(ErrorCode::kInsufficientSamples, "n_way",
         "pool has " + std::to_string(n_classes) + " classes, episode needs " + std::to_string(spec.n_way));
  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t i = 0; i < item_labels.size(); ++i) {
    if (item_labels[i] >= n_classes) fail(ErrorCode::kInvalidArgument, "labels", "item label out of range");
    members[item_labels[i]].push_back(i);
  }
  const std::size_t need = spec.k_shot + spec.q_query;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (members[c].size() >= need) continue;
    const std::string name = c < names.size() ? names[c] : std::to_string(c);
    fail(ErrorCode::kInsufficientSamples, name,
         "class '" + name + "' has " + std::to_string(members[c].size()) + " samples, needs " +
             std::to_string(need) + " (short by " + std::to_string(need - members[c].size()) + ")");
  }

  std::vector<std::size_t> classes(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) classes[c] = c;
  partial_shuffle(classes, spec.n_way, rng);

  Episode ep;
  ep.class_map.assign(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(spec.n_way));
  std::vector<std::vector<std::size_t>> drawn(spec.n_way);
  for (std::size_t n = 0; n < spec.n_way; ++n) {
    auto pool = members[ep.class_map[n]];
    partial_shuffle(pool, need, rng);
    drawn[n].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
  }
  for (std::size_t n = 0; n < spec.n_way; ++n)
    for (std::size_t k = 0; k < spec.k_shot; ++k) ep.support.push_back({drawn[n][k], n});
  for (std::size_t n = 0; n < spec.n_way; ++n)
    for (std::size_t q = 0; q < spec.q_query; ++q) ep.query.push_back({drawn[n][spec.k_shot + q], n});
  return ep;
}

}  // namespace

Episode sample_episode(std::span<const std::size_t> item_labels, std::size_t n_classes, const EpisodeSpec& spec,
                       SplitMix64& rng) {
  return sample_impl(item_labels, n_classes, spec, rng, {});
}

Episode sample_episode(const SpectrogramPool& pool, const EpisodeSpec& spec, SplitMix64& rng) {
  const auto labels = pool.labels();
  return sample_impl(labels, pool.class_names.size(), spec, rng, pool.class_names);
}

ad::Tensor compute_prototypes(const ad::Tensor& support, std::span<const std::size_t> labels, std::size_t n_classes) {
  if (support.rank() != 2 || support.dim(0) != labels.size())
    fail(ErrorCode::kShapeMismatch, "support",
         "support " + ad::shape_string(support.shape()) + " vs " + std::to_string(labels.size()) + " labels");
  if (n_classes == 0 || labels.size() % n_classes != 0)
    fail(ErrorCode::kInvalidArgument, "labels", "label count is not a multiple of the class count");
  std::vector<std::size_t> counts(n_classes, 0);
  for (std::size_t l : labels) {
    if (l >= n_classes) fail(ErrorCode::kInvalidArgument, "labels", "label " + std::to_string(l) + " out of range");
    ++counts[l];
  }
  const std::size_t k = labels.size() / n_classes;
  for (std::size_t c = 0; c < n_classes; ++c)
    if (counts[c] != k)
      fail(ErrorCode::kInvalidArgument, "labels",
           "class " + std::to_string(c) + " appears " + std::to_string(counts[c]) + " times, expected " +
               std::to_string(k));

  const std::size_t d = support.dim(1);
  const double inv_k = 1.0 / static_cast<double>(k);
  std::vector<double> out(n_classes * d, 0.0);
  for (std::size_t r = 0; r < labels.size(); ++r)
    for (std::size_t j = 0; j < d; ++j) out[labels[r] * d + j] += support.data()[r * d + j];
  for (double& v : out) v *= inv_k;

  ad::NodePtr ps = support.node();
  std::vector<std::size_t> label_copy(labels.begin(), labels.end());
  return ad::make_result({n_classes, d}, std::move(out), {support},
                         [ps, label_copy = std::move(label_copy), d, inv_k](ad::TensorNode& o) {
    auto& g = ps->grad_buffer();
    for (std::size_t r = 0; r < label_copy.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) g[r * d + j] += o.grad[label_copy[r] * d + j] * inv_k;
  });
}

Classification classify_queries(const ad::Tensor& queries, const ad::Tensor& prototypes) {
  if (queries.rank() != 2 || prototypes.rank() != 2 || queries.dim(1) != prototypes.dim(1))
    fail(ErrorCode::kShapeMismatch, "queries",
         "queries " + ad::shape_string(queries.shape()) + " vs prototypes " + ad::shape_string(prototypes.shape()));
  const std::size_t m = queries.dim(0), n = prototypes.dim(0), d = queries.dim(1);
  const auto q = queries.data();
  const auto c = prototypes.data();
  std::vector<double> logits(m * n);
  std::vector<std::size_t> predictions(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = q[i * d + j] - c[k * d + j];
        dist += diff * diff;
      }
      logits[i * n + k] = -dist;
      if (logits[i * n + k] > logits[i * n + predictions[i]]) predictions[i] = k;
    }
  }

  ad::NodePtr pq = queries.node(), pc = prototypes.node();
  Classification out;
  out.predictions = std::move(predictions);
  out.logits = ad::make_result({m, n}, std::move(logits), {queries, prototypes}, [pq, pc, m, n, d](ad::TensorNode& o) {
    // d(-|q-c|^2)/dq = -2(q-c), d/dc = 2(q-c)
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const double g = o.grad[i * n + k];
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = pq->data[i * d + j] - pc->data[k * d + j];
          if (pq->requires_grad) pq->grad_buffer()[i * d + j] -= 2.0 * g * diff;
          if (pc->requires_grad) pc->grad_buffer()[k * d + j] += 2.0 * g * diff;
        }
      }
    }
  });
  return out;
}

ad::Tensor episode_loss(const ad::Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size())
    fail(ErrorCode::kShapeMismatch, "logits",
         "logits " + ad::shape_string(logits.shape()) + " vs " + std::to_string(labels.size()) + " labels");
  const std::size_t m = logits.dim(0), n = logits.dim(1);
  for (std::size_t l : labels)
    if (l >= n) fail(ErrorCode::kInvalidArgument, "labels", "label " + std::to_string(l) + " out of range");

  auto softmax = std::make_shared<std::vector<double>>(m * n);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = logits.data().data() + i * n;
    const double shift = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) z += std::exp(row[k] - shift);
    const double log_z = shift + std::log(z);
    for (std::size_t k = 0; k < n; ++k) (*softmax)[i * n + k] = std::exp(row[k] - log_z);
    total += log_z - row[labels[i]];
  }

  ad::NodePtr pl = logits.node();
  std::vector<std::size_t> label_copy(labels.begin(), labels.end());
  return ad::make_result({}, {total / static_cast<double>(m)}, {logits},
                         [pl, softmax, label_copy = std::move(label_copy), m, n](ad::TensorNode& o) {
    auto& g = pl->grad_buffer();
    const double scale = o.grad[0] / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < n; ++k)
        g[i * n + k] += scale * ((*softmax)[i * n + k] - (k == label_copy[i] ? 1.0 : 0.0));
  });
}

EpisodeResult score_episode(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                            std::size_t n_classes) {
  if (predictions.size() != labels.size() || labels.empty())
    fail(ErrorCode::kShapeMismatch, "predictions", "predictions and labels differ in length");
  EpisodeResult r;
  r.per_class_correct.assign(n_classes, 0);
  r.per_class_total.assign(n_classes, 0);
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes || predictions[i] >= n_classes)
      fail(ErrorCode::kInvalidArgument, "labels", "class index out of range");
    ++r.confusion[labels[i]][predictions[i]];
    ++r.per_class_total[labels[i]];
    if (labels[i] == predictions[i]) {
      ++r.per_class_correct[labels[i]];
      ++correct;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  r.class_map.resize(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) r.class_map[c] = c;
  return r;
}

RunSummary summarize_episodes(std::span<const EpisodeResult> results, std::size_t pool_classes) {
  if (results.empty()) fail(ErrorCode::kInvalidArgument, "episodes", "at least one episode required");
  RunSummary s;
  s.episodes = results.size();
  s.confusion.assign(pool_classes, std::vector<std::size_t>(pool_classes, 0));
  std::vector<std::vector<double>> per_class(pool_classes);
  for (const auto& r : results) {
    s.episode_accuracies.push_back(100.0 * r.accuracy);
    for (std::size_t t = 0; t < r.class_map.size(); ++t) {
      const std::size_t global = r.class_map[t];
      if (global >= pool_classes) fail(ErrorCode::kInvalidArgument, "class_map", "class id out of range");
      for (std::size_t p = 0; p < r.class_map.size(); ++p) s.confusion[global][r.class_map[p]] += r.confusion[t][p];
      if (r.per_class_total[t] > 0)
        per_class[global].push_back(100.0 * static_cast<double>(r.per_class_correct[t]) /
                                    static_cast<double>(r.per_class_total[t]));
    }
  }
  std::tie(s.mean_accuracy, s.std_error) = mean_and_se(s.episode_accuracies);
  for (std::size_t c = 0; c < pool_classes; ++c) {
    ClassSummary cs;
    cs.class_id = c;
    cs.episodes = per_class[c].size();
    if (!per_class[c].empty()) std::tie(cs.mean, cs.std_error) = mean_and_se(per_class[c]);
    s.per_class.push_back(cs);
  }
  return s;
}

TrainResult train(const SpectrogramPool& pool, const EpisodeSpec& spec, const BackboneConfig& cfg,
                  const ParamSet& initial, const TrainOptions& options) {
  spec.validate();
  check_params(cfg, initial);
  if (pool.height != cfg.input_height || pool.width != cfg.input_width)
    fail(ErrorCode::kShapeMismatch, "input_size", "pool image size does not match backbone config");

  TrainResult result;
  result.params = initial.clone();
  auto params = result.params.tensors();
  for (auto& p : params) p.set_requires_grad(true);
  std::vector<ad::AdamState> states;
  for (const auto& p : params) states.push_back(ad::AdamState::for_param(p, options.adam));

  const auto labels = pool.labels();
  const std::size_t n_classes = pool.class_names.size();
  for (std::size_t e = 0; e < options.episodes; ++e) {
    SplitMix64 rng(mix_seed(options.seed, e));
    const Episode ep = sample_episode(labels, n_classes, spec, rng);

    std::vector<const std::vector<double>*> support_imgs, query_imgs;
    std::vector<std::size_t> support_labels, query_labels;
    for (const auto& it : ep.support) {
      support_imgs.push_back(&pool.items[it.item].pixels);
      support_labels.push_back(it.label);
    }
    for (const auto& it : ep.query) {
      query_imgs.push_back(&pool.items[it.item].pixels);
      query_labels.push_back(it.label);
    }
    const ad::Tensor support = embed(stack_images(support_imgs, pool.height, pool.width), result.params, cfg);
    const ad::Tensor query = embed(stack_images(query_imgs, pool.height, pool.width), result.params, cfg);
    const ad::Tensor prototypes = compute_prototypes(support, support_labels, spec.n_way);
    const Classification cls = classify_queries(query, prototypes);
    const ad::Tensor loss = episode_loss(cls.logits, query_labels);
    ad::backward(loss);
    ad::adam_step(params, states);
    result.losses.push_back(loss.item());
  }
  return result;
}

Grid embed_pool(const SpectrogramPool& pool, const ParamSet& params, const BackboneConfig& cfg,
                std::size_t batch_size) {
  check_params(cfg, params);
  ad::NoGradGuard no_grad;
  const std::size_t dim = cfg.embedding_dim();
  Grid out(pool.items.size(), dim);
  for (std::size_t start = 0; start < pool.items.size(); start += batch_size) {
    const std::size_t end = std::min(pool.items.size(), start + batch_size);
    std::vector<const std::vector<double>*> imgs;
    for (std::size_t i = start; i < end; ++i) imgs.push_back(&pool.items[i].pixels);
    const ad::Tensor emb = embed(stack_images(imgs, pool.height, pool.width), params, cfg);
    std::copy(emb.data().begin(), emb.data().end(), out.data.begin() + static_cast<std::ptrdiff_t>(start * dim));
  }
  return out;
}

std::vector<EpisodeResult> evaluate_embeddings(const Grid& embeddings, std::span<const std::size_t> labels,
                                               std::size_t n_classes, const EpisodeSpec& spec,
                                               std::size_t episodes, std::uint64_t seed) {
  if (embeddings.rows != labels.size())
    fail(ErrorCode::kShapeMismatch, "embeddings", "embedding rows do not match label count");
  ad::NoGradGuard no_grad;
  const std::size_t d = embeddings.cols;
  auto gather = [&](const std::vector<EpisodeItem>& items) {
    std::vector<double> data;
    data.reserve(items.size() * d);
    for (const auto& it : items) {
      const auto row = embeddings.row(it.item);
      data.insert(data.end(), row.begin(), row.end());
    }
    return ad::Tensor::from({items.size(), d}, std::move(data));
  };

  std::vector<EpisodeResult> results;
  results.reserve(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    SplitMix64 rng(mix_seed(seed, e));
    const Episode ep = sample_episode(labels, n_classes, spec, rng);
    std::vector<std::size_t> support_labels, query_labels;
    for (const auto& it : ep.support) support_labels.push_back(it.label);
    for (const auto& it : ep.query) query_labels.push_back(it.label);
    const ad::Tensor prototypes = compute_prototypes(gather(ep.support), support_labels, spec.n_way);
    const Classification cls = classify_queries(gather(ep.query), prototypes);
    EpisodeResult r = score_episode(cls.predictions, query_labels, spec.n_way);
    r.class_map = ep.class_map;
    results.push_back(std::move(r));
  }
  return results;
}

RunSummary evaluate(const SpectrogramPool& pool, const EpisodeSpec& spec, std::size_t episodes,
                    const ParamSet& params, const BackboneConfig& cfg, std::uint64_t seed) {
  const Grid embeddings = embed_pool(pool, params, cfg);
  const auto results = evaluate_embeddings(embeddings, pool.labels(), pool.class_names.size(), spec, episodes, seed);
  return summarize_episodes(results, pool.class_names.size());
}

}  // namespace protoaudio
