#include "protoaudio/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "protoaudio/checkpoint.hpp"
#include "protoaudio/dataset.hpp"
#include "protoaudio/error.hpp"
#include "protoaudio/rng.hpp"
#include "protoaudio/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace protoaudio {
namespace {

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  fail(ErrorCode::kConfig, key, "config: " + key + ": " + what);
}

const char* task_name(TaskKind t) {
  switch (t) {
    case TaskKind::kBinary: return "binary";
    case TaskKind::kMulticlass: return "multiclass";
    case TaskKind::kStudy: return "study";
  }
  return "study";
}

// Reads `key` from `obj` into `out` when present; rejects wrong types.
template <class T>
void read_key(const json& obj, const std::string& prefix, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    config_error(prefix + key, std::string("wrong type (") + e.what() + ")");
  }
}

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
  if (!obj.is_object()) config_error(prefix.empty() ? "<root>" : prefix, "expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      config_error(prefix + key, "unknown key");
  }
}

void read_size_pair(const json& obj, const std::string& prefix, const char* key, std::size_t& h, std::size_t& w) {
  std::vector<std::size_t> dims{h, w};
  read_key(obj, prefix, key, dims);
  if (dims.size() != 2) config_error(prefix + key, "expected [height, width]");
  h = dims[0];
  w = dims[1];
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, path.string(), "cannot write " + path.string());
  out << text;
}

json equivalence_json(const stats::EquivalenceReport& r, bool parametric) {
  json j;
  j["method"] = r.method;
  j["n_multiclass"] = r.n_a;
  j["n_binary"] = r.n_b;
  j["mean_accuracy_multiclass"] = r.mean_a;
  j["mean_accuracy_binary"] = r.mean_b;
  j["mean_difference"] = r.mean_diff;
  j[parametric ? "confidence_interval" : "bootstrap_confidence_interval"] = {r.ci_low, r.ci_high};
  j["confidence_level"] = r.confidence;
  j["equivalence_margin"] = r.margin;
  j["result"] = r.verdict == stats::Verdict::kEquivalent ? "Statistically Equivalent" : "Not Equivalent";
  j["verdict"] = stats::to_string(r.verdict);
  if (r.std_error) j["pooled_standard_error"] = *r.std_error;
  if (r.df) j["degrees_of_freedom"] = *r.df;
  if (r.p_lower) j["p_lower"] = *r.p_lower;
  if (r.p_upper) j["p_upper"] = *r.p_upper;
  if (r.resamples) j["resamples"] = *r.resamples;
  if (r.seed) j["seed"] = *r.seed;
  return j;
}

json paired_json(const std::optional<stats::PairedTestResult>& r, const std::optional<std::string>& error) {
  json j;
  if (r) {
    j["statistic"] = r->statistic;
    j["p_value"] = r->p_value;
    j["n"] = r->n;
    j["exact"] = r->exact;
  } else {
    j["error"] = error.value_or("not computed");
  }
  return j;
}

std::string cell(double mean, double se) { return stats::format_double(mean) + " ± " + stats::format_double(se); }

std::string pair_label(const std::vector<std::string>& names) { return names.at(0) + " vs. " + names.at(1); }

}  // namespace

void ExperimentConfig::validate() const {
  if (!dataset.synthetic && dataset.directory.empty()) config_error("dataset.path", "required for directory datasets");
  if (dataset.synthetic && dataset.n_per_class < 5) config_error("dataset.n_per_class", "must be >= 5");
  if (task == TaskKind::kBinary && !classes.empty() && classes.size() != 2)
    config_error("classes", "binary task needs exactly 2 classes, got " + std::to_string(classes.size()));
  if (task != TaskKind::kBinary && !classes.empty() && classes.size() != 3)
    config_error("classes", std::string(task_name(task)) + " task needs exactly 3 classes, got " +
                                std::to_string(classes.size()));
  if (std::set<std::string>(classes.begin(), classes.end()).size() != classes.size())
    config_error("classes", "duplicate class names");
  if (k_values.empty()) config_error("k_values", "at least one K required");
  for (std::size_t k : k_values)
    if (k < 1) config_error("k_values", "K values must be >= 1");
  if (std::set<std::size_t>(k_values.begin(), k_values.end()).size() != k_values.size())
    config_error("k_values", "duplicate K values");
  if (q_query < 1) config_error("q_query", "must be >= 1");
  if (eval_episodes < 1) config_error("eval_episodes", "must be >= 1");
  if (task == TaskKind::kStudy && eval_episodes < 2) config_error("eval_episodes", "the study needs >= 2 episodes");
  if (!(margin > 0.0)) config_error("margin", "must be positive");
  if (bootstrap_resamples < 1000) config_error("bootstrap_resamples", "must be >= 1000");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) config_error("train_fraction", "must lie in (0, 1)");
  if (!(adam.lr > 0.0)) config_error("optimizer.lr", "must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) config_error("optimizer.beta1", "must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) config_error("optimizer.beta2", "must lie in [0, 1)");
  if (!(adam.eps > 0.0)) config_error("optimizer.eps", "must be positive");
  try {
    features.validate();
    backbone.validate();
  } catch (const Error& e) {
    config_error(e.field(), e.what());
  }
  if (features.target_height != backbone.input_height || features.target_width != backbone.input_width)
    config_error("backbone.input_size", "must equal features.target_size");
  if (!(tsne.perplexity > 0.0)) config_error("tsne.perplexity", "must be positive");
  if (tsne.iterations < 1) config_error("tsne.iterations", "must be >= 1");
  if (!(tsne.learning_rate > 0.0)) config_error("tsne.learning_rate", "must be positive");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_error("<root>", std::string("invalid JSON: ") + e.what());
  }
  reject_unknown(root, "",
                 {"dataset", "task", "classes", "k_values", "q_query", "train_episodes", "eval_episodes", "margin",
                  "bootstrap_resamples", "train_fraction", "optimizer", "backbone", "features", "tsne", "seed",
                  "output"});
  ExperimentConfig cfg;
  if (const auto it = root.find("dataset"); it != root.end()) {
    reject_unknown(*it, "dataset.", {"source", "path", "n_per_class", "skip_undecodable"});
    std::string source = "synthetic";
    read_key(*it, "dataset.", "source", source);
    if (source != "synthetic" && source != "directory") config_error("dataset.source", "expected synthetic|directory");
    cfg.dataset.synthetic = source == "synthetic";
    std::string path;
    read_key(*it, "dataset.", "path", path);
    cfg.dataset.directory = path;
    read_key(*it, "dataset.", "n_per_class", cfg.dataset.n_per_class);
    read_key(*it, "dataset.", "skip_undecodable", cfg.dataset.skip_undecodable);
  }
  std::string task = "study";
  read_key(root, "", "task", task);
  if (task == "binary") cfg.task = TaskKind::kBinary;
  else if (task == "multiclass") cfg.task = TaskKind::kMulticlass;
  else if (task == "study") cfg.task = TaskKind::kStudy;
  else config_error("task", "expected binary|multiclass|study, got '" + task + "'");
  read_key(root, "", "classes", cfg.classes);
  read_key(root, "", "k_values", cfg.k_values);
  read_key(root, "", "q_query", cfg.q_query);
  read_key(root, "", "train_episodes", cfg.train_episodes);
  read_key(root, "", "eval_episodes", cfg.eval_episodes);
  read_key(root, "", "margin", cfg.margin);
  read_key(root, "", "bootstrap_resamples", cfg.bootstrap_resamples);
  read_key(root, "", "train_fraction", cfg.train_fraction);
  read_key(root, "", "seed", cfg.seed);
  std::string output = cfg.output_dir.string();
  read_key(root, "", "output", output);
  cfg.output_dir = output;
  if (const auto it = root.find("optimizer"); it != root.end()) {
    reject_unknown(*it, "optimizer.", {"lr", "beta1", "beta2", "eps"});
    read_key(*it, "optimizer.", "lr", cfg.adam.lr);
    read_key(*it, "optimizer.", "beta1", cfg.adam.beta1);
    read_key(*it, "optimizer.", "beta2", cfg.adam.beta2);
    read_key(*it, "optimizer.", "eps", cfg.adam.eps);
  }
  if (const auto it = root.find("features"); it != root.end()) {
    reject_unknown(*it, "features.", {"n_fft", "hop", "n_mels", "f_min", "f_max", "target_size"});
    read_key(*it, "features.", "n_fft", cfg.features.n_fft);
    read_key(*it, "features.", "hop", cfg.features.hop);
    read_key(*it, "features.", "n_mels", cfg.features.n_mels);
    read_key(*it, "features.", "f_min", cfg.features.f_min);
    read_key(*it, "features.", "f_max", cfg.features.f_max);
    read_size_pair(*it, "features.", "target_size", cfg.features.target_height, cfg.features.target_width);
    // The backbone follows the feature size unless it is given explicitly.
    cfg.backbone.input_height = cfg.features.target_height;
    cfg.backbone.input_width = cfg.features.target_width;
  }
  if (const auto it = root.find("backbone"); it != root.end()) {
    reject_unknown(*it, "backbone.", {"input_size", "block_channels"});
    read_size_pair(*it, "backbone.", "input_size", cfg.backbone.input_height, cfg.backbone.input_width);
    read_key(*it, "backbone.", "block_channels", cfg.backbone.block_channels);
  }
  if (const auto it = root.find("tsne"); it != root.end()) {
    reject_unknown(*it, "tsne.", {"perplexity", "iterations", "learning_rate"});
    read_key(*it, "tsne.", "perplexity", cfg.tsne.perplexity);
    read_key(*it, "tsne.", "iterations", cfg.tsne.iterations);
    read_key(*it, "tsne.", "learning_rate", cfg.tsne.learning_rate);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, path.string(), "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["dataset"] = {{"source", cfg.dataset.synthetic ? "synthetic" : "directory"},
                  {"path", cfg.dataset.directory.string()},
                  {"n_per_class", cfg.dataset.n_per_class},
                  {"skip_undecodable", cfg.dataset.skip_undecodable}};
  j["task"] = task_name(cfg.task);
  j["classes"] = cfg.classes;
  j["k_values"] = cfg.k_values;
  j["q_query"] = cfg.q_query;
  j["train_episodes"] = cfg.train_episodes;
  j["eval_episodes"] = cfg.eval_episodes;
  j["margin"] = cfg.margin;
  j["bootstrap_resamples"] = cfg.bootstrap_resamples;
  j["train_fraction"] = cfg.train_fraction;
  j["optimizer"] = {{"lr", cfg.adam.lr}, {"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"eps", cfg.adam.eps}};
  j["backbone"] = {{"input_size", {cfg.backbone.input_height, cfg.backbone.input_width}},
                   {"block_channels", cfg.backbone.block_channels}};
  j["features"] = {{"n_fft", cfg.features.n_fft},
                   {"hop", cfg.features.hop},
                   {"n_mels", cfg.features.n_mels},
                   {"f_min", cfg.features.f_min},
                   {"f_max", cfg.features.f_max},
                   {"target_size", {cfg.features.target_height, cfg.features.target_width}}};
  j["tsne"] = {{"perplexity", cfg.tsne.perplexity},
               {"iterations", cfg.tsne.iterations},
               {"learning_rate", cfg.tsne.learning_rate}};
  j["seed"] = cfg.seed;
  j["output"] = cfg.output_dir.string();
  return j.dump(2) + "\n";
}

std::uint64_t sub_seed(std::uint64_t seed, const std::string& name, std::size_t k) {
  return mix_seed(mix_seed(seed, hash_name(name)), k);
}

std::string run_summary_json(const RunSummary& summary, const std::string& task,
                             const std::vector<std::string>& class_names, const EpisodeSpec& spec) {
  json j;
  j["task"] = task;
  j["n_way"] = spec.n_way;
  j["k_shot"] = spec.k_shot;
  j["q_query"] = spec.q_query;
  j["episodes"] = summary.episodes;
  j["mean_accuracy"] = summary.mean_accuracy;
  j["std_error"] = summary.std_error;
  json per_class = json::array();
  for (const auto& c : summary.per_class)
    per_class.push_back({{"class", class_names.at(c.class_id)}, {"mean", c.mean}, {"std_error", c.std_error}});
  j["per_class"] = per_class;
  j["confusion"] = summary.confusion;
  return j.dump(2) + "\n";
}

std::string statistics_json(const StatisticsReport& report) {
  json j;
  j["tost"] = equivalence_json(report.tost, true);
  j["bootstrap"] = equivalence_json(report.bootstrap, false);
  j["paired_by_k"] = {{"multiclass", report.paired.multiclass}, {"binary", report.paired.binary}};
  j["paired_t_test"] = paired_json(report.paired.t_test, report.paired.t_test_error);
  j["wilcoxon_signed_rank"] = paired_json(report.paired.wilcoxon, report.paired.wilcoxon_error);
  return j.dump(2) + "\n";
}

std::string markdown_summary(const ExperimentReport& report, const ExperimentConfig& cfg) {
  std::ostringstream md;
  md << "# Few-shot experiment summary\n\n";
  md << "Accuracies are percentages over " << cfg.eval_episodes
     << " evaluation episodes per K, shown as mean ± standard error.\n\n";

  std::vector<const TaskRun*> binaries;
  const TaskRun* multi = nullptr;
  for (const auto& r : report.runs) {
    if (r.name == "multiclass") multi = &r;
    else binaries.push_back(&r);
  }

  if (!binaries.empty()) {
    md << "## Binary classification accuracy\n\n| K-shot |";
    for (const auto* b : binaries) md << ' ' << pair_label(b->class_names) << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < binaries.size(); ++i) md << "---|";
    md << '\n';
    for (std::size_t k : cfg.k_values) {
      md << "| " << k << "-shot |";
      for (const auto* b : binaries) {
        const auto& s = b->by_k.at(k);
        md << ' ' << cell(s.mean_accuracy, s.std_error) << " |";
      }
      md << '\n';
    }
    md << '\n';
  }
  if (multi) {
    md << "## Multi-class accuracy\n\n| K-shot | Multi-Class Accuracy (%) |\n|---|---|\n";
    for (std::size_t k : cfg.k_values) {
      const auto& s = multi->by_k.at(k);
      md << "| " << k << "-shot | " << cell(s.mean_accuracy, s.std_error) << " |\n";
    }
    md << "\n## Class-level multi-class accuracy\n\n| K-shot |";
    for (const auto& name : multi->class_names) md << ' ' << name << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < multi->class_names.size(); ++i) md << "---|";
    md << '\n';
    for (std::size_t k : cfg.k_values) {
      md << "| " << k << "-shot |";
      for (const auto& c : multi->by_k.at(k).per_class) md << ' ' << cell(c.mean, c.std_error) << " |";
      md << '\n';
    }
    md << '\n';
  }
  if (report.statistics) {
    const auto& st = *report.statistics;
    const auto verdict = [](stats::Verdict v) {
      return v == stats::Verdict::kEquivalent ? "Statistically Equivalent" : "Not Equivalent";
    };
    md << "## Equivalence test (TOST)\n\n| Metric | Value |\n|---|---|\n";
    md << "| Mean Average Accuracy (Multi-Class) | " << stats::format_double(st.tost.mean_a) << " |\n";
    md << "| Mean Average Accuracy (Binary) | " << stats::format_double(st.tost.mean_b) << " |\n";
    md << "| Mean Difference | " << stats::format_double(st.tost.mean_diff) << " |\n";
    md << "| 90% Confidence Interval | [" << stats::format_double(st.tost.ci_low) << ", "
       << stats::format_double(st.tost.ci_high) << "] |\n";
    md << "| Equivalence Margin | ±" << stats::format_double(st.tost.margin) << " |\n";
    md << "| Result | " << verdict(st.tost.verdict) << " |\n\n";
    md << "## Bootstrap equivalence test\n\n| Metric | Value |\n|---|---|\n";
    md << "| Bootstrap 90% CI | [" << stats::format_double(st.bootstrap.ci_low) << ", "
       << stats::format_double(st.bootstrap.ci_high) << "] |\n";
    md << "| Equivalence Margin | ±" << stats::format_double(st.bootstrap.margin) << " |\n";
    md << "| Result | " << verdict(st.bootstrap.verdict) << " |\n\n";
    md << "## Paired tests over K-shot means\n\n| Test | Statistic | p-value |\n|---|---|---|\n";
    const auto row = [&](const char* name, const auto& r, const auto& err) {
      md << "| " << name << " | ";
      if (r) md << stats::format_double(r->statistic) << " | " << stats::format_double(r->p_value) << " |\n";
      else md << "n/a | " << err.value_or("not computed") << " |\n";
    };
    row("Paired t-test", st.paired.t_test, st.paired.t_test_error);
    row("Wilcoxon signed-rank", st.paired.wilcoxon, st.paired.wilcoxon_error);
    md << '\n';
  }
  return md.str();
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  auto note = [&](const std::string& msg) {
    if (log) *log << msg << std::endl;
  };

  // Dataset, class selection and sampler preconditions are all checked
  // before any training happens.
  ClipPool pool;
  try {
    if (cfg.dataset.synthetic) {
      pool = synth::generate_pool(synth::default_classes(), cfg.dataset.n_per_class, sub_seed(cfg.seed, "dataset"));
    } else {
      IngestReport ingest;
      pool = ingest_directory(cfg.dataset.directory, {cfg.dataset.skip_undecodable}, &ingest);
      for (const auto& s : ingest.skipped) note("skipped " + s);
    }
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.field(), std::string("dataset: ") + e.what());
  }
  std::vector<std::string> classes = cfg.classes.empty() ? pool.class_names : cfg.classes;
  const std::size_t want = cfg.task == TaskKind::kBinary ? 2 : 3;
  if (classes.size() != want)
    config_error("classes", std::string(task_name(cfg.task)) + " task needs " + std::to_string(want) +
                                " classes, dataset provides " + std::to_string(classes.size()));
  for (const auto& c : classes)
    if (std::find(pool.class_names.begin(), pool.class_names.end(), c) == pool.class_names.end())
      config_error("classes", "class '" + c + "' not found in dataset");

  const SplitPool split = split_pool(pool, cfg.train_fraction, sub_seed(cfg.seed, "split"));
  const std::size_t max_k = *std::max_element(cfg.k_values.begin(), cfg.k_values.end());
  for (const auto& c : classes) {
    const auto id = static_cast<std::size_t>(std::find(pool.class_names.begin(), pool.class_names.end(), c) -
                                             pool.class_names.begin());
    for (const auto* side : {&split.train, &split.test}) {
      const std::size_t have = side->count(id);
      if (have < max_k + cfg.q_query)
        config_error("k_values", "class '" + c + "' has " + std::to_string(have) + " " +
                                     (side == &split.train ? "training" : "test") + " clips, K=" +
                                     std::to_string(max_k) + " with Q=" + std::to_string(cfg.q_query) + " needs " +
                                     std::to_string(max_k + cfg.q_query));
    }
  }
  const bool run_multi = cfg.task != TaskKind::kBinary;
  tsne::TsneConfig tsne_cfg = cfg.tsne;
  tsne_cfg.seed = sub_seed(cfg.seed, "tsne");
  if (run_multi) {
    std::size_t test_points = 0;
    for (const auto& c : split.test.clips)
      if (std::find(classes.begin(), classes.end(), pool.class_names[c.class_id]) != classes.end()) ++test_points;
    try {
      tsne_cfg.validate(test_points);
    } catch (const Error& e) {
      config_error("tsne." + e.field(), e.what());
    }
  }

  note("featurizing " + std::to_string(pool.clips.size()) + " clips");
  const SpectrogramPool train_all = featurize(split.train, cfg.features);
  const SpectrogramPool test_all = featurize(split.test, cfg.features);

  struct TaskPlan {
    std::string name;
    std::vector<std::string> classes;
  };
  std::vector<TaskPlan> plans;
  if (run_multi) plans.push_back({"multiclass", classes});
  if (cfg.task == TaskKind::kBinary) plans.push_back({"binary_" + classes[0] + "_vs_" + classes[1], classes});
  if (cfg.task == TaskKind::kStudy)
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = a + 1; b < 3; ++b)
        plans.push_back({"binary_" + classes[a] + "_vs_" + classes[b], {classes[a], classes[b]}});

  ExperimentReport report;
  report.output_dir = cfg.output_dir;
  fs::create_directories(cfg.output_dir);
  ParamSet tsne_params;

  for (const auto& plan : plans) {
    const SpectrogramPool train_pool = select_classes(train_all, plan.classes);
    const SpectrogramPool test_pool = select_classes(test_all, plan.classes);
    TaskRun run{plan.name, plan.classes, {}};
    for (std::size_t k : cfg.k_values) {
      const EpisodeSpec spec{plan.classes.size(), k, cfg.q_query};
      note(plan.name + " K=" + std::to_string(k) + ": training " + std::to_string(cfg.train_episodes) + " episodes");
      const ParamSet init = init_params(cfg.backbone, sub_seed(cfg.seed, plan.name + "/init", k));
      TrainOptions opts;
      opts.episodes = cfg.train_episodes;
      opts.adam = cfg.adam;
      opts.seed = sub_seed(cfg.seed, plan.name + "/train", k);
      TrainResult trained = train(train_pool, spec, cfg.backbone, init, opts);

      const Grid embeddings = embed_pool(test_pool, trained.params, cfg.backbone);
      const auto eval_seed = sub_seed(cfg.seed, plan.name + "/eval", k);
      const auto results = evaluate_embeddings(embeddings, test_pool.labels(), plan.classes.size(), spec,
                                               cfg.eval_episodes, eval_seed);
      RunSummary summary = summarize_episodes(results, plan.classes.size());
      note(plan.name + " K=" + std::to_string(k) + ": accuracy " + stats::format_double(summary.mean_accuracy));

      const fs::path dir = cfg.output_dir / plan.name / std::to_string(k);
      fs::create_directories(dir);
      write_text(dir / "summary.json", run_summary_json(summary, plan.name, plan.classes, spec));
      stats::write_accuracy_csv(dir / "episodes.csv", summary.episode_accuracies);
      std::ostringstream conf;
      conf << "true\\predicted";
      for (const auto& c : plan.classes) conf << ',' << c;
      conf << '\n';
      for (std::size_t r = 0; r < plan.classes.size(); ++r) {
        conf << plan.classes[r];
        for (std::size_t c = 0; c < plan.classes.size(); ++c) conf << ',' << summary.confusion[r][c];
        conf << '\n';
      }
      write_text(dir / "confusion.csv", conf.str());
      save_checkpoint(dir / "model.psht", trained.params);

      if (plan.name == "multiclass" && k == max_k) {
        tsne_params = trained.params;
        // Support/query spectrograms of the first evaluation episode.
        SplitMix64 rng(mix_seed(eval_seed, 0));
        const Episode ep = sample_episode(test_pool, spec, rng);
        const fs::path spec_dir = cfg.output_dir / "spectrograms";
        fs::create_directories(spec_dir);
        for (const auto* items : {&ep.support, &ep.query}) {
          const std::string role = items == &ep.support ? "support" : "query";
          std::set<std::size_t> done;
          for (const auto& it : *items) {
            if (!done.insert(it.label).second) continue;
            const auto& item = test_pool.items[it.item];
            Grid g(test_pool.height, test_pool.width);
            g.data = item.pixels;
            const std::string stem = role + "_" + plan.classes[item.class_id];
            write_grid_csv(spec_dir / (stem + ".csv"), g);
            write_grid_pgm(spec_dir / (stem + ".pgm"), g);
          }
        }
      }
      run.by_k.emplace(k, std::move(summary));
    }
    report.runs.push_back(std::move(run));
  }

  if (cfg.task == TaskKind::kStudy) {
    note("statistics");
    const TaskRun& multi = report.runs.front();
    PairedComparison paired;
    for (std::size_t k : cfg.k_values) {
      paired.multiclass.push_back(multi.by_k.at(k).mean_accuracy);
      double binary_mean = 0.0;
      std::size_t pairs = 0;
      for (const auto& run : report.runs) {
        if (&run == &multi) continue;
        binary_mean += run.by_k.at(k).mean_accuracy;
        ++pairs;
      }
      paired.binary.push_back(binary_mean / static_cast<double>(pairs));
    }
    // Re-read the per-episode CSVs: they are the contract between the
    // evaluation and statistics stages.
    std::vector<double> a, b;
    for (const auto& run : report.runs)
      for (std::size_t k : cfg.k_values) {
        const auto values = stats::read_accuracy_csv(cfg.output_dir / run.name / std::to_string(k) / "episodes.csv");
        auto& dst = &run == &multi ? a : b;
        dst.insert(dst.end(), values.begin(), values.end());
      }
    StatisticsReport st;
    st.tost = stats::tost_equivalence(a, b, cfg.margin, 0.90);
    st.bootstrap = stats::bootstrap_equivalence(a, b, cfg.margin, cfg.bootstrap_resamples, 0.90,
                                                sub_seed(cfg.seed, "bootstrap"));
    try {
      paired.t_test = stats::paired_t_test(paired.multiclass, paired.binary);
    } catch (const Error& e) {
      paired.t_test_error = e.what();
    }
    try {
      paired.wilcoxon = stats::wilcoxon_signed_rank(paired.multiclass, paired.binary);
    } catch (const Error& e) {
      paired.wilcoxon_error = e.what();
    }
    st.paired = std::move(paired);
    fs::create_directories(cfg.output_dir / "stats");
    write_text(cfg.output_dir / "stats" / "equivalence.json", statistics_json(st));
    report.statistics = std::move(st);
  }

  if (run_multi) {
    note("t-SNE");
    const SpectrogramPool test_pool = select_classes(test_all, classes);
    const Grid embeddings = embed_pool(test_pool, tsne_params, cfg.backbone);
    const tsne::TsneResult layout = tsne::tsne_embed(embeddings, tsne_cfg);
    std::vector<std::string> labels;
    for (const auto& item : test_pool.items) labels.push_back(test_pool.class_names[item.class_id]);
    fs::create_directories(cfg.output_dir / "tsne");
    tsne::write_points_csv(cfg.output_dir / "tsne" / "points.csv", layout.layout, labels);
    tsne::write_points_svg(cfg.output_dir / "tsne" / "points.svg", layout.layout, labels);
  }

  write_text(cfg.output_dir / "summary.md", markdown_summary(report, cfg));
  return report;
}

}  // namespace protoaudio
