#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "protoaudio/audio_io.hpp"
#include "protoaudio/dataset.hpp"
#include "protoaudio/error.hpp"
#include "protoaudio/experiment.hpp"
#include "protoaudio/features.hpp"
#include "protoaudio/stats.hpp"
#include "protoaudio/synth.hpp"

namespace fs = std::filesystem;
namespace pa = protoaudio;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

int cmd_run(const std::string& config_path, const std::string& output, std::optional<std::uint64_t> seed,
            bool synthetic, bool quiet) {
  pa::ExperimentConfig cfg = config_path.empty() ? pa::ExperimentConfig{} : pa::load_config(config_path);
  if (!output.empty()) cfg.output_dir = output;
  if (seed) cfg.seed = *seed;
  if (synthetic) cfg.dataset.synthetic = true;
  cfg.validate();
  const auto report = pa::run_experiment(cfg, quiet ? nullptr : &std::cerr);
  if (report.statistics)
    std::cout << "TOST: " << pa::stats::to_string(report.statistics->tost.verdict) << " (mean difference "
              << pa::stats::format_double(report.statistics->tost.mean_diff) << ")\n";
  std::cout << "report written to " << cfg.output_dir.string() << '\n';
  return 0;
}

int cmd_synth(const std::string& output, std::size_t n_per_class, std::uint64_t seed) {
  const auto pool = pa::synth::generate_pool(pa::synth::default_classes(), n_per_class, seed);
  pa::save_pool_wav(pool, output);
  std::cout << pool.clips.size() << " clips written to " << output << '\n';
  return 0;
}

int cmd_spectrogram(const std::string& input, const std::string& output, std::size_t size) {
  pa::FeatureParams params;
  params.target_height = size;
  params.target_width = size;
  const auto mel = pa::mel_spectrogram(pa::prepare_clip(pa::load_wav(input)), params);
  const fs::path out(output);
  if (out.extension() == ".pgm")
    pa::write_grid_pgm(out, mel.values);
  else
    pa::write_grid_csv(out, mel.values);
  return 0;
}

int cmd_stats(const std::string& a_csv, const std::string& b_csv, double margin, std::size_t resamples,
              std::uint64_t seed) {
  const auto a = pa::stats::read_accuracy_csv(a_csv);
  const auto b = pa::stats::read_accuracy_csv(b_csv);
  const auto tost = pa::stats::tost_equivalence(a, b, margin);
  const auto boot = pa::stats::bootstrap_equivalence(a, b, margin, resamples, 0.90, seed);
  using pa::stats::format_double;
  std::cout << "mean_difference " << format_double(tost.mean_diff) << '\n'
            << "tost_ci_90 [" << format_double(tost.ci_low) << ", " << format_double(tost.ci_high) << "] "
            << pa::stats::to_string(tost.verdict) << '\n'
            << "bootstrap_ci_90 [" << format_double(boot.ci_low) << ", " << format_double(boot.ci_high) << "] "
            << pa::stats::to_string(boot.verdict) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot prototypical-network audio experiments"};
  app.require_subcommand(1);

  std::string config_path, output;
  std::optional<std::uint64_t> seed;
  bool synthetic = false, quiet = false;
  auto* run = app.add_subcommand("run", "Run the experiments described by a JSON config");
  run->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  run->add_option("--output", output, "Output directory (overrides the config)");
  run->add_option("--seed", seed, "Master seed (overrides the config)");
  run->add_flag("--synthetic", synthetic, "Use the built-in synthetic dataset");
  run->add_flag("-q,--quiet", quiet, "No progress output");

  std::string synth_out;
  std::size_t n_per_class = 100;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Write the synthetic dataset as WAV files");
  synth->add_option("--output", synth_out, "Root directory")->required();
  synth->add_option("--per-class", n_per_class, "Clips per class");
  synth->add_option("--seed", synth_seed, "Seed");

  std::string wav_in, grid_out;
  std::size_t size = 224;
  auto* spec = app.add_subcommand("spectrogram", "Log-mel spectrogram of one WAV file");
  spec->add_option("input", wav_in, "WAV file")->required()->check(CLI::ExistingFile);
  spec->add_option("output", grid_out, "Output .csv or .pgm")->required();
  spec->add_option("--size", size, "Square output resolution");

  std::string a_csv, b_csv;
  double margin = 15.0;
  std::size_t resamples = 10000;
  std::uint64_t stats_seed = 0;
  auto* st = app.add_subcommand("stats", "Equivalence tests on two per-episode accuracy CSVs");
  st->add_option("multiclass", a_csv, "accuracy_pct CSV")->required()->check(CLI::ExistingFile);
  st->add_option("binary", b_csv, "accuracy_pct CSV")->required()->check(CLI::ExistingFile);
  st->add_option("--margin", margin, "Equivalence margin in percentage points");
  st->add_option("--resamples", resamples, "Bootstrap resamples");
  st->add_option("--seed", stats_seed, "Bootstrap seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      if (config_path.empty() && !synthetic) {
        std::cerr << "error: run needs --config or --synthetic\n";
        return kExitConfig;
      }
      return cmd_run(config_path, output, seed, synthetic, quiet);
    }
    if (*synth) return cmd_synth(synth_out, n_per_class, synth_seed);
    if (*spec) return cmd_spectrogram(wav_in, grid_out, size);
    if (*st) return cmd_stats(a_csv, b_csv, margin, resamples, stats_seed);
  } catch (const pa::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == pa::ErrorCode::kConfig ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
