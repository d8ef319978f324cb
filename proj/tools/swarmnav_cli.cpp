// swarmnav: train, evaluate and replay swarm-navigation agents.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "swarmnav/config.hpp"
#include "swarmnav/errors.hpp"
#include "swarmnav/experiment.hpp"
#include "swarmnav/simd/kernels.hpp"
#include "swarmnav/trajectory.hpp"

namespace fs = std::filesystem;
using namespace swarmnav;

namespace {

harness::KeyValues parse_overrides(const std::vector<std::string>& raw) {
  harness::KeyValues kv;
  for (const auto& s : raw) kv.push_back(harness::parse_override(s));
  return kv;
}

fs::path default_config_dir() {
  if (const char* dir = std::getenv("SWARMNAV_CONFIG_DIR")) return dir;
#ifdef SWARMNAV_SOURCE_CONFIG_DIR
  return SWARMNAV_SOURCE_CONFIG_DIR;
#else
  return "configs";
#endif
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& raw_overrides,
              const std::optional<std::uint64_t>& seed, const std::string& resume, bool quiet) {
  auto overrides = parse_overrides(raw_overrides);
  if (seed) overrides.emplace_back("seed", std::to_string(*seed));
  harness::TrainingOptions opts;
  opts.verbose = !quiet;
  harness::ExperimentConfig cfg;
  if (!resume.empty()) {
    opts.resume_from = resume;
  } else {
    cfg = harness::load_config(config_path, overrides);
  }
  const auto result = harness::run_training(cfg, opts);
  std::printf("run %s: %zu episodes, smoothed return %.4f (window %d)\n", result.config.run_name().c_str(),
              result.episodes.size(), result.smoothed, result.config.smoothing_window);
  std::printf("logs: %s\ncheckpoint: %s\n", (result.output_dir / "episodes.csv").string().c_str(),
              result.checkpoint_path.string().c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, int episodes, bool deterministic,
             const std::vector<std::string>& raw_overrides, const std::string& dump, const std::string& svg) {
  harness::InferenceOptions opts;
  opts.episodes = episodes;
  opts.deterministic = deterministic;
  opts.overrides = parse_overrides(raw_overrides);
  if (!dump.empty()) opts.dump_path = dump;
  if (!svg.empty()) {
    if (dump.empty()) throw ConfigError("--svg needs --dump");
    opts.svg_dir = svg;
  }
  const auto ckpt = harness::read_checkpoint(checkpoint);
  const auto result = harness::run_inference(ckpt, opts);
  std::printf("episodes %d  mean absorbed %.4f  (%s policy)\n", episodes, result.mean_return,
              deterministic ? "deterministic" : "stochastic");
  return 0;
}

int cmd_replay(const std::string& dump_path, const std::string& svg) {
  const auto dump = harness::read_trajectory(dump_path);
  const auto report = harness::replay(dump);
  std::printf("replayed %ld episodes, %ld steps, %ld mismatches\n", report.episodes, report.steps, report.mismatches);
  if (!svg.empty()) harness::render_svg(dump, svg);
  if (report.mismatches > 0) {
    std::fprintf(stderr, "first mismatch at %s\n", report.first_mismatch.c_str());
    return 1;
  }
  return 0;
}

int cmd_list(const fs::path& dir) {
  std::printf("%-10s  %-22s  %s\n", "experiment", "encoding", "description");
  for (const auto& e : harness::experiments()) {
    std::printf("%-10.*s  %-22.*s  %.*s\n", static_cast<int>(e.id.size()), e.id.data(),
                static_cast<int>(obs::to_string(e.encoding).size()), obs::to_string(e.encoding).data(),
                static_cast<int>(e.description.size()), e.description.data());
  }
  std::printf("\nshipped configs in %s:\n", dir.string().c_str());
  std::vector<fs::path> files;
  if (fs::is_directory(dir)) {
    for (const auto& f : fs::directory_iterator(dir)) {
      if (f.path().extension() == ".cfg") files.push_back(f.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) std::printf("  %s\n", f.filename().string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Swarm navigation with PPO/RPO"};
  app.require_subcommand(1);
  app.add_flag_callback("--print-isa", [] { std::printf("simd: %s\n", simd::isa_name(simd::active().isa).data()); },
                        "Print the selected SIMD kernel set");

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string resume;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train an agent");
  auto* config_opt = train->add_option("--config", config_path, "Config file (key = value)")->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Run seed");
  train->add_option("--override", overrides, "key=value, repeatable");
  train->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile)->excludes(config_opt);
  train->add_flag("--quiet", quiet, "No per-update progress");

  std::string checkpoint;
  int episodes = 100;
  bool deterministic = false;
  std::string dump;
  std::string svg;
  auto* eval = app.add_subcommand("eval", "Roll out a trained agent");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes)->check(CLI::PositiveNumber);
  eval->add_flag("--deterministic", deterministic, "Use the Gaussian mean as the action");
  eval->add_option("--override", overrides, "Environment override key=value, repeatable");
  eval->add_option("--dump", dump, "Write a line-delimited JSON trajectory");
  eval->add_option("--svg", svg, "Directory for per-episode SVG plots (needs --dump)");

  std::string dump_in;
  std::string replay_svg;
  auto* rep = app.add_subcommand("replay", "Re-simulate a trajectory dump and check it");
  rep->add_option("--dump", dump_in)->required()->check(CLI::ExistingFile);
  rep->add_option("--svg", replay_svg, "Directory for per-episode SVG plots");

  std::string config_dir = default_config_dir().string();
  auto* list = app.add_subcommand("list-experiments", "Show experiment variants and shipped configs");
  list->add_option("--dir", config_dir, "Config directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      if (config_path.empty() && resume.empty()) throw ConfigError("train needs --config or --resume");
      return cmd_train(config_path, overrides, seed, resume, quiet);
    }
    if (*eval) return cmd_eval(checkpoint, episodes, deterministic, overrides, dump, svg);
    if (*rep) return cmd_replay(dump_in, replay_svg);
    if (*list) return cmd_list(config_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
