#pragma once

// Run orchestration: a RunConfig resolved against a profile, fixed test sets,
// the lifelong run and the artifact file set.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dree/error.hpp"
#include "dree/io/artifacts.hpp"
#include "dree/io/scenario.hpp"
#include "dree/lifelong.hpp"
#include "dree/metrics.hpp"
#include "dree/policy.hpp"
#include "dree/taskgen.hpp"

namespace dree::io {

enum class Profile { Desk, Full };

inline Profile parse_profile(std::string_view name) {
  if (name == "desk") return Profile::Desk;
  if (name == "full") return Profile::Full;
  throw Error("unknown profile '" + std::string(name) + "'");
}

inline std::string_view to_string(Profile p) { return p == Profile::Desk ? "desk" : "full"; }

/// Unset optionals take the profile's value.
struct RunConfig {
  std::string scenario_path;  // empty selects the profile's built-in scenario
  StrategyKind strategy = StrategyKind::Dree;
  std::uint64_t seed = 0;
  Profile profile = Profile::Desk;
  std::optional<double> alpha, beta;
  std::optional<int> buffer_capacity, lower, upper, batch_size, batches_per_epoch, epochs, n_starts;
  std::optional<int> test_size;
  std::uint64_t test_seed = 12345;
  bool episode_parity = false;
  std::optional<double> parity_batches;  // skips the paired run when given
  std::string output_dir;
  bool write_checkpoint = false;
};

struct ResolvedRun {
  TaskSchedule schedule;
  LifelongConfig lifelong;
  int test_size = 0;
};

/// desk: |B| = 32, M = 16, I = 16, 64 test instances per task.
/// full: |B| = 256, M = 32, I = 128, 1000 test instances per task.
inline ResolvedRun resolve(const RunConfig& c) {
  const bool desk = c.profile == Profile::Desk;
  ResolvedRun r;
  if (!c.scenario_path.empty())
    r.schedule = load_scenario(c.scenario_path);
  else
    r.schedule = desk ? desk_scenario() : full_scenario();
  if (c.epochs) {
    auto principals = r.schedule.principals;
    r.schedule = make_schedule(r.schedule.problem, std::move(principals), *c.epochs);
  }

  LifelongConfig& l = r.lifelong;
  l.strategy = StrategyConfig::of(c.strategy);
  if (c.alpha) l.strategy.alpha = *c.alpha;
  if (c.beta) l.strategy.beta = *c.beta;
  l.buffer_capacity = c.buffer_capacity.value_or(desk ? 32 : 256);
  l.batch_size = c.batch_size.value_or(desk ? 16 : 32);
  l.batches_per_epoch = c.batches_per_epoch.value_or(desk ? 16 : 128);
  l.n_starts = c.n_starts.value_or(8);
  l.lower = c.lower.value_or(1);
  l.upper = c.upper.value_or(4);
  l.validate();
  r.test_size = c.test_size.value_or(desk ? 64 : 1000);
  require(r.test_size >= 1, "test size must be positive");
  return r;
}

struct RunArtifacts {
  std::vector<std::string> task_names;
  TaskSchedule schedule;
  MetricsLedger ledger;
  LifelongMetrics metrics;
  nlohmann::ordered_json config_echo;
  std::uint64_t seed = 0;
  double wall_clock_seconds = 0.0;  // not persisted: files must be identical across reruns
  std::vector<int> replays_per_epoch;
  std::vector<int> enhancements_per_epoch;
  double parity_batches = 0.0;
  PolicyParams params;
};

inline nlohmann::ordered_json config_echo(const RunConfig& c, const ResolvedRun& r, double parity_batches) {
  const LifelongConfig& l = r.lifelong;
  nlohmann::ordered_json j;
  j["scenario"] = c.scenario_path;
  j["problem"] = std::string(to_string(r.schedule.problem));
  j["strategy"] = std::string(to_string(l.strategy.kind));
  j["profile"] = std::string(to_string(c.profile));
  j["alpha"] = l.strategy.alpha;
  j["beta"] = l.strategy.beta;
  if (l.strategy.fixed_interval) j["fixed_interval"] = *l.strategy.fixed_interval;
  j["buffer_capacity"] = l.buffer_capacity;
  j["lower"] = l.lower;
  j["upper"] = l.upper;
  j["batch_size"] = l.batch_size;
  j["batches_per_epoch"] = l.batches_per_epoch;
  j["epochs"] = r.schedule.total_epochs;
  j["n_starts"] = l.n_starts;
  j["learning_rate"] = l.learning_rate;
  j["test_size"] = r.test_size;
  j["test_seed"] = c.test_seed;
  j["episode_parity"] = c.episode_parity;
  j["extra_batches_per_epoch"] = parity_batches;
  return j;
}

/// Episode parity applies to strategies that never re-solve buffered
/// instances; they get extra new-task batches equal to the replays per epoch
/// of a DREE run with the same seed.
inline bool parity_applies(StrategyKind kind) { return !StrategyConfig::of(kind).runs_instance_replay(); }

inline RunArtifacts run(const RunConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  ResolvedRun r = resolve(config);
  const auto tests = make_test_sets(r.schedule, r.test_size, config.test_seed);

  double parity = 0.0;
  if (config.episode_parity && parity_applies(config.strategy)) {
    if (config.parity_batches) {
      parity = *config.parity_batches;
    } else {
      LifelongConfig paired = r.lifelong;
      paired.strategy = StrategyConfig::of(StrategyKind::Dree);
      if (config.alpha) paired.strategy.alpha = *config.alpha;
      if (config.beta) paired.strategy.beta = *config.beta;
      parity = run_lifelong(r.schedule, paired, tests, config.seed).mean_replays_per_epoch();
    }
  }
  r.lifelong.extra_batches_per_epoch = parity;

  LifelongResult result = run_lifelong(r.schedule, r.lifelong, tests, config.seed);

  RunArtifacts a;
  for (const auto& p : r.schedule.principals) a.task_names.push_back(p.name);
  a.schedule = r.schedule;
  a.metrics = compute_metrics(result.ledger);
  a.ledger = std::move(result.ledger);
  a.config_echo = config_echo(config, r, parity);
  a.seed = config.seed;
  a.replays_per_epoch = result.replays_per_epoch;
  a.enhancements_per_epoch = result.enhancements_per_epoch;
  a.parity_batches = parity;
  a.params = result.params;
  a.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return a;
}

inline std::string metrics_document(const RunArtifacts& a) {
  nlohmann::ordered_json j;
  j["metrics"] = metrics_json(a.metrics);
  j["seed"] = a.seed;
  j["config"] = a.config_echo;
  j["tasks"] = a.task_names;
  j["replays_per_epoch"] = a.replays_per_epoch;
  j["enhancements_per_epoch"] = a.enhancements_per_epoch;
  return j.dump(2) + "\n";
}

/// curves.csv, metrics.json, curves.svg and optionally policy.ckpt.
inline std::vector<std::filesystem::path> emit_outputs(const RunArtifacts& a, const std::filesystem::path& dir,
                                                       bool with_checkpoint = false) {
  require(a.ledger.complete(), "artifacts incomplete");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());

  std::vector<OutputFile> files{
      {dir / "curves.csv", curves_csv(a.ledger, a.task_names)},
      {dir / "metrics.json", metrics_document(a)},
      {dir / "curves.svg", curves_svg(a.ledger, a.task_names, a.schedule.interval)},
  };
  if (with_checkpoint) {
    std::ostringstream ckpt;
    write_checkpoint(ckpt, a.params);
    files.push_back({dir / "policy.ckpt", ckpt.str()});
  }
  write_files_atomically(files);
  std::vector<std::filesystem::path> paths;
  for (const auto& f : files) paths.push_back(f.path);
  return paths;
}

}  // namespace dree::io
