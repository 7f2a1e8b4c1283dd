#pragma once

// The lifelong-learning engine: reservoir experience buffer, problem-instance
// replay on an adaptive interval, behaviour replay, experience enhancement,
// the batch/epoch training loop and the comparison strategies.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dree/error.hpp"
#include "dree/experience.hpp"
#include "dree/learner.hpp"
#include "dree/metrics.hpp"
#include "dree/policy.hpp"
#include "dree/random.hpp"
#include "dree/taskgen.hpp"
#include "dree/vrp.hpp"

namespace dree {

// ---------------------------------------------------------------------------
// Experience buffer

/// Fixed-capacity reservoir of experience batches. Every batch ever offered
/// has the same probability capacity / seen of being held.
class ExperienceBuffer {
public:
  ExperienceBuffer() = default;
  ExperienceBuffer(int capacity, int batch_size) : capacity_(capacity), batch_size_(batch_size) {
    require(capacity >= 1, "buffer capacity must be positive");
    require(batch_size >= 1, "buffer batch size must be positive");
  }

  int capacity() const { return capacity_; }
  int batch_size() const { return batch_size_; }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  long long seen() const { return seen_; }
  const std::vector<ExperienceBatch>& entries() const { return entries_; }

  void offer(ExperienceBatch entry, Rng& rng) {
    if (static_cast<int>(entry.size()) != batch_size_) throw Error("experience batch has wrong size");
    ++seen_;
    if (size() < capacity_) {
      entries_.push_back(std::move(entry));
      return;
    }
    // Replace with probability capacity / seen, uniformly among held entries.
    auto j = uniform_int(rng, 0, seen_ - 1);
    if (j < capacity_) entries_[static_cast<std::size_t>(j)] = std::move(entry);
  }

  /// Uniformly chosen entry, by reference so enhancement writes through. The
  /// reference is invalidated by the next offer().
  ExperienceBatch& sample(Rng& rng) {
    if (empty()) throw Error("buffer empty");
    return entries_[static_cast<std::size_t>(uniform_int(rng, 0, size() - 1))];
  }

private:
  int capacity_ = 1;
  int batch_size_ = 1;
  long long seen_ = 0;
  std::vector<ExperienceBatch> entries_;
};

inline void buffer_offer(ExperienceBuffer& buffer, ExperienceBatch entry, Rng& rng) {
  buffer.offer(std::move(entry), rng);
}

inline ExperienceBatch& buffer_sample(ExperienceBuffer& buffer, Rng& rng) { return buffer.sample(rng); }

// ---------------------------------------------------------------------------
// Replay interval

/// Batches to wait before the next replay: UB - (M+/M)(UB - LB), rounded
/// half up. More improvement on the replayed batch means replaying sooner.
inline int next_interval(int improved, int batch, int upper, int lower) {
  require(batch >= 1 && improved >= 0 && improved <= batch, "improved count out of range");
  require(lower >= 1 && lower <= upper, "interval bounds out of range");
  const long long num = static_cast<long long>(upper) * batch - static_cast<long long>(improved) * (upper - lower);
  return static_cast<int>(round_half_up(num, batch));
}

/// When the next problem-instance replay fires. Batches are numbered
/// globally across epochs. The adaptive form fires once `interval` batches
/// have passed since the last replay; the fixed form accumulates a possibly
/// fractional interval and fires whenever the batch count reaches it.
class ReplaySchedule {
public:
  ReplaySchedule() = default;
  ReplaySchedule(int upper, int lower, std::optional<double> fixed = std::nullopt)
      : upper_(upper), lower_(lower), interval_(lower), fixed_(fixed) {
    require(lower >= 1 && lower <= upper, "interval bounds out of range");
    if (fixed_) require(*fixed_ > 0.0, "fixed interval must be positive");
    next_fire_ = fixed_.value_or(0.0);
  }

  int upper() const { return upper_; }
  int lower() const { return lower_; }
  int interval() const { return interval_; }
  long long last_replay() const { return last_; }
  std::optional<double> fixed() const { return fixed_; }

  /// Called for batches seen while the buffer is still empty.
  void hold(long long batch) {
    last_ = batch;
    if (fixed_) next_fire_ = static_cast<double>(batch) + *fixed_;
  }

  bool due(long long batch) const {
    if (fixed_) return static_cast<double>(batch) >= next_fire_;
    return batch - last_ >= interval_;
  }

  void fired(long long batch, int improved, int batch_size) {
    last_ = batch;
    if (fixed_) {
      next_fire_ += *fixed_;
      return;
    }
    interval_ = next_interval(improved, batch_size, upper_, lower_);
    if (interval_ < lower_ || interval_ > upper_) throw Error("replay interval left its bounds");
  }

private:
  int upper_ = 4;
  int lower_ = 1;
  int interval_ = 1;
  long long last_ = 0;
  std::optional<double> fixed_;
  double next_fire_ = 0.0;
};

// ---------------------------------------------------------------------------
// Replay and enhancement

struct PirResult {
  LossReport report;
  int improved = 0;  // M+: strictly better than the buffered objective
  std::vector<Trajectory> best;
};

/// Re-solves the buffered instances with the current policy and applies the
/// ordinary policy-gradient loss to them.
inline PirResult pir_step(const PolicyParams& params, const ExperienceBatch& entry, int n_starts, Rng& rng) {
  require(!entry.empty(), "empty experience batch");
  std::vector<const Instance*> instances;
  int min_size = entry.front().instance.size();
  for (const auto& e : entry) {
    instances.push_back(&e.instance);
    min_size = std::min(min_size, e.instance.size());
  }
  DrlResult drl = drl_loss_and_grad(params, instances, std::min(n_starts, min_size), rng);
  PirResult out{std::move(drl.report), 0, std::move(drl.best)};
  for (std::size_t k = 0; k < entry.size(); ++k)
    if (out.best[k].cost < entry[k].best_cost) ++out.improved;
  return out;
}

/// Replaces every buffered experience whose new objective is strictly
/// better. Returns how many were replaced.
inline int ee_update(ExperienceBatch& entry, const std::vector<Trajectory>& candidates) {
  if (candidates.size() != entry.size()) throw Error("enhancement candidates misaligned with batch");
  int replaced = 0;
  for (std::size_t k = 0; k < entry.size(); ++k) {
    auto& e = entry[k];
    const auto& cand = candidates[k];
    if (cand.instance_id != e.instance.id()) throw Error("enhancement candidates misaligned with batch");
    if (!(cand.cost < e.best_cost)) continue;
    const double before = e.best_cost;
    e.best_cost = cand.cost;
    e.best = cand;
    ++e.enhancement_count;
    if (!(e.best_cost <= before)) throw Error("stored objective increased");
    ++replaced;
  }
  return replaced;
}

// ---------------------------------------------------------------------------
// Strategies

enum class StrategyKind {
  Dree,
  FineTuning,
  BehaviorOnly,
  InstanceOnly,
  MultiTaskRef,
  AblationNoPir,
  AblationNoBr,
  AblationNoEe,
};

inline std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Dree: return "dree";
    case StrategyKind::FineTuning: return "finetune";
    case StrategyKind::BehaviorOnly: return "behavior_only";
    case StrategyKind::InstanceOnly: return "instance_only";
    case StrategyKind::MultiTaskRef: return "multitask";
    case StrategyKind::AblationNoPir: return "npir";
    case StrategyKind::AblationNoBr: return "nbr";
    case StrategyKind::AblationNoEe: return "nee";
  }
  return "?";
}

inline StrategyKind parse_strategy(std::string_view name) {
  for (auto k : {StrategyKind::Dree, StrategyKind::FineTuning, StrategyKind::BehaviorOnly,
                 StrategyKind::InstanceOnly, StrategyKind::MultiTaskRef, StrategyKind::AblationNoPir,
                 StrategyKind::AblationNoBr, StrategyKind::AblationNoEe}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown strategy '" + std::string(name) + "'");
}

inline constexpr double kAblationInterval = 3.56;

struct StrategyConfig {
  StrategyKind kind = StrategyKind::Dree;
  double alpha = 100.0;
  double beta = 1.0;
  std::optional<double> fixed_interval;

  /// Defaults per kind; the ablations replay on a fixed 3.56-batch cadence.
  static StrategyConfig of(StrategyKind kind) {
    StrategyConfig c;
    c.kind = kind;
    if (kind == StrategyKind::AblationNoPir || kind == StrategyKind::AblationNoBr ||
        kind == StrategyKind::AblationNoEe)
      c.fixed_interval = kAblationInterval;
    return c;
  }

  bool uses_buffer() const { return kind != StrategyKind::FineTuning && kind != StrategyKind::MultiTaskRef; }
  bool uses_behavior_replay() const {
    return uses_buffer() && kind != StrategyKind::InstanceOnly && kind != StrategyKind::AblationNoBr;
  }
  bool runs_instance_replay() const { return uses_buffer() && kind != StrategyKind::BehaviorOnly; }
  bool uses_enhancement() const {
    return kind == StrategyKind::Dree || kind == StrategyKind::AblationNoPir || kind == StrategyKind::AblationNoBr;
  }
  /// Weight on the replay loss; the no-PIR ablation still re-solves for
  /// enhancement but learns nothing from it.
  double effective_beta() const { return kind == StrategyKind::AblationNoPir ? 0.0 : beta; }
  double effective_alpha() const { return uses_behavior_replay() ? alpha : 0.0; }

  void validate() const {
    require(alpha >= 0.0 && beta >= 0.0, "alpha and beta must be non-negative");
    if (fixed_interval) require(*fixed_interval > 0.0, "fixed interval must be positive");
  }
};

struct LifelongConfig {
  StrategyConfig strategy;
  int buffer_capacity = 256;
  int batch_size = 32;
  int batches_per_epoch = 128;
  int n_starts = 8;
  int lower = 1;
  int upper = 4;
  double learning_rate = 1e-2;
  double extra_batches_per_epoch = 0.0;  // episode parity for non-replaying baselines
  FeatureConfig features;

  void validate() const {
    strategy.validate();
    require(buffer_capacity >= 1, "buffer capacity must be positive");
    require(batch_size >= 1, "batch size must be positive");
    require(batches_per_epoch >= 1, "batches per epoch must be positive");
    require(n_starts >= 2, "n_starts must be at least 2");
    require(lower >= 1 && lower <= upper, "interval bounds out of range");
    require(learning_rate > 0.0, "learning rate must be positive");
    require(extra_batches_per_epoch >= 0.0, "extra batches must be non-negative");
  }
};

// ---------------------------------------------------------------------------
// Evaluation

/// Fixed test instances of one principal task with their reference costs.
struct TestSet {
  std::vector<Instance> instances;
  std::vector<double> reference_costs;
};

inline constexpr int kReferenceRestarts = 20;

/// Reference cost used as the gap denominator: exact when the instance is
/// small enough, otherwise the best of 20 nearest-neighbour + 2-opt runs.
inline double reference_cost(const Instance& inst, Rng& rng) {
  if (exact_oracle_applies(inst)) return brute_force_optimal(inst).cost;
  return reference_solve(inst, kReferenceRestarts, rng);
}

/// One test set per principal task, drawn from `test_seed` only, so every
/// strategy run on the same scenario sees identical instances.
inline std::vector<TestSet> make_test_sets(const TaskSchedule& schedule, int per_task, std::uint64_t test_seed) {
  require(per_task >= 1, "test set size must be positive");
  std::vector<TestSet> sets;
  for (int i = 0; i < schedule.task_count(); ++i) {
    const TaskSpec spec = principal_spec(schedule, i);
    Rng sample_rng(derive_seed(test_seed, 2 * static_cast<std::uint64_t>(i)));
    Rng solve_rng(derive_seed(test_seed, 2 * static_cast<std::uint64_t>(i) + 1));
    TestSet set;
    for (int k = 0; k < per_task; ++k) {
      set.instances.push_back(
          sample_instance(spec, sample_rng, "test-" + std::to_string(i) + "-" + std::to_string(k)));
      set.reference_costs.push_back(reference_cost(set.instances.back(), solve_rng));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

/// Best greedy cost over starts 0..min(n_starts, n)-1.
inline double multistart_greedy_cost(const PolicyParams& params, const Instance& inst, int n_starts) {
  Rng unused(0);
  double best = 0.0;
  const int starts = std::min(n_starts, inst.size());
  for (int s = 0; s < starts; ++s) {
    double c = rollout(params, inst, s, RolloutMode::Greedy, unused).cost;
    if (s == 0 || c < best) best = c;
  }
  return best;
}

inline double mean_test_gap(const PolicyParams& params, const TestSet& set, int n_starts) {
  double total = 0.0;
  for (std::size_t k = 0; k < set.instances.size(); ++k)
    total += optimality_gap(multistart_greedy_cost(params, set.instances[k], n_starts), set.reference_costs[k]);
  return total / static_cast<double>(set.instances.size());
}

// ---------------------------------------------------------------------------
// Training loop

/// Everything that evolves during a run. Three independent random streams
/// keep new-task sampling, new-task solving and buffer/replay work from
/// perturbing one another.
struct RunState {
  PolicyParams params;
  OptimizerState optimizer;
  ExperienceBuffer buffer;
  ReplaySchedule replay;
  long long batch_counter = 0;
  Rng task_rng;
  Rng solve_rng;
  Rng replay_rng;
  double extra_carry = 0.0;

  // Per-epoch counters, reset by train_epoch.
  int epoch_batches = 0;
  int epoch_replays = 0;
  int epoch_enhancements = 0;
  long long total_enhancement_checks = 0;

  static RunState start(const LifelongConfig& config, std::uint64_t seed) {
    config.validate();
    RunState s;
    s.params = PolicyParams::zeros(config.features);
    s.optimizer = OptimizerState::for_dimension(s.params.dimension(), config.learning_rate);
    s.buffer = ExperienceBuffer(config.buffer_capacity, config.batch_size);
    s.replay = ReplaySchedule(config.upper, config.lower, config.strategy.fixed_interval);
    s.task_rng.seed(derive_seed(seed, 1));
    s.solve_rng.seed(derive_seed(seed, 2));
    s.replay_rng.seed(derive_seed(seed, 3));
    return s;
  }
};

/// One optimisation step on a batch of new-task instances, including the
/// buffer work the strategy calls for.
inline void train_batch(RunState& state, const std::vector<Instance>& batch, int epoch, const LifelongConfig& config) {
  const StrategyConfig& strategy = config.strategy;
  const int dim = state.params.dimension();
  ++state.batch_counter;
  ++state.epoch_batches;

  int n_starts = config.n_starts;
  for (const auto& inst : batch) n_starts = std::min(n_starts, inst.size());
  DrlResult drl = drl_loss_and_grad(state.params, std::span<const Instance>(batch), n_starts, state.solve_rng);

  LossReport br = LossReport::zero(dim);
  LossReport pir = LossReport::zero(dim);
  std::optional<PirResult> replay;
  ExperienceBatch* entry = nullptr;

  if (strategy.uses_buffer()) {
    if (state.buffer.empty()) {
      state.replay.hold(state.batch_counter);
    } else {
      entry = &state.buffer.sample(state.replay_rng);
      if (strategy.uses_behavior_replay()) br = br_loss_and_grad(state.params, *entry);
      if (strategy.runs_instance_replay() && state.replay.due(state.batch_counter)) {
        replay = pir_step(state.params, *entry, config.n_starts, state.replay_rng);
        state.replay.fired(state.batch_counter, replay->improved, static_cast<int>(entry->size()));
        pir = replay->report;
        ++state.epoch_replays;
      }
    }
  }

  LossReport total = combine_losses(drl.report, br, pir, strategy.effective_alpha(), strategy.effective_beta());
  std::tie(state.optimizer, state.params) = optimizer_step(std::move(state.optimizer), std::move(state.params), total.gradient);

  if (!strategy.uses_buffer()) return;

  // Enhance before offering: an offer may overwrite the sampled slot.
  if (replay && strategy.uses_enhancement()) {
    int replaced = ee_update(*entry, replay->best);
    if (replaced != replay->improved) throw Error("enhancement count differs from replay improvement count");
    state.epoch_enhancements += replaced;
    ++state.total_enhancement_checks;
  }

  ExperienceBatch fresh;
  fresh.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k)
    fresh.push_back(Experience{batch[k], drl.best[k].cost, drl.best[k], epoch, 0});
  state.buffer.offer(std::move(fresh), state.replay_rng);
}

inline std::vector<Instance> sample_batch(const TaskSpec& task, int size, Rng& rng, long long batch_index) {
  std::vector<Instance> batch;
  batch.reserve(static_cast<std::size_t>(size));
  for (int k = 0; k < size; ++k)
    batch.push_back(sample_instance(task, rng, "b" + std::to_string(batch_index) + "-" + std::to_string(k)));
  return batch;
}

/// I batches on the epoch's task, plus any episode-parity extra batches.
inline void train_epoch(RunState& state, const TaskSpec& task, const LifelongConfig& config) {
  state.epoch_batches = state.epoch_replays = state.epoch_enhancements = 0;
  state.extra_carry += config.extra_batches_per_epoch;
  const int extra = static_cast<int>(std::floor(state.extra_carry));
  state.extra_carry -= extra;
  for (int b = 0; b < config.batches_per_epoch + extra; ++b) {
    auto batch = sample_batch(task, config.batch_size, state.task_rng, state.batch_counter + 1);
    train_batch(state, batch, task.epoch, config);
  }
}

/// Multi-task reference: every batch comes from a uniformly drawn epoch.
inline void train_epoch_multitask(RunState& state, const TaskSchedule& schedule, int epoch,
                                  const LifelongConfig& config) {
  state.epoch_batches = state.epoch_replays = state.epoch_enhancements = 0;
  state.extra_carry += config.extra_batches_per_epoch;
  const int extra = static_cast<int>(std::floor(state.extra_carry));
  state.extra_carry -= extra;
  for (int b = 0; b < config.batches_per_epoch + extra; ++b) {
    int t = static_cast<int>(uniform_int(state.task_rng, 0, schedule.total_epochs));
    auto batch = sample_batch(schedule_task(schedule, t), config.batch_size, state.task_rng, state.batch_counter + 1);
    train_batch(state, batch, epoch, config);
  }
}

struct LifelongResult {
  PolicyParams params;
  MetricsLedger ledger;
  std::vector<int> replays_per_epoch;      // entry t-1 for epoch t
  std::vector<int> batches_per_epoch;
  std::vector<int> enhancements_per_epoch;
  long long enhancement_checks = 0;        // ee_update calls matched against M+
  ExperienceBuffer buffer;

  double mean_replays_per_epoch() const {
    if (replays_per_epoch.empty()) return 0.0;
    double total = 0.0;
    for (int r : replays_per_epoch) total += r;
    return total / static_cast<double>(replays_per_epoch.size());
  }
};

inline void record_evaluation(MetricsLedger& ledger, int t, const PolicyParams& params,
                              const std::vector<TestSet>& tests, int n_starts) {
  for (int i = 0; i < static_cast<int>(tests.size()); ++i)
    ledger.record(t, i, mean_test_gap(params, tests[static_cast<std::size_t>(i)], n_starts));
}

/// Trains over epochs 1..T and evaluates on every principal test set after
/// each epoch (row 0 is the untrained policy).
inline LifelongResult run_lifelong(const TaskSchedule& schedule, const LifelongConfig& config,
                                   const std::vector<TestSet>& tests, std::uint64_t seed) {
  require(static_cast<int>(tests.size()) == schedule.task_count(), "one test set per principal task required");
  RunState state = RunState::start(config, seed);
  LifelongResult result;
  result.ledger = MetricsLedger(schedule.task_count(), schedule.total_epochs);
  record_evaluation(result.ledger, 0, state.params, tests, config.n_starts);

  for (int t = 1; t <= schedule.total_epochs; ++t) {
    if (config.strategy.kind == StrategyKind::MultiTaskRef)
      train_epoch_multitask(state, schedule, t, config);
    else
      train_epoch(state, schedule_task(schedule, t), config);
    result.replays_per_epoch.push_back(state.epoch_replays);
    result.batches_per_epoch.push_back(state.epoch_batches);
    result.enhancements_per_epoch.push_back(state.epoch_enhancements);
    record_evaluation(result.ledger, t, state.params, tests, config.n_starts);
  }
  result.params = state.params;
  result.enhancement_checks = state.total_enhancement_checks;
  result.buffer = std::move(state.buffer);
  return result;
}

}  // namespace dree
