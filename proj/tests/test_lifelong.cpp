#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "dree/lifelong.hpp"
#include "support.hpp"

using namespace dree;

namespace {

TaskSchedule tiny_schedule(ProblemKind problem = ProblemKind::Tsp, int epochs = 4) {
  std::vector<PrincipalTask> p(3);
  const DistributionKind kinds[] = {DistributionKind::Uniform, DistributionKind::Cluster, DistributionKind::Grid};
  for (int i = 0; i < 3; ++i) {
    p[static_cast<std::size_t>(i)].name = "p" + std::to_string(i);
    p[static_cast<std::size_t>(i)].distribution = kinds[i];
    p[static_cast<std::size_t>(i)].scale = 5 + i;
  }
  return make_schedule(problem, p, epochs);
}

LifelongConfig tiny_config(StrategyKind kind) {
  LifelongConfig c;
  c.strategy = StrategyConfig::of(kind);
  c.buffer_capacity = 6;
  c.batch_size = 4;
  c.batches_per_epoch = 5;
  c.n_starts = 4;
  return c;
}

ExperienceBatch tagged_batch(int tag, int size) {
  ExperienceBatch b(static_cast<std::size_t>(size));
  for (auto& e : b) e.origin_epoch = tag;
  return b;
}

}  // namespace

TEST(Buffer, FillsThenHoldsCapacity) {
  ExperienceBuffer buffer(3, 2);
  Rng rng(1);
  EXPECT_THROW(buffer.sample(rng), Error);
  EXPECT_THROW(buffer.offer(tagged_batch(0, 3), rng), Error);
  for (int k = 0; k < 10; ++k) buffer.offer(tagged_batch(k, 2), rng);
  EXPECT_EQ(buffer.size(), 3);
  EXPECT_EQ(buffer.seen(), 10);
}

TEST(Buffer, ReservoirRetentionIsUniform) {
  const int capacity = 8, offered = 40, seeds = 4000;
  std::vector<int> kept(offered, 0);
  for (int s = 0; s < seeds; ++s) {
    ExperienceBuffer buffer(capacity, 1);
    Rng rng(derive_seed(77, static_cast<std::uint64_t>(s)));
    for (int k = 0; k < offered; ++k) buffer.offer(tagged_batch(k, 1), rng);
    for (const auto& e : buffer.entries()) ++kept[static_cast<std::size_t>(e.front().origin_epoch)];
  }
  const double p = static_cast<double>(capacity) / offered;
  const double sd = std::sqrt(seeds * p * (1 - p));
  for (int k = 0; k < offered; ++k) EXPECT_NEAR(kept[static_cast<std::size_t>(k)], seeds * p, 4 * sd) << "entry " << k;
}

TEST(Buffer, SamplingIsUniformOverEntries) {
  ExperienceBuffer buffer(5, 1);
  Rng rng(2);
  for (int k = 0; k < 5; ++k) buffer.offer(tagged_batch(k, 1), rng);
  std::map<int, int> hits;
  const int draws = 50000;
  for (int d = 0; d < draws; ++d) ++hits[buffer.sample(rng).front().origin_epoch];
  const double sd = std::sqrt(draws * 0.2 * 0.8);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(hits[k], draws * 0.2, 4 * sd);
}

TEST(Interval, FormulaExtremesAndMidpoint) {
  EXPECT_EQ(next_interval(32, 32, 4, 1), 1);
  EXPECT_EQ(next_interval(0, 32, 4, 1), 4);
  EXPECT_EQ(next_interval(16, 32, 4, 1), 3);  // 2.5 rounds up
  for (int improved = 0; improved <= 32; ++improved) {
    int n = next_interval(improved, 32, 4, 1);
    EXPECT_GE(n, 1);
    EXPECT_LE(n, 4);
    if (improved) {
      EXPECT_LE(n, next_interval(improved - 1, 32, 4, 1));
    }
  }
  EXPECT_THROW(next_interval(33, 32, 4, 1), Error);
  EXPECT_THROW(next_interval(0, 32, 1, 4), Error);
}

TEST(Interval, AdaptiveScheduleFiresAfterInterval) {
  ReplaySchedule s(4, 1);
  s.hold(1);
  EXPECT_TRUE(s.due(2));  // initial interval is LB
  s.fired(2, 0, 32);      // nothing improved: wait UB
  EXPECT_EQ(s.interval(), 4);
  EXPECT_FALSE(s.due(5));
  EXPECT_TRUE(s.due(6));
  s.fired(6, 32, 32);
  EXPECT_EQ(s.interval(), 1);
  EXPECT_TRUE(s.due(7));
}

TEST(Interval, FixedScheduleAccumulatesFractionalInterval) {
  ReplaySchedule s(4, 1, kAblationInterval);
  s.hold(0);
  std::vector<long long> fired;
  for (long long b = 1; b <= 400; ++b)
    if (s.due(b)) {
      fired.push_back(b);
      s.fired(b, 0, 32);
    }
  EXPECT_EQ(fired.front(), 4);
  EXPECT_NEAR(400.0 / static_cast<double>(fired.size()), kAblationInterval, 0.05);
}

TEST(Enhancement, ReplacesOnlyStrictImprovements) {
  Rng rng(3);
  auto inst = fixtures::random_tsp(5, rng, "e");
  auto traj = rollout(PolicyParams::zeros(), inst, 0, RolloutMode::Sample, rng);
  ExperienceBatch batch{Experience{inst, traj.cost, traj, 0, 0}, Experience{inst, traj.cost, traj, 0, 0}};
  auto same = traj;
  auto better = traj;
  better.cost = traj.cost - 0.1;
  EXPECT_EQ(ee_update(batch, {same, better}), 1);
  EXPECT_EQ(batch[0].enhancement_count, 0);
  EXPECT_EQ(batch[1].best_cost, traj.cost - 0.1);
  EXPECT_EQ(batch[1].enhancement_count, 1);
  auto worse = traj;
  worse.cost += 1.0;
  EXPECT_EQ(ee_update(batch, {worse, worse}), 0);
  EXPECT_EQ(batch[1].best_cost, traj.cost - 0.1);
  auto foreign = traj;
  foreign.instance_id = "other";
  EXPECT_THROW(ee_update(batch, {foreign, traj}), Error);
  EXPECT_THROW(ee_update(batch, {traj}), Error);
}

TEST(Strategies, ComponentTable) {
  auto dree = StrategyConfig::of(StrategyKind::Dree);
  EXPECT_TRUE(dree.uses_behavior_replay() && dree.runs_instance_replay() && dree.uses_enhancement());
  EXPECT_FALSE(dree.fixed_interval);
  auto ft = StrategyConfig::of(StrategyKind::FineTuning);
  EXPECT_FALSE(ft.uses_buffer());
  auto npir = StrategyConfig::of(StrategyKind::AblationNoPir);
  EXPECT_EQ(npir.effective_beta(), 0.0);
  EXPECT_TRUE(npir.uses_enhancement());
  EXPECT_EQ(*npir.fixed_interval, kAblationInterval);
  auto nbr = StrategyConfig::of(StrategyKind::AblationNoBr);
  EXPECT_EQ(nbr.effective_alpha(), 0.0);
  auto nee = StrategyConfig::of(StrategyKind::AblationNoEe);
  EXPECT_FALSE(nee.uses_enhancement());
  EXPECT_TRUE(nee.uses_behavior_replay() && nee.runs_instance_replay());
  EXPECT_FALSE(StrategyConfig::of(StrategyKind::BehaviorOnly).runs_instance_replay());
  EXPECT_EQ(StrategyConfig::of(StrategyKind::InstanceOnly).effective_alpha(), 0.0);
  for (auto name : {"dree", "finetune", "behavior_only", "instance_only", "multitask", "npir", "nbr", "nee"})
    EXPECT_EQ(to_string(parse_strategy(name)), name);
  EXPECT_THROW(parse_strategy("bogus"), Error);
}

TEST(Run, ZeroWeightsReduceToFineTuning) {
  auto schedule = tiny_schedule();
  auto tests = make_test_sets(schedule, 4, 5);
  auto config = tiny_config(StrategyKind::Dree);
  config.strategy.alpha = 0.0;
  config.strategy.beta = 0.0;
  auto dree = run_lifelong(schedule, config, tests, 11);
  auto ft = run_lifelong(schedule, tiny_config(StrategyKind::FineTuning), tests, 11);
  EXPECT_EQ(dree.params, ft.params);
  EXPECT_GT(dree.mean_replays_per_epoch(), 0.0);
}

TEST(Run, SameSeedSameLedger) {
  auto schedule = tiny_schedule(ProblemKind::Cvrp);
  auto tests = make_test_sets(schedule, 4, 5);
  auto a = run_lifelong(schedule, tiny_config(StrategyKind::Dree), tests, 3);
  auto b = run_lifelong(schedule, tiny_config(StrategyKind::Dree), tests, 3);
  EXPECT_EQ(a.params, b.params);
  for (int t = 0; t <= 4; ++t)
    for (int i = 0; i < 3; ++i) EXPECT_EQ(a.ledger.at(t, i), b.ledger.at(t, i));
  EXPECT_EQ(a.replays_per_epoch, b.replays_per_epoch);
}

TEST(Run, ZeroEpochsRecordsUntrainedRowOnly) {
  auto schedule = tiny_schedule(ProblemKind::Tsp, 0);
  auto tests = make_test_sets(schedule, 3, 5);
  auto r = run_lifelong(schedule, tiny_config(StrategyKind::Dree), tests, 1);
  EXPECT_EQ(r.ledger.total_epochs(), 0);
  EXPECT_TRUE(r.ledger.complete());
  EXPECT_EQ(r.params, PolicyParams::zeros());
}

TEST(Run, EveryStrategyCompletes) {
  auto schedule = tiny_schedule(ProblemKind::Cvrp);
  auto tests = make_test_sets(schedule, 3, 5);
  for (auto kind : {StrategyKind::Dree, StrategyKind::FineTuning, StrategyKind::BehaviorOnly, StrategyKind::InstanceOnly,
                    StrategyKind::MultiTaskRef, StrategyKind::AblationNoPir, StrategyKind::AblationNoBr,
                    StrategyKind::AblationNoEe}) {
    auto r = run_lifelong(schedule, tiny_config(kind), tests, 2);
    EXPECT_TRUE(r.ledger.complete()) << to_string(kind);
    const bool replays = StrategyConfig::of(kind).runs_instance_replay();
    EXPECT_EQ(r.mean_replays_per_epoch() > 0.0, replays) << to_string(kind);
    if (!StrategyConfig::of(kind).uses_enhancement()) {
      for (int e : r.enhancements_per_epoch) EXPECT_EQ(e, 0);
    }
  }
}

TEST(Run, EpisodeParityAddsBatches) {
  auto schedule = tiny_schedule();
  auto tests = make_test_sets(schedule, 2, 5);
  auto config = tiny_config(StrategyKind::FineTuning);
  config.extra_batches_per_epoch = 1.5;
  auto r = run_lifelong(schedule, config, tests, 2);
  EXPECT_EQ(r.batches_per_epoch, (std::vector<int>{6, 7, 6, 7}));
}

TEST(Run, TestSetsDependOnlyOnTheTestSeed) {
  auto schedule = tiny_schedule();
  auto a = make_test_sets(schedule, 3, 9);
  auto b = make_test_sets(schedule, 3, 9);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].instances, b[i].instances);
    EXPECT_EQ(a[i].reference_costs, b[i].reference_costs);
    EXPECT_EQ(a[i].instances.front().size(), 5 + static_cast<int>(i));
  }
}
