// Acceptance gate: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dree/io/bench.hpp"
#include "dree/io/tsplib.hpp"
#include "dree/learner.hpp"
#include "dree/lifelong.hpp"
#include "dree/metrics.hpp"
#include "support.hpp"

using namespace dree;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome gradient_oracle() {
  Rng rng(101);
  double worst_drl = 0.0, worst_br = 0.0;
  int cases = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const bool cvrp = rep % 2 == 1;
    const int n = static_cast<int>(uniform_int(rng, 3, 8));
    auto params = fixtures::random_params(rng);
    std::vector<Instance> instances;
    for (int k = 0; k < 2; ++k)
      instances.push_back(cvrp ? fixtures::random_cvrp(n, rng, 10, "c" + std::to_string(k))
                               : fixtures::random_tsp(n, rng, "t" + std::to_string(k)));
    std::vector<const Instance*> ptrs;
    for (const auto& i : instances) ptrs.push_back(&i);
    auto rollouts = drl_loss_and_grad(params, std::span<const Instance* const>(ptrs), std::min(n, 4), rng).rollouts;
    auto drl = drl_loss_for_rollouts(params, ptrs, rollouts);
    worst_drl = std::max(worst_drl, fixtures::gradient_check(
                                        [&](const PolicyParams& p) { return drl_loss_for_rollouts(p, ptrs, rollouts).value; },
                                        params, drl.gradient));
    cases += 2;

    auto behaviour = fixtures::random_params(rng);
    std::vector<Experience> buffer;
    for (const auto& inst : instances) {
      auto traj = rollout(behaviour, inst, 0, RolloutMode::Sample, rng);
      buffer.push_back(Experience{inst, traj.cost, traj, 0, 0});
    }
    auto br = br_loss_and_grad(params, buffer);
    worst_br = std::max(worst_br, fixtures::gradient_check(
                                      [&](const PolicyParams& p) { return br_loss_and_grad(p, buffer).value; }, params,
                                      br.gradient));
    cases += 2;
  }
  const bool ok = worst_drl < 1e-4 && worst_br < 1e-4;
  return {ok, std::to_string(cases) + " instances/experiences, worst relative error policy-gradient " + num(worst_drl) +
                  ", behaviour-replay " + num(worst_br)};
}

Outcome reservoir_uniformity() {
  const int capacity = 64, offered = 1000, seeds = 200;
  std::vector<int> kept(offered, 0);
  for (int s = 0; s < seeds; ++s) {
    ExperienceBuffer buffer(capacity, 1);
    Rng rng(static_cast<std::uint64_t>(s));
    for (int k = 0; k < offered; ++k) {
      ExperienceBatch b(1);
      b.front().origin_epoch = k;
      buffer.offer(std::move(b), rng);
    }
    for (const auto& e : buffer.entries()) ++kept[static_cast<std::size_t>(e.front().origin_epoch)];
  }
  const double p = static_cast<double>(capacity) / offered;
  const double mean = seeds * p, sd = std::sqrt(seeds * p * (1 - p));
  int outside = 0, worst = 0;
  double chi2 = 0.0;
  for (int c : kept) {
    if (std::abs(c - mean) > 3 * sd) ++outside;
    if (std::abs(c - mean) > std::abs(worst - mean)) worst = c;
    chi2 += (c - mean) * (c - mean) / (mean * (1 - p));
  }
  return {outside == 0, std::to_string(outside) + " of 1000 entries outside " + num(mean) + " +/- " + num(3 * sd) +
                            " (most extreme count " + std::to_string(worst) + "); dispersion chi2/dof " +
                            num(chi2 / offered)};
}

struct DeskRuns {
  std::vector<LifelongResult> dree, finetune, npir, nbr, nee;
  double seconds = 0.0;
};

DeskRuns desk_runs() {
  const auto t0 = std::chrono::steady_clock::now();
  DeskRuns out;
  io::RunConfig base;
  auto resolved = io::resolve(base);
  const auto tests = make_test_sets(resolved.schedule, resolved.test_size, base.test_seed);
  auto with = [&](StrategyKind kind, double extra = 0.0) {
    LifelongConfig c = resolved.lifelong;
    c.strategy = StrategyConfig::of(kind);
    c.extra_batches_per_epoch = extra;
    return c;
  };
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto d = run_lifelong(resolved.schedule, with(StrategyKind::Dree), tests, seed);
    const double parity = d.mean_replays_per_epoch();
    out.dree.push_back(std::move(d));
    out.finetune.push_back(run_lifelong(resolved.schedule, with(StrategyKind::FineTuning, parity), tests, seed));
    out.npir.push_back(run_lifelong(resolved.schedule, with(StrategyKind::AblationNoPir), tests, seed));
    out.nbr.push_back(run_lifelong(resolved.schedule, with(StrategyKind::AblationNoBr), tests, seed));
    out.nee.push_back(run_lifelong(resolved.schedule, with(StrategyKind::AblationNoEe), tests, seed));
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::vector<double> metric_of(const std::vector<LifelongResult>& runs, double LifelongMetrics::*field) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(compute_metrics(r.ledger).*field);
  return v;
}

Outcome ee_monotonicity(const DeskRuns& runs) {
  long long checks = 0, replaced = 0, entries = 0;
  for (const auto& r : runs.dree) {
    checks += r.enhancement_checks;
    for (int e : r.enhancements_per_epoch) replaced += e;
    for (const auto& batch : r.buffer.entries())
      for (const auto& e : batch) {
        ++entries;
        if (std::abs(evaluate(e.instance, e.best.actions()) - e.best_cost) > 1e-9)
          return {false, "a buffered objective disagrees with its stored trajectory"};
      }
  }
  // train_batch throws when a replacement count differs from M+, and
  // ee_update throws when a stored objective would increase.
  return {checks > 0, std::to_string(checks) + " enhancement steps matched M+ across 5 desk runs, " +
                          std::to_string(replaced) + " experiences replaced, " + std::to_string(entries) +
                          " final buffered objectives consistent"};
}

Outcome interval_schedule() {
  for (int improved = 0; improved <= 32; ++improved) {
    int n = next_interval(improved, 32, 4, 1);
    if (n < 1 || n > 4) return {false, "N=" + std::to_string(n) + " at M+=" + std::to_string(improved)};
  }
  const int at_full = next_interval(32, 32, 4, 1), at_zero = next_interval(0, 32, 4, 1);
  return {at_full == 1 && at_zero == 4,
          "1 <= N <= 4 for M+ in 0..32; N(M+=32)=" + std::to_string(at_full) + ", N(M+=0)=" + std::to_string(at_zero)};
}

Outcome oracle_equivalence() {
  Rng rng(505);
  int equal = 0, below = 0;
  for (int k = 0; k < 200; ++k) {
    auto inst = fixtures::random_tsp(static_cast<int>(uniform_int(rng, 3, 8)), rng);
    const double exact = brute_force_optimal(inst).cost;
    const double ref = reference_solve(inst, 20, rng);
    if (ref < exact - 1e-9) ++below;
    if (std::abs(ref - exact) <= 1e-9 * exact) ++equal;
  }
  Rng one(1);
  auto inst = fixtures::random_tsp(8, one);
  const double bf = brute_force_optimal(inst).cost;
  const bool zero = optimality_gap(bf, bf) == 0.0;
  return {below == 0 && equal >= 120 && zero, std::to_string(equal) + "/200 reference solutions optimal, " +
                                                   std::to_string(below) + " below the exact optimum, gap(bf,bf)" +
                                                   (zero ? " = 0" : " != 0")};
}

Outcome table_ordering(const DeskRuns& runs) {
  const double d_ap = median(metric_of(runs.dree, &LifelongMetrics::ap));
  const double f_ap = median(metric_of(runs.finetune, &LifelongMetrics::ap));
  const double d_afb = median(metric_of(runs.dree, &LifelongMetrics::afb));
  const double f_afb = median(metric_of(runs.finetune, &LifelongMetrics::afb));
  const double d_amfb = median(metric_of(runs.dree, &LifelongMetrics::amfb));
  const double f_amfb = median(metric_of(runs.finetune, &LifelongMetrics::amfb));
  return {d_ap <= f_ap && d_afb <= f_afb && d_amfb <= f_amfb,
          "median over 5 seeds, DREE vs fine-tuning (episode parity): AP " + num(d_ap) + " vs " + num(f_ap) + ", AFB " +
              num(d_afb) + " vs " + num(f_afb) + ", AMFB " + num(d_amfb) + " vs " + num(f_amfb) + "; " +
              num(runs.seconds, 3) + " s for all 25 desk runs"};
}

Outcome ablation_direction(const DeskRuns& runs) {
  const double d = median(metric_of(runs.dree, &LifelongMetrics::ap));
  std::string detail = "median AP DREE " + num(d);
  bool ok = true;
  std::vector<std::string> ties;
  for (auto [name, set] : {std::pair<const char*, const std::vector<LifelongResult>*>{"nPIR", &runs.npir},
                           {"nBR", &runs.nbr},
                           {"nEE", &runs.nee}}) {
    const double a = median(metric_of(*set, &LifelongMetrics::ap));
    detail += std::string(", ") + name + " " + num(a);
    if (d > a) {
      if (d - a <= 0.1)
        ties.push_back(name);
      else
        ok = false;
    }
  }
  if (!ties.empty()) {
    detail += "; tie within 0.1 gap points reported for";
    for (const auto& t : ties) detail += " " + t;
  }
  return {ok, detail};
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "dree-acceptance-determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  auto invoke = [&](const std::string& sub) {
    const std::string cmd = std::string("\"") + DREE_CLI + "\" run --strategy dree --seed 7 --out \"" +
                            (root / sub).string() + "\" > \"" + (root / (sub + ".log")).string() + "\" 2>&1";
    return std::system(cmd.c_str());
  };
  if (invoke("a") != 0 || invoke("b") != 0) return {false, "run subcommand failed"};
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const bool csv = slurp(root / "a" / "curves.csv") == slurp(root / "b" / "curves.csv");
  const bool json = slurp(root / "a" / "metrics.json") == slurp(root / "b" / "metrics.json");
  const bool nonempty = !slurp(root / "a" / "curves.csv").empty();
  return {csv && json && nonempty, std::string("two CLI runs (desk, dree, seed 7): curves.csv ") +
                                       (csv ? "identical" : "differ") + ", metrics.json " + (json ? "identical" : "differ")};
}

Outcome schedule_formulas() {
  PrincipalTask a, b;
  a.name = "a";
  a.scale = 20;
  b.name = "b";
  b.scale = 50;
  auto s = make_schedule(ProblemKind::Tsp, {a, b}, 200);
  const int s0 = schedule_task(s, 0).scale, s1 = schedule_task(s, 100).scale, s2 = schedule_task(s, 200).scale;
  for (int t = 0; t <= 200; ++t) {
    auto spec = schedule_task(s, t);
    if (spec.count_prev + spec.count_next != spec.scale) return {false, "counts do not sum at t=" + std::to_string(t)};
  }
  return {s0 == 20 && s1 == 35 && s2 == 50, "S at t=0,100,200: " + std::to_string(s0) + ", " + std::to_string(s1) +
                                                 ", " + std::to_string(s2) + "; counts sum to S_t on all 201 epochs"};
}

Outcome metrics_identities() {
  MetricsLedger hand(1, 3);
  const double curve[] = {5, 3, 4, 6};
  for (int t = 0; t < 4; ++t) hand.record(t, 0, curve[t]);
  auto m = compute_metrics(hand);
  const bool exact = m.ap == 6 && m.afb == 3 && m.amfb == 3 && m.abpl == 3;
  Rng rng(10);
  int violations = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    const int k = static_cast<int>(uniform_int(rng, 1, 6)), last = static_cast<int>(uniform_int(rng, 0, 30));
    MetricsLedger l(k, last);
    for (int t = 0; t <= last; ++t)
      for (int i = 0; i < k; ++i) l.record(t, i, uniform(rng, -5, 50));
    auto r = compute_metrics(l);
    if (!(r.amfb >= r.afb && r.afb >= 0 && r.ap >= r.abpl)) ++violations;
  }
  return {exact && violations == 0, "[5,3,4,6] -> AP " + num(m.ap) + ", AFB " + num(m.afb) + ", AMFB " + num(m.amfb) +
                                        ", ABPl " + num(m.abpl) + "; " + std::to_string(violations) +
                                        " violations on 10^4 random ledgers"};
}

Outcome lib_ingestion() {
  const fs::path file = fs::path(DREE_TEST_DATA) / "kroA100.tsp";
  if (!fs::exists(file)) return {false, "instance file " + file.string() + " not available"};
  auto inst = io::load_tsplib(file.string());
  const double optimum = 22350.05 / 1.0502;
  Rng rng(derive_seed(0, 0));
  const double ref = reference_solve(inst, 50, rng);
  const double gap = optimality_gap(ref, optimum);
  return {inst.size() == 100 && gap <= 15.0,
          std::to_string(inst.size()) + " nodes, reference " + num(ref, 7) + ", gap " + num(gap) + " % vs " + num(optimum, 7)};
}

}  // namespace

int main() {
  report(1, "gradient oracle", gradient_oracle);
  report(2, "reservoir uniformity", reservoir_uniformity);
  std::printf("     (running 25 desk-profile runs for criteria 3, 6 and 7)\n");
  std::fflush(stdout);
  DeskRuns runs;
  std::string desk_error;
  try {
    runs = desk_runs();
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  auto needs_runs = [&](std::function<Outcome()> f) {
    return [f, &desk_error]() -> Outcome {
      if (!desk_error.empty()) return {false, "desk runs aborted: " + desk_error};
      return f();
    };
  };
  report(3, "EE monotonicity", needs_runs([&] { return ee_monotonicity(runs); }));
  report(4, "interval schedule", interval_schedule);
  report(5, "oracle equivalence", oracle_equivalence);
  report(6, "desk ordering vs fine-tuning", needs_runs([&] { return table_ordering(runs); }));
  report(7, "ablation direction", needs_runs([&] { return ablation_direction(runs); }));
  report(8, "determinism", determinism);
  report(9, "schedule formulas", schedule_formulas);
  report(10, "metrics identities", metrics_identities);
  report(11, "LIB ingestion", lib_ingestion);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
