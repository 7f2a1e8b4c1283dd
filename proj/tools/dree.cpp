// Command-line front end: gen-scenario, run, eval-lib, metrics, plot.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "dree/io/artifacts.hpp"
#include "dree/io/bench.hpp"
#include "dree/io/scenario.hpp"
#include "dree/io/tsplib.hpp"
#include "dree/lifelong.hpp"
#include "dree/policy.hpp"
#include "dree/vrp.hpp"

namespace {

using namespace dree;

template <class T>
void set_if(std::optional<T>& dst, const std::optional<T>& src) {
  if (src) dst = src;
}

int gen_scenario(const std::string& profile, const std::string& problem, const std::vector<std::string>& order,
                 std::optional<int> epochs, std::optional<std::uint64_t> shuffle_seed, const std::string& out) {
  TaskSchedule s = io::parse_profile(profile) == io::Profile::Desk ? io::desk_scenario(io::parse_problem(problem))
                                                                   : io::full_scenario(io::parse_problem(problem));
  auto principals = s.principals;
  if (!order.empty()) {
    std::vector<PrincipalTask> picked;
    for (const auto& name : order) {
      auto it = std::find_if(principals.begin(), principals.end(), [&](const auto& p) { return p.name == name; });
      if (it == principals.end()) throw Error("unknown principal '" + name + "' for this profile");
      picked.push_back(*it);
    }
    principals = std::move(picked);
  } else if (shuffle_seed) {
    Rng rng(derive_seed(*shuffle_seed, 0));
    std::shuffle(principals.begin(), principals.end(), rng);
  }
  s = make_schedule(s.problem, std::move(principals), epochs.value_or(s.total_epochs));
  const std::string text = io::emit_scenario(s);
  if (out.empty() || out == "-")
    std::cout << text;
  else
    io::write_file_atomically(out, text);
  return 0;
}

int run_command(const io::RunConfig& config) {
  require(!config.output_dir.empty(), "--out is required");
  auto artifacts = io::run(config);
  auto files = io::emit_outputs(artifacts, config.output_dir, config.write_checkpoint);
  std::cout << "AP " << format_double(artifacts.metrics.ap) << "  AFB " << format_double(artifacts.metrics.afb)
            << "  AMFB " << format_double(artifacts.metrics.amfb) << "  ABPl " << format_double(artifacts.metrics.abpl)
            << '\n';
  for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
  std::cout << "wall clock " << artifacts.wall_clock_seconds << " s\n";
  return 0;
}

int eval_lib(const std::string& file, int restarts, std::uint64_t seed, const std::string& best_known_path,
             const std::string& checkpoint, int n_starts) {
  Instance inst = io::load_tsplib(file);
  std::cout << "instance " << inst.id() << " (" << (inst.is_cvrp() ? "cvrp" : "tsp") << ", " << inst.size()
            << " nodes)\n";
  std::optional<double> best;
  if (!best_known_path.empty()) {
    auto table = io::load_best_known(best_known_path);
    if (auto it = table.find(inst.id()); it != table.end()) best = it->second;
  }
  if (best) std::cout << "best known " << format_double(*best) << '\n';

  Rng rng(derive_seed(seed, 0));
  const double ref = reference_solve(inst, restarts, rng);
  std::cout << "reference (" << restarts << " restarts) " << format_double(ref);
  if (best) std::cout << "  gap " << format_double(optimality_gap(ref, *best)) << " %";
  std::cout << '\n';

  if (!checkpoint.empty()) {
    std::ifstream in(checkpoint);
    if (!in) throw Error("cannot open checkpoint '" + checkpoint + "'");
    const PolicyParams params = read_checkpoint(in);
    const double cost = multistart_greedy_cost(params, inst, n_starts);
    std::cout << "policy greedy (" << std::min(n_starts, inst.size()) << " starts) " << format_double(cost);
    if (best) std::cout << "  gap " << format_double(optimality_gap(cost, *best)) << " %";
    std::cout << '\n';
  }
  return 0;
}

int metrics_command(const std::string& curves_path) {
  auto curves = io::load_curves(curves_path);
  nlohmann::ordered_json j = io::metrics_json(compute_metrics(curves.ledger));
  std::cout << j.dump(2) << '\n';
  return 0;
}

int plot_command(const std::string& curves_path, const std::string& scenario_path, std::optional<int> interval,
                 const std::string& out) {
  auto curves = io::load_curves(curves_path);
  int m = interval.value_or(0);
  if (!scenario_path.empty()) m = io::load_scenario(scenario_path).interval;
  else if (!interval && curves.ledger.task_count() >= 2 && curves.ledger.total_epochs() % (curves.ledger.task_count() - 1) == 0)
    m = curves.ledger.total_epochs() / (curves.ledger.task_count() - 1);
  io::write_file_atomically(out, io::curves_svg(curves.ledger, curves.task_names, m));
  std::cout << "wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifelong routing-policy training with dual replay"};
  app.require_subcommand(1);

  // gen-scenario
  std::string gs_profile = "desk", gs_problem = "tsp", gs_out;
  std::vector<std::string> gs_order;
  std::optional<int> gs_epochs;
  std::optional<std::uint64_t> gs_shuffle;
  auto* gen = app.add_subcommand("gen-scenario", "Write a scenario file for a built-in profile");
  gen->add_option("--profile", gs_profile, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  gen->add_option("--problem", gs_problem, "tsp or cvrp")->check(CLI::IsMember({"tsp", "cvrp"}));
  gen->add_option("--order", gs_order, "principal names in training order")->delimiter(',');
  gen->add_option("--shuffle-seed", gs_shuffle, "random principal order from this seed");
  gen->add_option("--epochs", gs_epochs, "total epochs T");
  gen->add_option("--out,-o", gs_out, "output file (default stdout)");

  // run
  io::RunConfig rc;
  std::string rc_strategy = "dree", rc_profile = "desk";
  std::optional<int> rc_buffer, rc_lb, rc_ub, rc_m, rc_i, rc_t, rc_starts, rc_tests;
  auto* run = app.add_subcommand("run", "Train over a scenario and write curves, metrics and a plot");
  run->add_option("--scenario", rc.scenario_path, "scenario file (default: the profile's built-in scenario)");
  run->add_option("--strategy", rc_strategy,
                  "dree, finetune, behavior_only, instance_only, multitask, npir, nbr or nee");
  run->add_option("--seed", rc.seed, "training seed");
  run->add_option("--profile", rc_profile, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  run->add_option("--alpha", rc.alpha, "behaviour-replay weight")->check(CLI::NonNegativeNumber);
  run->add_option("--beta", rc.beta, "instance-replay weight")->check(CLI::NonNegativeNumber);
  run->add_option("--buffer", rc_buffer, "buffer capacity |B|")->check(CLI::PositiveNumber);
  run->add_option("--lb", rc_lb, "lower replay interval LB")->check(CLI::PositiveNumber);
  run->add_option("--ub", rc_ub, "upper replay interval UB")->check(CLI::PositiveNumber);
  run->add_option("--batch-size", rc_m, "instances per batch M")->check(CLI::PositiveNumber);
  run->add_option("--batches", rc_i, "batches per epoch I")->check(CLI::PositiveNumber);
  run->add_option("--epochs", rc_t, "total epochs T (overrides the scenario)")->check(CLI::NonNegativeNumber);
  run->add_option("--n-starts", rc_starts, "rollouts per instance")->check(CLI::Range(2, 1 << 20));
  run->add_option("--test-size", rc_tests, "test instances per principal task")->check(CLI::PositiveNumber);
  run->add_option("--test-seed", rc.test_seed, "seed of the shared test sets");
  run->add_flag("--episode-parity", rc.episode_parity, "give non-replaying strategies extra batches");
  run->add_option("--parity-batches", rc.parity_batches, "extra batches per epoch instead of a paired run")
      ->check(CLI::NonNegativeNumber);
  run->add_flag("--checkpoint", rc.write_checkpoint, "also write policy.ckpt");
  run->add_option("--out,-o", rc.output_dir, "output directory")->required();

  // eval-lib
  std::string el_file, el_best = "data/best_known.txt", el_ckpt;
  int el_restarts = 50, el_starts = 8;
  std::uint64_t el_seed = 0;
  auto* lib = app.add_subcommand("eval-lib", "Reference-solve a TSPLIB/CVRPLIB file and report gaps");
  lib->add_option("file", el_file, "EUC_2D instance file")->required()->check(CLI::ExistingFile);
  lib->add_option("--restarts", el_restarts, "nearest-neighbour + 2-opt restarts")->check(CLI::PositiveNumber);
  lib->add_option("--seed", el_seed, "restart seed");
  lib->add_option("--best-known", el_best, "best-known value table ('' to skip)");
  lib->add_option("--checkpoint", el_ckpt, "also evaluate a trained policy");
  lib->add_option("--n-starts", el_starts, "greedy starts for the policy")->check(CLI::PositiveNumber);

  // metrics
  std::string mt_curves;
  auto* met = app.add_subcommand("metrics", "Recompute AP/AFB/AMFB/ABPl from curves.csv");
  met->add_option("curves", mt_curves, "curves.csv")->required()->check(CLI::ExistingFile);

  // plot
  std::string pl_curves, pl_scenario, pl_out = "curves.svg";
  std::optional<int> pl_interval;
  auto* plot = app.add_subcommand("plot", "Render curves.csv as SVG");
  plot->add_option("curves", pl_curves, "curves.csv")->required()->check(CLI::ExistingFile);
  plot->add_option("--scenario", pl_scenario, "scenario file, for the principal spacing");
  plot->add_option("--interval", pl_interval, "principal spacing m in epochs")->check(CLI::NonNegativeNumber);
  plot->add_option("--out,-o", pl_out, "output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return gen_scenario(gs_profile, gs_problem, gs_order, gs_epochs, gs_shuffle, gs_out);
    if (*run) {
      rc.strategy = parse_strategy(rc_strategy);
      rc.profile = io::parse_profile(rc_profile);
      set_if(rc.buffer_capacity, rc_buffer);
      set_if(rc.lower, rc_lb);
      set_if(rc.upper, rc_ub);
      set_if(rc.batch_size, rc_m);
      set_if(rc.batches_per_epoch, rc_i);
      set_if(rc.epochs, rc_t);
      set_if(rc.n_starts, rc_starts);
      set_if(rc.test_size, rc_tests);
      return run_command(rc);
    }
    if (*lib) return eval_lib(el_file, el_restarts, el_seed, el_best, el_ckpt, el_starts);
    if (*met) return metrics_command(mt_curves);
    if (*plot) return plot_command(pl_curves, pl_scenario, pl_interval, pl_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
