#pragma once

// Linear-in-features softmax construction policy: per-step action
// distributions, rollouts, replay at buffered states and a text checkpoint.

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dree/error.hpp"
#include "dree/random.hpp"
#include "dree/vrp.hpp"

namespace dree {

inline constexpr int kFeatureCount = 7;

enum Feature : int {
  kBias = 0,
  kNegDistCurrent,   // -|current - candidate|
  kNegDistAnchor,    // -|candidate - depot| (CVRP) or -|candidate - centroid| (TSP)
  kNegDistCentroid,  // -|candidate - centroid|
  kVisitedFraction,
  kDemandRatio,      // CVRP only
  kDepotReturn,      // CVRP only: 1 when choosing the candidate forces a reset
};

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames{
    "bias", "neg_dist_current", "neg_dist_anchor", "neg_dist_centroid",
    "visited_fraction", "demand_ratio", "depot_return"};

using FeatureVector = std::array<double, kFeatureCount>;

struct FeatureConfig {
  std::array<bool, kFeatureCount> active{true, true, true, true, true, true, true};

  int dimension() const {
    int d = 0;
    for (bool a : active) d += a ? 1 : 0;
    return d;
  }
  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

struct PolicyParams {
  FeatureConfig config;
  std::vector<double> weights;

  static PolicyParams zeros(FeatureConfig config = {}) {
    return PolicyParams{config, std::vector<double>(static_cast<std::size_t>(config.dimension()), 0.0)};
  }

  int dimension() const { return static_cast<int>(weights.size()); }

  void validate() const {
    require(static_cast<int>(weights.size()) == config.dimension(), "weight length does not match feature config");
    for (double w : weights) require(std::isfinite(w), "non-finite policy weight");
  }
  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

namespace detail {

inline FeatureVector raw_features(const ConstructionState& s, int candidate, Point centroid) {
  const Instance& inst = *s.instance;
  const Point p = inst.node(candidate);
  FeatureVector f{};
  f[kBias] = 1.0;
  if (s.current != kDepot)
    f[kNegDistCurrent] = -euclidean(inst.node(s.current), p);
  else if (inst.is_cvrp())
    f[kNegDistCurrent] = -euclidean(inst.depot(), p);
  f[kNegDistAnchor] = -euclidean(p, inst.is_cvrp() ? inst.depot() : centroid);
  f[kNegDistCentroid] = -euclidean(p, centroid);
  f[kVisitedFraction] = s.visited_fraction();
  if (inst.is_cvrp()) {
    f[kDemandRatio] = static_cast<double>(inst.demand(candidate)) / static_cast<double>(inst.capacity());
    f[kDepotReturn] = implies_depot_return(s, candidate) ? 1.0 : 0.0;
  }
  return f;
}

}  // namespace detail

/// Raw feature vector of a feasible candidate. Distances use the normalised
/// coordinates, so they lie in [0, sqrt(2)]; CVRP slots are zero for TSP.
inline FeatureVector features(const ConstructionState& s, int candidate) {
  const Instance& inst = *s.instance;
  auto mask = feasible_actions(s);
  if (candidate < 0 || candidate >= inst.size() || !mask[static_cast<std::size_t>(candidate)])
    throw Error("infeasible candidate");
  return detail::raw_features(s, candidate, inst.centroid());
}

/// Probabilities over the feasible actions of one state, aligned with
/// `actions` (ascending node index). `features` holds the active feature rows,
/// row-major |actions| x dimension, for gradient computations.
struct ActionDistribution {
  std::vector<int> actions;
  std::vector<double> probs;
  std::vector<double> features;
  int dimension = 0;

  const double* feature_row(std::size_t k) const {
    return features.data() + k * static_cast<std::size_t>(dimension);
  }
};

inline ActionDistribution action_distribution(const PolicyParams& params, const ConstructionState& s) {
  require(!s.terminal(), "no actions at terminal state");
  ActionDistribution d;
  d.actions = feasible_nodes(s);
  d.dimension = params.dimension();
  const std::size_t n = d.actions.size();
  d.features.reserve(n * static_cast<std::size_t>(d.dimension));
  std::vector<double> logits(n, 0.0);
  const Point centroid = s.instance->centroid();
  for (std::size_t k = 0; k < n; ++k) {
    FeatureVector full = detail::raw_features(s, d.actions[k], centroid);
    std::size_t w = 0;
    for (int j = 0; j < kFeatureCount; ++j) {
      if (!params.config.active[static_cast<std::size_t>(j)]) continue;
      d.features.push_back(full[static_cast<std::size_t>(j)]);
      logits[k] += params.weights[w++] * full[static_cast<std::size_t>(j)];
    }
  }
  double top = logits[0];
  for (double z : logits) top = std::max(top, z);
  double total = 0.0;
  d.probs.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    d.probs[k] = std::exp(logits[k] - top);
    total += d.probs[k];
  }
  for (double& p : d.probs) p /= total;
  return d;
}

/// One buffered (state, behaviour) pair. The state itself is implied by the
/// instance and the action prefix; probabilities are stored in single
/// precision.
struct StepRecord {
  std::vector<int> feasible;
  std::vector<float> probs;
  int chosen = 0;

  int action() const { return feasible[static_cast<std::size_t>(chosen)]; }
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// A complete rollout. The first step is the forced start node, recorded as a
/// point mass, so there is one step per customer.
struct Trajectory {
  std::string instance_id;
  int start = 0;
  std::vector<StepRecord> steps;
  double cost = 0.0;

  std::vector<int> actions() const {
    std::vector<int> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.action());
    return out;
  }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

enum class RolloutMode { Sample, Greedy };

namespace detail {

inline StepRecord to_record(const ActionDistribution& d, std::size_t chosen) {
  StepRecord r;
  r.feasible = d.actions;
  r.probs.assign(d.probs.begin(), d.probs.end());
  r.chosen = static_cast<int>(chosen);
  return r;
}

inline std::size_t pick(const std::vector<double>& probs, RolloutMode mode, Rng& rng) {
  if (mode == RolloutMode::Greedy) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
      if (probs[k] > probs[best]) best = k;
    return best;
  }
  double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  return probs.size() - 1;
}

}  // namespace detail

/// Constructs a full solution. The first action is forced to `start`; later
/// actions are sampled (Sample) or the most probable with lowest-index ties
/// (Greedy). Greedy never touches `rng`.
inline Trajectory rollout(const PolicyParams& params, const Instance& inst, int start,
                          RolloutMode mode, Rng& rng) {
  require(start >= 0 && start < inst.size(), "invalid start node");
  Trajectory traj;
  traj.instance_id = inst.id();
  traj.start = start;
  traj.steps.reserve(static_cast<std::size_t>(inst.size()));

  ConstructionState s = initial_state(inst);
  traj.steps.push_back(StepRecord{{start}, {1.0f}, 0});
  advance(s, start);
  while (!s.terminal()) {
    ActionDistribution d = action_distribution(params, s);
    std::size_t k = detail::pick(d.probs, mode, rng);
    traj.steps.push_back(detail::to_record(d, k));
    advance(s, d.actions[k]);
  }
  traj.cost = s.cost;
  return traj;
}

/// Rebuilds every state along `actions` and returns the policy's
/// distribution at each one (the forced first step included as a point
/// mass).
inline std::vector<ActionDistribution> replay_distributions(const PolicyParams& params, const Instance& inst,
                                                            int start, const std::vector<int>& actions) {
  if (actions.empty() || actions.front() != start || static_cast<int>(actions.size()) != inst.size())
    throw Error("buffered trajectory incompatible with instance");
  std::vector<ActionDistribution> out;
  out.reserve(actions.size());
  ConstructionState s = initial_state(inst);
  try {
    advance(s, start);
    ActionDistribution first;
    first.actions = {start};
    first.probs = {1.0};
    first.dimension = params.dimension();
    first.features.assign(static_cast<std::size_t>(params.dimension()), 0.0);
    out.push_back(std::move(first));
    for (std::size_t k = 1; k < actions.size(); ++k) {
      out.push_back(action_distribution(params, s));
      advance(s, actions[k]);
    }
  } catch (const Error&) {
    throw Error("buffered trajectory incompatible with instance");
  }
  return out;
}

/// Replays a buffered trajectory and checks that every recorded feasible set
/// is reproduced exactly.
inline std::vector<ActionDistribution> replay_distributions(const PolicyParams& params, const Instance& inst,
                                                            const Trajectory& traj) {
  auto out = replay_distributions(params, inst, traj.start, traj.actions());
  for (std::size_t k = 0; k < out.size(); ++k)
    if (out[k].actions != traj.steps[k].feasible) throw Error("buffered trajectory incompatible with instance");
  return out;
}

// Checkpoint format (text, one token group per line):
//   dree-policy 1
//   features <7 flags 0/1>
//   weights <count>
//   <weight, 17 significant digits>   (one per line)

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline void write_checkpoint(std::ostream& out, const PolicyParams& params) {
  params.validate();
  out << "dree-policy 1\nfeatures";
  for (bool a : params.config.active) out << ' ' << (a ? 1 : 0);
  out << "\nweights " << params.weights.size() << '\n';
  for (double w : params.weights) out << format_double(w) << '\n';
}

inline PolicyParams read_checkpoint(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  require(in && tag == "dree-policy", "not a policy checkpoint");
  require(version == 1, "unsupported checkpoint version");
  PolicyParams params;
  in >> tag;
  require(in && tag == "features", "checkpoint: missing features line");
  for (auto& a : params.config.active) {
    int flag = -1;
    in >> flag;
    require(in && (flag == 0 || flag == 1), "checkpoint: malformed feature flags");
    a = flag == 1;
  }
  std::size_t count = 0;
  in >> tag >> count;
  require(in && tag == "weights", "checkpoint: missing weights line");
  params.weights.resize(count);
  for (auto& w : params.weights) {
    std::string token;
    in >> token;
    auto res = std::from_chars(token.data(), token.data() + token.size(), w);
    require(in && res.ec == std::errc() && res.ptr == token.data() + token.size(), "checkpoint: malformed weight");
  }
  params.validate();
  return params;
}

}  // namespace dree
