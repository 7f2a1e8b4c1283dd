#pragma once

// Training losses with analytic gradients: the multi-start shared-baseline
// policy gradient, the confidence-weighted behaviour-replay KL term, their
// weighted combination and an adaptive-moment optimizer.

#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "dree/error.hpp"
#include "dree/experience.hpp"
#include "dree/policy.hpp"
#include "dree/random.hpp"
#include "dree/vrp.hpp"

namespace dree {

struct LossReport {
  double value = 0.0;
  std::vector<double> gradient;
  std::vector<double> costs;  // per-instance best rollout cost, when applicable

  static LossReport zero(int dimension) {
    return LossReport{0.0, std::vector<double>(static_cast<std::size_t>(dimension), 0.0), {}};
  }
};

/// Sum over steps of log pi(a_t | s_t) for a fixed action sequence, with its
/// gradient. The forced first step contributes nothing.
struct LogProb {
  double value = 0.0;
  std::vector<double> gradient;
};

inline LogProb trajectory_log_prob(const PolicyParams& params, const Instance& inst,
                                   const std::vector<int>& actions) {
  const auto dists = replay_distributions(params, inst, actions.front(), actions);
  LogProb lp{0.0, std::vector<double>(static_cast<std::size_t>(params.dimension()), 0.0)};
  for (std::size_t t = 1; t < dists.size(); ++t) {
    const auto& d = dists[t];
    std::size_t chosen = 0;
    while (d.actions[chosen] != actions[t]) ++chosen;
    lp.value += std::log(d.probs[chosen]);
    // grad log softmax = phi(chosen) - E_p[phi]
    const double* row = d.feature_row(chosen);
    for (int j = 0; j < d.dimension; ++j) lp.gradient[static_cast<std::size_t>(j)] += row[j];
    for (std::size_t k = 0; k < d.actions.size(); ++k) {
      const double* r = d.feature_row(k);
      for (int j = 0; j < d.dimension; ++j) lp.gradient[static_cast<std::size_t>(j)] -= d.probs[k] * r[j];
    }
  }
  return lp;
}

/// Policy-gradient loss for fixed rollouts: rollouts[i] are the multi-start
/// rollouts of instances[i]. The baseline is the mean cost of the instance's
/// own rollouts, so shifting every cost of an instance leaves the result
/// unchanged.
inline LossReport drl_loss_for_rollouts(const PolicyParams& params, std::span<const Instance* const> instances,
                                        const std::vector<std::vector<Trajectory>>& rollouts) {
  require(instances.size() == rollouts.size(), "rollout groups do not match instances");
  LossReport report = LossReport::zero(params.dimension());
  if (instances.empty()) return report;
  std::size_t total = 0;
  for (const auto& group : rollouts) total += group.size();
  require(total > 0, "no rollouts");
  const double scale = 1.0 / static_cast<double>(total);

  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& group = rollouts[i];
    // Offsetting from the first cost makes identical costs give exactly zero advantage.
    const double first = group.front().cost;
    double spread = 0.0;
    for (const auto& r : group) spread += r.cost - first;
    const double baseline = first + spread / static_cast<double>(group.size());

    double best = group.front().cost;
    for (const auto& r : group) {
      best = std::min(best, r.cost);
      const double advantage = -(r.cost - baseline);
      if (advantage == 0.0) continue;
      LogProb lp = trajectory_log_prob(params, *instances[i], r.actions());
      report.value -= scale * advantage * lp.value;
      for (std::size_t j = 0; j < lp.gradient.size(); ++j)
        report.gradient[j] -= scale * advantage * lp.gradient[j];
    }
    report.costs.push_back(best);
  }
  return report;
}

struct DrlResult {
  LossReport report;
  std::vector<Trajectory> best;                   // best rollout per instance
  std::vector<std::vector<Trajectory>> rollouts;  // all rollouts per instance
};

/// Samples `n_starts` rollouts from distinct random start nodes per instance
/// and returns the shared-baseline loss, its gradient and the best rollouts.
inline DrlResult drl_loss_and_grad(const PolicyParams& params, std::span<const Instance* const> instances,
                                   int n_starts, Rng& rng) {
  require(n_starts >= 2, "n_starts must be at least 2");
  DrlResult result;
  for (const Instance* inst : instances) {
    if (n_starts > inst->size()) throw Error("n_starts exceeds node count");
    std::vector<int> nodes(static_cast<std::size_t>(inst->size()));
    std::iota(nodes.begin(), nodes.end(), 0);
    for (int k = 0; k < n_starts; ++k) {
      auto j = static_cast<std::size_t>(uniform_int(rng, k, inst->size() - 1));
      std::swap(nodes[static_cast<std::size_t>(k)], nodes[j]);
    }
    std::vector<Trajectory> group;
    group.reserve(static_cast<std::size_t>(n_starts));
    for (int k = 0; k < n_starts; ++k)
      group.push_back(rollout(params, *inst, nodes[static_cast<std::size_t>(k)], RolloutMode::Sample, rng));
    std::size_t best = 0;
    for (std::size_t k = 1; k < group.size(); ++k)
      if (group[k].cost < group[best].cost) best = k;
    result.best.push_back(group[best]);
    result.rollouts.push_back(std::move(group));
  }
  result.report = drl_loss_for_rollouts(params, instances, result.rollouts);
  return result;
}

inline DrlResult drl_loss_and_grad(const PolicyParams& params, std::span<const Instance> instances, int n_starts,
                                   Rng& rng) {
  std::vector<const Instance*> ptrs;
  ptrs.reserve(instances.size());
  for (const auto& inst : instances) ptrs.push_back(&inst);
  return drl_loss_and_grad(params, ptrs, n_starts, rng);
}

/// Per-step weights of a buffered trajectory: the most probable action's
/// probability at each step, normalised to sum to one.
inline std::vector<double> confidence_weights(const Trajectory& traj) {
  require(!traj.steps.empty(), "experience has no steps");
  std::vector<double> w;
  w.reserve(traj.steps.size());
  double total = 0.0;
  for (const auto& step : traj.steps) {
    float top = 0.0f;
    for (float p : step.probs) top = std::max(top, p);
    w.push_back(static_cast<double>(top));
    total += w.back();
  }
  for (double& x : w) x /= total;
  return w;
}

using ConfidenceWeighting = std::function<std::vector<double>(const Trajectory&)>;

inline constexpr double kBehaviorFloor = 1e-8;

/// Mean over experiences of sum_s w(s) KL(pi_theta(.|s) || pi_b(.|s)), with
/// buffered probabilities floored at 1e-8 and renormalised. pi_b is a
/// constant; the gradient flows through pi_theta only.
inline LossReport br_loss_and_grad(const PolicyParams& params, std::span<const Experience> experiences,
                                   const ConfidenceWeighting& weighting = confidence_weights) {
  LossReport report = LossReport::zero(params.dimension());
  if (experiences.empty()) return report;
  const double scale = 1.0 / static_cast<double>(experiences.size());

  for (const auto& e : experiences) {
    const auto dists = replay_distributions(params, e.instance, e.best);
    const auto weights = weighting(e.best);
    require(weights.size() == dists.size(), "confidence weights do not match steps");
    for (std::size_t t = 0; t < dists.size(); ++t) {
      const auto& q = dists[t];
      const auto& stored = e.best.steps[t].probs;
      std::vector<double> b(stored.size());
      double mass = 0.0;
      for (std::size_t k = 0; k < b.size(); ++k) {
        b[k] = std::max(static_cast<double>(stored[k]), kBehaviorFloor);
        mass += b[k];
      }
      double kl = 0.0;
      std::vector<double> log_ratio(b.size(), 0.0);
      for (std::size_t k = 0; k < b.size(); ++k) {
        b[k] /= mass;
        if (q.probs[k] > 0.0) {
          log_ratio[k] = std::log(q.probs[k]) - std::log(b[k]);
          kl += q.probs[k] * log_ratio[k];
        }
      }
      const double w = weights[t];
      report.value += scale * w * kl;
      // dKL/dz_k = q_k (log(q_k / b_k) - KL)
      for (std::size_t k = 0; k < b.size(); ++k) {
        if (q.probs[k] == 0.0) continue;
        const double g = scale * w * q.probs[k] * (log_ratio[k] - kl);
        const double* row = q.feature_row(k);
        for (int j = 0; j < q.dimension; ++j) report.gradient[static_cast<std::size_t>(j)] += g * row[j];
      }
    }
  }
  return report;
}

/// value and gradient of drl + alpha * br + beta * pir.
inline LossReport combine_losses(const LossReport& drl, const LossReport& br, const LossReport& pir, double alpha,
                                 double beta) {
  require(br.gradient.size() == drl.gradient.size() && pir.gradient.size() == drl.gradient.size(),
          "gradient length mismatch");
  LossReport out;
  out.value = drl.value + alpha * br.value + beta * pir.value;
  out.gradient.resize(drl.gradient.size());
  for (std::size_t j = 0; j < out.gradient.size(); ++j)
    out.gradient[j] = drl.gradient[j] + alpha * br.gradient[j] + beta * pir.gradient[j];
  out.costs = drl.costs;
  return out;
}

struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long long step = 0;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerState for_dimension(int dimension, double learning_rate = 1e-2) {
    OptimizerState s;
    s.first_moment.assign(static_cast<std::size_t>(dimension), 0.0);
    s.second_moment.assign(static_cast<std::size_t>(dimension), 0.0);
    s.learning_rate = learning_rate;
    return s;
  }
};

/// Bias-corrected adaptive-moment update (gradient descent on the loss).
inline std::pair<OptimizerState, PolicyParams> optimizer_step(OptimizerState state, PolicyParams params,
                                                              const std::vector<double>& gradient) {
  require(gradient.size() == params.weights.size() && state.first_moment.size() == gradient.size(),
          "gradient length mismatch");
  for (double g : gradient)
    if (!std::isfinite(g)) throw Error("diverged gradient");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t j = 0; j < gradient.size(); ++j) {
    state.first_moment[j] = state.beta1 * state.first_moment[j] + (1.0 - state.beta1) * gradient[j];
    state.second_moment[j] = state.beta2 * state.second_moment[j] + (1.0 - state.beta2) * gradient[j] * gradient[j];
    const double m_hat = state.first_moment[j] / c1;
    const double v_hat = state.second_moment[j] / c2;
    params.weights[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
  return {std::move(state), std::move(params)};
}

}  // namespace dree
