#pragma once

// Random instance builders shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dree/policy.hpp"
#include "dree/random.hpp"
#include "dree/vrp.hpp"

namespace dree::fixtures {

inline Instance random_tsp(int n, Rng& rng, std::string id = "t") {
  std::vector<Point> nodes;
  for (int i = 0; i < n; ++i) nodes.push_back({uniform01(rng), uniform01(rng)});
  return Instance::tsp(std::move(nodes), std::move(id));
}

inline Instance random_cvrp(int n, Rng& rng, int capacity = 10, std::string id = "c") {
  std::vector<Point> nodes;
  std::vector<int> demands;
  for (int i = 0; i < n; ++i) {
    nodes.push_back({uniform01(rng), uniform01(rng)});
    demands.push_back(static_cast<int>(uniform_int(rng, 1, capacity / 2 + 1)));
  }
  return Instance::cvrp(std::move(nodes), std::move(demands), capacity, {uniform01(rng), uniform01(rng)},
                        std::move(id));
}

inline PolicyParams random_params(Rng& rng, double spread = 2.0) {
  PolicyParams p = PolicyParams::zeros();
  for (auto& w : p.weights) w = uniform(rng, -spread, spread);
  return p;
}

/// Largest componentwise relative error between `analytic` and a central
/// difference of `loss` with step h. Components where both are below `floor`
/// in magnitude compare on the absolute scale of `floor`; the bias and any
/// feature that is constant over every choice have an exactly zero gradient,
/// where the central difference returns roundoff near eps*|loss|/h.
inline double gradient_check(const std::function<double(const PolicyParams&)>& loss, const PolicyParams& at,
                             const std::vector<double>& analytic, double h = 1e-5, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t j = 0; j < at.weights.size(); ++j) {
    PolicyParams up = at, down = at;
    up.weights[j] += h;
    down.weights[j] -= h;
    const double numeric = (loss(up) - loss(down)) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[j]), floor});
    worst = std::max(worst, std::abs(numeric - analytic[j]) / scale);
  }
  return worst;
}

}  // namespace dree::fixtures
