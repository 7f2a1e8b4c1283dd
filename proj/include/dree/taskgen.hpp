#pragma once

// Principal task distributions and the continually drifting schedule of
// intermediate tasks between them.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dree/error.hpp"
#include "dree/random.hpp"
#include "dree/vrp.hpp"

namespace dree {

enum class DistributionKind { Uniform, Rotation, GaussianMixture, Explosion, Cluster, Grid };

inline std::string_view to_string(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::Uniform: return "uniform";
    case DistributionKind::Rotation: return "rotation";
    case DistributionKind::GaussianMixture: return "gaussian_mixture";
    case DistributionKind::Explosion: return "explosion";
    case DistributionKind::Cluster: return "cluster";
    case DistributionKind::Grid: return "grid";
  }
  return "?";
}

inline DistributionKind parse_distribution(std::string_view name) {
  for (auto kind : {DistributionKind::Uniform, DistributionKind::Rotation,
                    DistributionKind::GaussianMixture, DistributionKind::Explosion,
                    DistributionKind::Cluster, DistributionKind::Grid}) {
    if (to_string(kind) == name) return kind;
  }
  throw Error("unknown distribution '" + std::string(name) + "'");
}

/// Shape parameters of the coordinate distributions. Only the fields of the
/// selected kind are read.
struct DistributionParams {
  int cluster_count = 3;
  double cluster_sigma = 0.05;
  int mixture_components = 3;
  double mixture_sigma = 0.08;
  double explosion_radius = 0.3;
  int grid_size = 0;  // 0 selects ceil(sqrt(scale)) + 2
  bool grid_jitter = true;

  friend bool operator==(const DistributionParams&, const DistributionParams&) = default;
};

struct PrincipalTask {
  std::string name;
  DistributionKind distribution = DistributionKind::Uniform;
  int scale = 0;
  int demand_min = 1;
  int demand_max = 9;
  int capacity = 0;  // 0 selects 30 + scale / 5
  DistributionParams params;

  int effective_capacity() const { return capacity > 0 ? capacity : 30 + scale / 5; }

  void validate() const {
    const std::string where = "principal '" + name + "': ";
    require(scale >= 2, where + "scale must be at least 2");
    require(demand_min >= 1 && demand_min <= demand_max, where + "invalid demand range");
    require(capacity >= 0, where + "capacity must be positive");
    require(demand_max <= effective_capacity(), where + "demand range exceeds capacity");
    require(params.cluster_count >= 1, where + "cluster_count must be positive");
    require(params.cluster_sigma > 0.0, where + "cluster_sigma must be positive");
    require(params.mixture_components >= 1, where + "mixture_components must be positive");
    require(params.mixture_sigma > 0.0, where + "mixture_sigma must be positive");
    require(params.explosion_radius > 0.0 && params.explosion_radius < 0.5,
            where + "explosion_radius must lie in (0, 0.5)");
    require(params.grid_size >= 0, where + "grid_size must be non-negative");
  }

  friend bool operator==(const PrincipalTask&, const PrincipalTask&) = default;
};

/// A distribution with its per-instance structure drawn (cluster centres,
/// mixture means, rotation angle, ...). Nodes of one instance that share a
/// source principal share one sampler.
struct NodeSampler {
  DistributionKind kind = DistributionKind::Uniform;
  DistributionParams params;
  std::vector<Point> centers;
  double angle = 0.0;
  int grid = 0;
};

inline NodeSampler make_node_sampler(DistributionKind kind, const DistributionParams& params,
                                     int scale, Rng& rng) {
  NodeSampler s{kind, params, {}, 0.0, 0};
  switch (kind) {
    case DistributionKind::Uniform:
      break;
    case DistributionKind::Rotation:
      s.angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      break;
    case DistributionKind::GaussianMixture:
      require(params.mixture_components >= 1 && params.mixture_sigma > 0.0, "invalid mixture parameters");
      for (int k = 0; k < params.mixture_components; ++k)
        s.centers.push_back({uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8)});
      break;
    case DistributionKind::Explosion:
      require(params.explosion_radius > 0.0 && params.explosion_radius < 0.5, "invalid explosion radius");
      s.centers.push_back({uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)});
      break;
    case DistributionKind::Cluster:
      require(params.cluster_count >= 1 && params.cluster_sigma > 0.0, "invalid cluster parameters");
      for (int k = 0; k < params.cluster_count; ++k)
        s.centers.push_back({uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9)});
      break;
    case DistributionKind::Grid:
      require(params.grid_size >= 0, "invalid grid size");
      s.grid = params.grid_size > 0
                   ? params.grid_size
                   : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(scale)))) + 2;
      break;
  }
  return s;
}

inline NodeSampler make_node_sampler(const PrincipalTask& task, Rng& rng) {
  return make_node_sampler(task.distribution, task.params, task.scale, rng);
}

namespace detail {

inline Point clamp_unit(Point p) {
  return {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)};
}

}  // namespace detail

/// One coordinate in [0,1]^2. Draws that leave the box are clamped.
inline Point sample_principal_node(const NodeSampler& s, Rng& rng) {
  switch (s.kind) {
    case DistributionKind::Uniform:
      return {uniform01(rng), uniform01(rng)};

    case DistributionKind::Rotation: {
      double x = uniform01(rng) - 0.5, y = uniform01(rng) - 0.5;
      double c = std::cos(s.angle), sn = std::sin(s.angle);
      return detail::clamp_unit({0.5 + c * x - sn * y, 0.5 + sn * x + c * y});
    }

    case DistributionKind::GaussianMixture: {
      const Point& mean = s.centers[static_cast<std::size_t>(
          uniform_int(rng, 0, static_cast<long long>(s.centers.size()) - 1))];
      return detail::clamp_unit(
          {normal(rng, mean.x, s.params.mixture_sigma), normal(rng, mean.y, s.params.mixture_sigma)});
    }

    case DistributionKind::Explosion: {
      Point p{uniform01(rng), uniform01(rng)};
      const Point c = s.centers.front();
      const double r = s.params.explosion_radius;
      double d = euclidean(p, c);
      if (d >= r) return p;
      // Empty the disc: move the point outward by r along its ray.
      double ux, uy;
      if (d > 0.0) {
        ux = (p.x - c.x) / d;
        uy = (p.y - c.y) / d;
      } else {
        double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        ux = std::cos(a);
        uy = std::sin(a);
      }
      return detail::clamp_unit({c.x + ux * (d + r), c.y + uy * (d + r)});
    }

    case DistributionKind::Cluster: {
      const Point& c = s.centers[static_cast<std::size_t>(
          uniform_int(rng, 0, static_cast<long long>(s.centers.size()) - 1))];
      return detail::clamp_unit(
          {normal(rng, c.x, s.params.cluster_sigma), normal(rng, c.y, s.params.cluster_sigma)});
    }

    case DistributionKind::Grid: {
      const double g = static_cast<double>(s.grid);
      Point p{static_cast<double>(uniform_int(rng, 0, s.grid - 1)) / g,
              static_cast<double>(uniform_int(rng, 0, s.grid - 1)) / g};
      if (!s.params.grid_jitter) return p;
      const double j = 1.0 / (4.0 * g);
      return detail::clamp_unit({p.x + uniform(rng, -j, j), p.y + uniform(rng, -j, j)});
    }
  }
  throw Error("unknown distribution");
}

/// Round-half-up of num / den for num >= 0, den > 0, in exact integer arithmetic.
inline long long round_half_up(long long num, long long den) {
  return (2 * num + den) / (2 * den);
}

/// K principal tasks placed at epochs 0, m, 2m, ..., T with m = T / (K - 1).
struct TaskSchedule {
  ProblemKind problem = ProblemKind::Tsp;
  std::vector<PrincipalTask> principals;
  int total_epochs = 0;
  int interval = 0;

  int task_count() const { return static_cast<int>(principals.size()); }
  int principal_epoch(int i) const { return i * interval; }
};

inline TaskSchedule make_schedule(ProblemKind problem, std::vector<PrincipalTask> principals,
                                  int total_epochs) {
  const int k = static_cast<int>(principals.size());
  require(k >= 2, "a schedule needs at least two principal tasks");
  require(total_epochs >= 0, "epoch count must be non-negative");
  require(total_epochs % (k - 1) == 0, "epoch count not divisible");
  for (const auto& p : principals) p.validate();
  if (problem == ProblemKind::Cvrp) {
    // Mixed tasks interpolate capacity between neighbours, so every demand
    // must fit the smaller of the two.
    for (int i = 0; i + 1 < k; ++i) {
      const auto& a = principals[static_cast<std::size_t>(i)];
      const auto& b = principals[static_cast<std::size_t>(i + 1)];
      int cap = std::min(a.effective_capacity(), b.effective_capacity());
      require(std::max(a.demand_max, b.demand_max) <= cap,
              "principals '" + a.name + "' and '" + b.name + "': demand range exceeds capacity");
    }
  }
  return TaskSchedule{problem, std::move(principals), total_epochs, total_epochs / (k - 1)};
}

/// The task trained on at one epoch: a mixture of two consecutive principals.
struct TaskSpec {
  ProblemKind problem = ProblemKind::Tsp;
  int epoch = 0;
  int scale = 0;
  int lower = 0;         // index i of the earlier principal
  double mixture = 0.0;  // lambda = (t - i m) / m
  int count_next = 0;    // nodes drawn from principal i + 1
  int count_prev = 0;    // nodes drawn from principal i
  int capacity = 0;
  PrincipalTask prev;
  PrincipalTask next;
};

inline TaskSpec schedule_task(const TaskSchedule& schedule, int t) {
  require(t >= 0 && t <= schedule.total_epochs, "epoch out of range");
  const int m = schedule.interval;
  const int k = schedule.task_count();

  TaskSpec spec;
  spec.problem = schedule.problem;
  spec.epoch = t;
  if (m == 0) {
    // Degenerate zero-epoch schedule: only the first principal is ever seen.
    spec.lower = 0;
    spec.prev = spec.next = schedule.principals[0];
    spec.scale = spec.count_prev = spec.prev.scale;
    spec.capacity = spec.prev.effective_capacity();
    return spec;
  }

  int i = std::min(t / m, k - 2);
  const long long offset = t - static_cast<long long>(i) * m;  // in [0, m]
  const PrincipalTask& lo = schedule.principals[static_cast<std::size_t>(i)];
  const PrincipalTask& hi = schedule.principals[static_cast<std::size_t>(i + 1)];

  spec.lower = i;
  spec.prev = lo;
  spec.next = hi;
  spec.mixture = static_cast<double>(offset) / static_cast<double>(m);
  spec.scale = static_cast<int>(round_half_up((m - offset) * lo.scale + offset * hi.scale, m));
  spec.count_next = static_cast<int>(round_half_up(offset * spec.scale, m));
  spec.count_prev = spec.scale - spec.count_next;
  spec.capacity = static_cast<int>(
      round_half_up((m - offset) * lo.effective_capacity() + offset * hi.effective_capacity(), m));
  return spec;
}

/// The pure task of principal `i`, as seen at its own epoch.
inline TaskSpec principal_spec(const TaskSchedule& schedule, int i) {
  require(i >= 0 && i < schedule.task_count(), "principal index out of range");
  const PrincipalTask& p = schedule.principals[static_cast<std::size_t>(i)];
  TaskSpec spec;
  spec.problem = schedule.problem;
  spec.epoch = i * schedule.interval;
  spec.scale = p.scale;
  spec.lower = i;
  spec.count_prev = p.scale;
  spec.capacity = p.effective_capacity();
  spec.prev = spec.next = p;
  return spec;
}

/// Draws one instance of a (possibly mixed) task. Node order is shuffled so
/// the source principal is not recoverable from the index. CVRP depots sit at
/// the centre of the square for every task.
inline Instance sample_instance(const TaskSpec& spec, Rng& rng, std::string id = {}) {
  struct Draw {
    Point p;
    int demand;
  };
  std::vector<Draw> draws;
  draws.reserve(static_cast<std::size_t>(spec.scale));

  auto draw_from = [&](const PrincipalTask& task, int count) {
    if (count == 0) return;
    NodeSampler sampler = make_node_sampler(task, rng);
    for (int n = 0; n < count; ++n) {
      Point p = sample_principal_node(sampler, rng);
      int demand = spec.problem == ProblemKind::Cvrp
                       ? static_cast<int>(uniform_int(rng, task.demand_min, task.demand_max))
                       : 0;
      draws.push_back({p, demand});
    }
  };
  draw_from(spec.prev, spec.count_prev);
  draw_from(spec.next, spec.count_next);

  for (std::size_t k = draws.size(); k > 1; --k) {
    auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<long long>(k) - 1));
    std::swap(draws[k - 1], draws[j]);
  }

  std::vector<Point> nodes;
  std::vector<int> demands;
  for (const auto& d : draws) {
    nodes.push_back(d.p);
    demands.push_back(d.demand);
  }
  if (spec.problem == ProblemKind::Cvrp)
    return Instance::cvrp(std::move(nodes), std::move(demands), spec.capacity, {0.5, 0.5}, std::move(id));
  return Instance::tsp(std::move(nodes), std::move(id));
}

}  // namespace dree
