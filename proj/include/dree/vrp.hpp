#pragma once

// Problem instances, the construction MDP and small exact / heuristic
// solution oracles for TSP and CVRP.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "dree/error.hpp"
#include "dree/random.hpp"

namespace dree {

enum class ProblemKind { Tsp, Cvrp };

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline double euclidean(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Marker for "at the depot" (CVRP) or "nowhere yet" (TSP, before the first move).
inline constexpr int kDepot = -1;

/// One routing problem. Nodes are the customers (TSP: cities); the CVRP depot
/// is stored separately and is never an action. Coordinates live in [0,1]^2.
///
/// Travel costs are cached in a dense matrix. Generated instances use plain
/// Euclidean distance; instances read from TSPLIB keep their original
/// coordinates and round each edge to the nearest integer (EUC_2D).
class Instance {
public:
  Instance() = default;

  static Instance tsp(std::vector<Point> nodes, std::string id = {}) {
    Instance inst;
    inst.kind_ = ProblemKind::Tsp;
    inst.nodes_ = std::move(nodes);
    inst.id_ = std::move(id);
    inst.validate();
    inst.build_costs();
    return inst;
  }

  static Instance cvrp(std::vector<Point> nodes, std::vector<int> demands, int capacity,
                       Point depot, std::string id = {}) {
    Instance inst;
    inst.kind_ = ProblemKind::Cvrp;
    inst.nodes_ = std::move(nodes);
    inst.demands_ = std::move(demands);
    inst.capacity_ = capacity;
    inst.depot_ = depot;
    inst.id_ = std::move(id);
    inst.validate();
    inst.build_costs();
    return inst;
  }

  /// Re-bases travel costs on original (unscaled) coordinates with
  /// nearest-integer rounding. `original_depot` is ignored for TSP.
  Instance with_rounded_costs(const std::vector<Point>& original_nodes,
                              Point original_depot = {}) const {
    require(original_nodes.size() == nodes_.size(), "original coordinate count mismatch");
    Instance copy = *this;
    copy.rounded_ = true;
    copy.original_nodes_ = original_nodes;
    copy.original_depot_ = original_depot;
    copy.build_costs();
    return copy;
  }

  ProblemKind kind() const { return kind_; }
  bool is_cvrp() const { return kind_ == ProblemKind::Cvrp; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Point>& nodes() const { return nodes_; }
  Point node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  Point depot() const { return depot_; }
  const std::vector<int>& demands() const { return demands_; }
  int demand(int i) const { return is_cvrp() ? demands_[static_cast<std::size_t>(i)] : 0; }
  int capacity() const { return capacity_; }
  const std::string& id() const { return id_; }
  bool rounded_costs() const { return rounded_; }

  /// Travel cost between two sites; kDepot is allowed for CVRP.
  double cost(int a, int b) const {
    return costs_[index(a) * stride_ + index(b)];
  }

  Point centroid() const {
    Point c;
    for (const auto& p : nodes_) {
      c.x += p.x;
      c.y += p.y;
    }
    c.x /= static_cast<double>(nodes_.size());
    c.y /= static_cast<double>(nodes_.size());
    return c;
  }

  friend bool operator==(const Instance& a, const Instance& b) {
    return a.kind_ == b.kind_ && a.nodes_ == b.nodes_ && a.demands_ == b.demands_ &&
           a.capacity_ == b.capacity_ && a.depot_ == b.depot_ && a.rounded_ == b.rounded_ &&
           a.original_nodes_ == b.original_nodes_;
  }

private:
  static bool in_unit_box(Point p) {
    return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0;
  }

  void validate() const {
    require(!nodes_.empty(), "instance has no nodes");
    for (const auto& p : nodes_) require(in_unit_box(p), "node coordinate outside [0,1]^2");
    if (kind_ == ProblemKind::Cvrp) {
      require(capacity_ > 0, "capacity must be positive");
      require(demands_.size() == nodes_.size(), "demand count must equal node count");
      require(in_unit_box(depot_), "depot coordinate outside [0,1]^2");
      for (int d : demands_) {
        require(d > 0, "demands must be positive");
        require(d <= capacity_, "demand exceeds capacity");
      }
    } else {
      require(demands_.empty(), "TSP instance cannot carry demands");
    }
  }

  std::size_t index(int site) const {
    return site == kDepot ? nodes_.size() : static_cast<std::size_t>(site);
  }

  Point site_point(std::size_t i, bool original) const {
    if (i == nodes_.size()) return original ? original_depot_ : depot_;
    return original ? original_nodes_[i] : nodes_[i];
  }

  void build_costs() {
    stride_ = nodes_.size() + (is_cvrp() ? 1 : 0);
    costs_.assign(stride_ * stride_, 0.0);
    for (std::size_t a = 0; a < stride_; ++a) {
      for (std::size_t b = 0; b < stride_; ++b) {
        double d = euclidean(site_point(a, rounded_), site_point(b, rounded_));
        costs_[a * stride_ + b] = rounded_ ? std::floor(d + 0.5) : d;
      }
    }
  }

  ProblemKind kind_ = ProblemKind::Tsp;
  std::vector<Point> nodes_;
  std::vector<int> demands_;
  int capacity_ = 0;
  Point depot_{0.5, 0.5};
  std::string id_;
  bool rounded_ = false;
  std::vector<Point> original_nodes_;
  Point original_depot_;
  std::size_t stride_ = 0;
  std::vector<double> costs_;
};

/// A partial solution. The state is fully determined by the instance and the
/// action prefix, so replaying a prefix reproduces it bit for bit.
struct ConstructionState {
  const Instance* instance = nullptr;
  std::vector<char> visited;
  int current = kDepot;
  int start = kDepot;
  int remaining = 0;  // CVRP load left on the current vehicle
  int steps = 0;
  double cost = 0.0;  // accumulated travel, closed off at the terminal step

  bool terminal() const { return steps == instance->size(); }
  double visited_fraction() const {
    return static_cast<double>(steps) / static_cast<double>(instance->size());
  }
};

inline ConstructionState initial_state(const Instance& instance) {
  ConstructionState s;
  s.instance = &instance;
  s.visited.assign(static_cast<std::size_t>(instance.size()), 0);
  s.remaining = instance.capacity();
  return s;
}

namespace detail {

inline bool any_unvisited_fits(const ConstructionState& s) {
  const Instance& inst = *s.instance;
  for (int i = 0; i < inst.size(); ++i)
    if (!s.visited[static_cast<std::size_t>(i)] && inst.demand(i) <= s.remaining) return true;
  return false;
}

}  // namespace detail

/// Feasibility mask over nodes. For CVRP, nodes that do not fit the current
/// load are masked unless nothing fits, in which case every unvisited node is
/// allowed and reaching it implies a depot return first.
inline std::vector<bool> feasible_actions(const ConstructionState& s) {
  require(!s.terminal(), "no actions at terminal state");
  const Instance& inst = *s.instance;
  std::vector<bool> mask(static_cast<std::size_t>(inst.size()), false);
  const bool restrict_load = inst.is_cvrp() && detail::any_unvisited_fits(s);
  for (int i = 0; i < inst.size(); ++i) {
    if (s.visited[static_cast<std::size_t>(i)]) continue;
    mask[static_cast<std::size_t>(i)] = !restrict_load || inst.demand(i) <= s.remaining;
  }
  return mask;
}

/// Feasible node indices in ascending order.
inline std::vector<int> feasible_nodes(const ConstructionState& s) {
  auto mask = feasible_actions(s);
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(mask.size()); ++i)
    if (mask[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

inline bool implies_depot_return(const ConstructionState& s, int node) {
  return s.instance->is_cvrp() && s.instance->demand(node) > s.remaining;
}

/// In-place transition. Throws "infeasible action" unless `action` is in the
/// current feasibility mask.
inline void advance(ConstructionState& s, int action) {
  const Instance& inst = *s.instance;
  if (s.terminal() || action < 0 || action >= inst.size()) throw Error("infeasible action");
  auto mask = feasible_actions(s);
  if (!mask[static_cast<std::size_t>(action)]) throw Error("infeasible action");

  if (inst.is_cvrp()) {
    if (s.current == kDepot) {
      s.cost += inst.cost(kDepot, action);
    } else if (implies_depot_return(s, action)) {
      s.cost += inst.cost(s.current, kDepot) + inst.cost(kDepot, action);
      s.remaining = inst.capacity();
    } else {
      s.cost += inst.cost(s.current, action);
    }
    s.remaining -= inst.demand(action);
  } else if (s.current != kDepot) {
    s.cost += inst.cost(s.current, action);
  }
  if (s.steps == 0) s.start = action;
  s.visited[static_cast<std::size_t>(action)] = 1;
  s.current = action;
  ++s.steps;
  if (s.terminal()) s.cost += inst.is_cvrp() ? inst.cost(s.current, kDepot) : inst.cost(s.current, s.start);
}

inline ConstructionState apply_action(ConstructionState s, int action) {
  advance(s, action);
  return s;
}

/// A complete solution: the visiting order (first entry is the start node)
/// and its cost. CVRP depot returns are implicit.
struct Tour {
  std::vector<int> order;
  double cost = 0.0;

  int start() const { return order.empty() ? kDepot : order.front(); }
};

namespace detail {

// Cost of a visiting order with greedy (forced-only) depot resets. Assumes a
// valid permutation.
inline double order_cost(const Instance& inst, const std::vector<int>& order) {
  double cost = 0.0;
  if (inst.is_cvrp()) {
    int remaining = inst.capacity();
    int current = kDepot;
    for (int node : order) {
      if (current == kDepot) {
        cost += inst.cost(kDepot, node);
      } else if (inst.demand(node) > remaining) {
        cost += inst.cost(current, kDepot) + inst.cost(kDepot, node);
        remaining = inst.capacity();
      } else {
        cost += inst.cost(current, node);
      }
      remaining -= inst.demand(node);
      current = node;
    }
    return cost + inst.cost(current, kDepot);
  }
  for (std::size_t k = 1; k < order.size(); ++k) cost += inst.cost(order[k - 1], order[k]);
  return cost + inst.cost(order.back(), order.front());
}

}  // namespace detail

/// Closed-tour length (TSP) or total route length with implied depot
/// returns (CVRP). Throws "invalid tour" unless `order` is a permutation.
inline double evaluate(const Instance& inst, const std::vector<int>& order) {
  if (static_cast<int>(order.size()) != inst.size()) throw Error("invalid tour");
  std::vector<char> seen(order.size(), 0);
  for (int node : order) {
    if (node < 0 || node >= inst.size() || seen[static_cast<std::size_t>(node)]) throw Error("invalid tour");
    seen[static_cast<std::size_t>(node)] = 1;
  }
  return detail::order_cost(inst, order);
}

inline double evaluate(const Instance& inst, const Tour& tour) { return evaluate(inst, tour.order); }

inline constexpr int kMaxExactTsp = 9;
inline constexpr int kMaxExactCvrp = 7;

inline bool exact_oracle_applies(const Instance& inst) {
  return inst.size() <= (inst.is_cvrp() ? kMaxExactCvrp : kMaxExactTsp);
}

/// Exhaustive enumeration of visiting orders. TSP fixes node 0 first (cycle
/// rotation symmetry); CVRP tries every permutation with forced resets.
inline Tour brute_force_optimal(const Instance& inst) {
  if (!exact_oracle_applies(inst)) throw Error("instance too large for exact oracle");
  std::vector<int> order(static_cast<std::size_t>(inst.size()));
  std::iota(order.begin(), order.end(), 0);
  auto first = inst.is_cvrp() ? order.begin() : order.begin() + 1;

  Tour best{order, detail::order_cost(inst, order)};
  while (std::next_permutation(first, order.end())) {
    double c = detail::order_cost(inst, order);
    if (c < best.cost) best = Tour{order, c};
  }
  return best;
}

namespace detail {

inline std::vector<int> nearest_neighbor(const Instance& inst, int start) {
  ConstructionState s = initial_state(inst);
  std::vector<int> order{start};
  advance(s, start);
  while (!s.terminal()) {
    int best = -1;
    double best_d = 0.0;
    for (int cand : feasible_nodes(s)) {
      int from = implies_depot_return(s, cand) ? kDepot : s.current;
      double d = inst.cost(from, cand);
      if (best < 0 || d < best_d) {
        best = cand;
        best_d = d;
      }
    }
    advance(s, best);
    order.push_back(best);
  }
  return order;
}

// First-improvement 2-opt on a closed tour with O(1) deltas.
inline void two_opt_tsp(const Instance& inst, std::vector<int>& t) {
  const int n = static_cast<int>(t.size());
  if (n < 4) return;
  bool improved = true;
  while (improved) {
    improved = false;
    for (int i = 0; i < n - 2; ++i) {
      for (int j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        int a = t[static_cast<std::size_t>(i)], b = t[static_cast<std::size_t>(i + 1)];
        int c = t[static_cast<std::size_t>(j)], d = t[static_cast<std::size_t>((j + 1) % n)];
        double delta = inst.cost(a, c) + inst.cost(b, d) - inst.cost(a, b) - inst.cost(c, d);
        if (delta < -1e-10) {
          std::reverse(t.begin() + i + 1, t.begin() + j + 1);
          improved = true;
        }
      }
    }
  }
}

// Route boundaries [begin, end) of an order under forced resets.
inline std::vector<std::pair<int, int>> routes_of(const Instance& inst, const std::vector<int>& order) {
  std::vector<std::pair<int, int>> routes;
  int remaining = inst.capacity();
  int begin = 0;
  for (int k = 0; k < static_cast<int>(order.size()); ++k) {
    int dem = inst.demand(order[static_cast<std::size_t>(k)]);
    if (k > 0 && dem > remaining) {
      routes.emplace_back(begin, k);
      begin = k;
      remaining = inst.capacity();
    }
    remaining -= dem;
  }
  routes.emplace_back(begin, static_cast<int>(order.size()));
  return routes;
}

// Intra-route 2-opt: reverse segments inside one route, re-evaluating the
// whole order so resets stay consistent with the implied-reset encoding.
inline void two_opt_cvrp(const Instance& inst, std::vector<int>& order) {
  double current = order_cost(inst, order);
  bool improved = true;
  while (improved) {
    improved = false;
    for (auto [begin, end] : routes_of(inst, order)) {
      for (int i = begin; i < end - 1 && !improved; ++i) {
        for (int j = i + 1; j < end && !improved; ++j) {
          std::reverse(order.begin() + i, order.begin() + j + 1);
          double c = order_cost(inst, order);
          if (c < current - 1e-10) {
            current = c;
            improved = true;
          } else {
            std::reverse(order.begin() + i, order.begin() + j + 1);
          }
        }
      }
      if (improved) break;
    }
  }
}

}  // namespace detail

/// Best of `restarts` nearest-neighbour constructions (random start node),
/// each polished by first-improvement 2-opt (intra-route for CVRP).
inline Tour reference_tour(const Instance& inst, int restarts, Rng& rng) {
  require(restarts > 0, "restarts must be positive");
  Tour best;
  for (int r = 0; r < restarts; ++r) {
    int start = static_cast<int>(uniform_int(rng, 0, inst.size() - 1));
    auto order = detail::nearest_neighbor(inst, start);
    if (inst.is_cvrp())
      detail::two_opt_cvrp(inst, order);
    else
      detail::two_opt_tsp(inst, order);
    double c = detail::order_cost(inst, order);
    if (r == 0 || c < best.cost) best = Tour{std::move(order), c};
  }
  return best;
}

inline double reference_solve(const Instance& inst, int restarts, Rng& rng) {
  return reference_tour(inst, restarts, rng).cost;
}

/// Percent excess of `cost` over `reference`. Negative when the solver beats
/// the reference; not clamped.
inline double optimality_gap(double cost, double reference) {
  require(reference > 0.0, "reference cost must be positive");
  return 100.0 * (cost - reference) / reference;
}

}  // namespace dree
