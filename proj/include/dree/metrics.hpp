#pragma once

// Per-epoch, per-principal-task test gaps and the lifelong summary metrics.

#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dree/error.hpp"

namespace dree {

/// Mean optimality gap d(t, i) for epochs t = 0..T and principal tasks
/// i = 0..K-1 (zero-based). Every cell is written exactly once.
class MetricsLedger {
public:
  MetricsLedger() = default;
  MetricsLedger(int task_count, int total_epochs) : tasks_(task_count), epochs_(total_epochs) {
    require(task_count >= 1, "ledger needs at least one task");
    require(total_epochs >= 0, "epoch count must be non-negative");
    cells_.assign(static_cast<std::size_t>(task_count) * static_cast<std::size_t>(total_epochs + 1), std::nullopt);
  }

  int task_count() const { return tasks_; }
  int total_epochs() const { return epochs_; }

  void record(int t, int i, double mean_gap) {
    require(t >= 0 && t <= epochs_ && i >= 0 && i < tasks_, "ledger index out of range");
    require(std::isfinite(mean_gap), "ledger entries must be finite");
    auto& cell = cells_[offset(t, i)];
    require(!cell.has_value(), "ledger cell already recorded");
    cell = mean_gap;
  }

  bool has(int t, int i) const { return cells_[offset(t, i)].has_value(); }

  double at(int t, int i) const {
    require(t >= 0 && t <= epochs_ && i >= 0 && i < tasks_, "ledger index out of range");
    const auto& cell = cells_[offset(t, i)];
    require(cell.has_value(), "ledger cell not recorded");
    return *cell;
  }

  bool complete() const {
    for (const auto& c : cells_)
      if (!c) return false;
    return true;
  }

  /// Number of leading epochs whose rows are fully recorded.
  int recorded_rows() const {
    for (int t = 0; t <= epochs_; ++t)
      for (int i = 0; i < tasks_; ++i)
        if (!has(t, i)) return t;
    return epochs_ + 1;
  }

  std::vector<double> curve(int i) const {
    std::vector<double> out;
    for (int t = 0; t <= epochs_; ++t) out.push_back(at(t, i));
    return out;
  }

private:
  std::size_t offset(int t, int i) const {
    return static_cast<std::size_t>(t) * static_cast<std::size_t>(tasks_) + static_cast<std::size_t>(i);
  }

  int tasks_ = 0;
  int epochs_ = 0;
  std::vector<std::optional<double>> cells_;
};

/// Minimum of a curve and the earliest epoch attaining it.
inline std::pair<double, int> tie_break_best(std::span<const double> curve) {
  require(!curve.empty(), "empty curve");
  int best = 0;
  for (int t = 1; t < static_cast<int>(curve.size()); ++t)
    if (curve[static_cast<std::size_t>(t)] < curve[static_cast<std::size_t>(best)]) best = t;
  return {curve[static_cast<std::size_t>(best)], best};
}

struct LifelongMetrics {
  double ap = 0.0;    // mean final gap
  double afb = 0.0;   // mean (final - best)
  double amfb = 0.0;  // mean (max after best - best)
  double abpl = 0.0;  // mean best
};

inline LifelongMetrics compute_metrics(const MetricsLedger& ledger) {
  require(ledger.complete(), "ledger incomplete");
  const int k = ledger.task_count();
  const int last = ledger.total_epochs();
  LifelongMetrics m;
  for (int i = 0; i < k; ++i) {
    const auto curve = ledger.curve(i);
    const auto [best, best_t] = tie_break_best(curve);
    double worst_after = best;
    for (int t = best_t; t <= last; ++t) worst_after = std::max(worst_after, curve[static_cast<std::size_t>(t)]);
    const double final_gap = curve[static_cast<std::size_t>(last)];
    m.ap += final_gap;
    m.afb += final_gap - best;
    m.amfb += worst_after - best;
    m.abpl += best;
  }
  m.ap /= k;
  m.afb /= k;
  m.amfb /= k;
  m.abpl /= k;
  return m;
}

}  // namespace dree
