#pragma once

// Scenario files: a line-oriented `key = value` text format.
//
//   # comment
//   problem = tsp            (tsp | cvrp)
//   epochs = 48
//   order = uniform, cluster, grid
//
//   [principal uniform]
//   distribution = uniform
//   scale = 8
//   ...
//
// Header keys precede the first section. `order` lists section names; its
// length is K and it fixes the schedule. Unknown keys are rejected.

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dree/error.hpp"
#include "dree/policy.hpp"
#include "dree/taskgen.hpp"

namespace dree::io {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& where) {
  T value{};
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw Error(where + ": expected a number, got '" + text + "'");
  return value;
}

inline bool parse_bool(const std::string& text, const std::string& where) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw Error(where + ": expected true or false, got '" + text + "'");
}

}  // namespace detail

inline ProblemKind parse_problem(std::string_view name) {
  if (name == "tsp") return ProblemKind::Tsp;
  if (name == "cvrp") return ProblemKind::Cvrp;
  throw Error("unknown problem '" + std::string(name) + "'");
}

inline std::string_view to_string(ProblemKind kind) { return kind == ProblemKind::Tsp ? "tsp" : "cvrp"; }

inline TaskSchedule parse_scenario(std::istream& in) {
  struct Section {
    PrincipalTask task;
    bool has_distribution = false;
    bool has_scale = false;
  };
  std::map<std::string, Section> sections;
  std::vector<std::string> section_order;
  std::string problem = "tsp";
  std::optional<int> epochs;
  std::vector<std::string> order;
  Section* current = nullptr;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw Error(where + ": unterminated section header");
      auto words = detail::split(line.substr(1, line.size() - 2), ' ');
      if (words.size() != 2 || words[0] != "principal" || words[1].empty())
        throw Error(where + ": expected [principal <name>]");
      if (sections.count(words[1])) throw Error(where + ": duplicate principal '" + words[1] + "'");
      current = &sections[words[1]];
      current->task.name = words[1];
      section_order.push_back(words[1]);
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw Error(where + ": expected key = value");
    const std::string at = where + " (" + key + ")";

    if (!current) {
      if (key == "problem") {
        problem = value;
        parse_problem(problem);
      } else if (key == "epochs") {
        epochs = detail::parse_number<int>(value, at);
      } else if (key == "order") {
        order = detail::split(value, ',');
      } else {
        throw Error(where + ": unknown key '" + key + "'");
      }
      continue;
    }

    PrincipalTask& t = current->task;
    if (key == "distribution") {
      t.distribution = parse_distribution(value);
      current->has_distribution = true;
    } else if (key == "scale") {
      t.scale = detail::parse_number<int>(value, at);
      current->has_scale = true;
    } else if (key == "demand_min") {
      t.demand_min = detail::parse_number<int>(value, at);
    } else if (key == "demand_max") {
      t.demand_max = detail::parse_number<int>(value, at);
    } else if (key == "capacity") {
      t.capacity = detail::parse_number<int>(value, at);
    } else if (key == "cluster_count") {
      t.params.cluster_count = detail::parse_number<int>(value, at);
    } else if (key == "cluster_sigma") {
      t.params.cluster_sigma = detail::parse_number<double>(value, at);
    } else if (key == "mixture_components") {
      t.params.mixture_components = detail::parse_number<int>(value, at);
    } else if (key == "mixture_sigma") {
      t.params.mixture_sigma = detail::parse_number<double>(value, at);
    } else if (key == "explosion_radius") {
      t.params.explosion_radius = detail::parse_number<double>(value, at);
    } else if (key == "grid_size") {
      t.params.grid_size = detail::parse_number<int>(value, at);
    } else if (key == "grid_jitter") {
      t.params.grid_jitter = detail::parse_bool(value, at);
    } else {
      throw Error(where + ": unknown key '" + key + "' in principal '" + t.name + "'");
    }
  }

  if (!epochs) throw Error("scenario: missing epochs");
  if (order.empty()) throw Error("scenario: missing order");
  for (const auto& name : section_order) {
    const Section& s = sections.at(name);
    if (!s.has_distribution) throw Error("principal '" + name + "': missing distribution");
    if (!s.has_scale) throw Error("principal '" + name + "': missing scale");
  }

  std::vector<PrincipalTask> principals;
  for (const auto& name : order) {
    auto it = sections.find(name);
    if (it == sections.end()) throw Error("scenario: order names unknown principal '" + name + "'");
    principals.push_back(it->second.task);
  }
  for (const auto& name : section_order)
    if (std::find(order.begin(), order.end(), name) == order.end())
      throw Error("scenario: principal '" + name + "' is not listed in order");
  for (std::size_t k = 1; k < order.size(); ++k)
    if (order[k] == order[k - 1]) throw Error("scenario: consecutive principals must differ");
  return make_schedule(parse_problem(problem), std::move(principals), *epochs);
}

inline TaskSchedule load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario '" + path + "'");
  try {
    return parse_scenario(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

/// Writes a scenario that parses back to the same schedule. Principals that
/// appear more than once in the order are emitted once.
inline std::string emit_scenario(const TaskSchedule& schedule) {
  std::ostringstream out;
  out << "problem = " << to_string(schedule.problem) << '\n';
  out << "epochs = " << schedule.total_epochs << '\n';
  out << "order = ";
  for (std::size_t k = 0; k < schedule.principals.size(); ++k)
    out << (k ? ", " : "") << schedule.principals[k].name;
  out << '\n';

  std::vector<std::string> written;
  for (const auto& p : schedule.principals) {
    if (std::find(written.begin(), written.end(), p.name) != written.end()) continue;
    written.push_back(p.name);
    const DistributionParams defaults;
    out << "\n[principal " << p.name << "]\n";
    out << "distribution = " << to_string(p.distribution) << '\n';
    out << "scale = " << p.scale << '\n';
    out << "demand_min = " << p.demand_min << '\n';
    out << "demand_max = " << p.demand_max << '\n';
    if (p.capacity > 0) out << "capacity = " << p.capacity << '\n';
    const auto& q = p.params;
    if (q.cluster_count != defaults.cluster_count) out << "cluster_count = " << q.cluster_count << '\n';
    if (q.cluster_sigma != defaults.cluster_sigma) out << "cluster_sigma = " << format_double(q.cluster_sigma) << '\n';
    if (q.mixture_components != defaults.mixture_components)
      out << "mixture_components = " << q.mixture_components << '\n';
    if (q.mixture_sigma != defaults.mixture_sigma) out << "mixture_sigma = " << format_double(q.mixture_sigma) << '\n';
    if (q.explosion_radius != defaults.explosion_radius)
      out << "explosion_radius = " << format_double(q.explosion_radius) << '\n';
    if (q.grid_size != defaults.grid_size) out << "grid_size = " << q.grid_size << '\n';
    if (q.grid_jitter != defaults.grid_jitter) out << "grid_jitter = " << (q.grid_jitter ? "true" : "false") << '\n';
  }
  return out.str();
}

/// Uniform -> Cluster -> Grid at scales 8, 12, 16 over 48 epochs.
inline TaskSchedule desk_scenario(ProblemKind problem = ProblemKind::Tsp) {
  std::vector<PrincipalTask> p(3);
  p[0].name = "uniform";
  p[0].distribution = DistributionKind::Uniform;
  p[0].scale = 8;
  p[1].name = "cluster";
  p[1].distribution = DistributionKind::Cluster;
  p[1].scale = 12;
  p[2].name = "grid";
  p[2].distribution = DistributionKind::Grid;
  p[2].scale = 16;
  return make_schedule(problem, std::move(p), 48);
}

/// The six principal distributions at scales 20 / 50 / 100 over 1000 epochs.
inline TaskSchedule full_scenario(ProblemKind problem = ProblemKind::Tsp) {
  const std::pair<DistributionKind, int> specs[] = {
      {DistributionKind::Uniform, 20},   {DistributionKind::Rotation, 50}, {DistributionKind::GaussianMixture, 100},
      {DistributionKind::Explosion, 20}, {DistributionKind::Cluster, 50},  {DistributionKind::Grid, 100}};
  std::vector<PrincipalTask> p;
  for (auto [kind, scale] : specs) {
    PrincipalTask t;
    t.name = std::string(to_string(kind));
    t.distribution = kind;
    t.scale = scale;
    p.push_back(t);
  }
  return make_schedule(problem, std::move(p), 1000);
}

}  // namespace dree::io
