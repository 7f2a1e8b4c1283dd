#pragma once

// Reader for the EUC_2D subset of TSPLIB / CVRPLIB files, and the table of
// best-known objective values used for LIB gaps.
//
// Supported header keys: NAME, TYPE (TSP | CVRP), COMMENT, DISPLAY_DATA_TYPE, DIMENSION,
// EDGE_WEIGHT_TYPE (EUC_2D only), CAPACITY. Sections: NODE_COORD_SECTION,
// DEMAND_SECTION, DEPOT_SECTION (single depot, terminated by -1), EOF.
// Coordinates are rescaled into [0,1]^2 by the larger of the two extents;
// travel costs stay on the original coordinates with nearest-integer
// rounding.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dree/error.hpp"
#include "dree/io/scenario.hpp"
#include "dree/vrp.hpp"

namespace dree::io {

namespace detail {

inline std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

}  // namespace detail

inline Instance parse_tsplib(std::istream& in) {
  std::string name, type;
  std::optional<int> dimension;
  std::optional<int> capacity;
  std::map<int, Point> coords;
  std::map<int, int> demands;
  std::vector<int> depots;

  enum class Section { None, Coords, Demands, Depots };
  Section section = Section::None;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    std::string line = detail::trim(raw);
    if (line.empty()) continue;

    const auto colon = line.find(':');
    std::string head = detail::upper(detail::trim(line.substr(0, colon)));
    if (head == "EOF") break;
    if (head == "NODE_COORD_SECTION" || head == "DEMAND_SECTION" || head == "DEPOT_SECTION") {
      section = head == "NODE_COORD_SECTION" ? Section::Coords
                : head == "DEMAND_SECTION"   ? Section::Demands
                                             : Section::Depots;
      continue;
    }
    if (colon != std::string::npos) {
      const std::string value = detail::trim(line.substr(colon + 1));
      section = Section::None;
      if (head == "NAME") {
        name = value;
      } else if (head == "TYPE") {
        type = detail::upper(value);
        if (type != "TSP" && type != "CVRP") throw Error(where + ": unsupported problem type '" + value + "'");
      } else if (head == "DIMENSION") {
        dimension = dree::io::detail::parse_number<int>(value, where);
      } else if (head == "CAPACITY") {
        capacity = dree::io::detail::parse_number<int>(value, where);
      } else if (head == "EDGE_WEIGHT_TYPE") {
        if (detail::upper(value) != "EUC_2D") throw Error("unsupported edge weight type '" + value + "'");
      } else if (head == "COMMENT" || head == "DISPLAY_DATA_TYPE") {
      } else {
        throw Error(where + ": unsupported keyword '" + head + "'");
      }
      continue;
    }

    std::istringstream fields(line);
    switch (section) {
      case Section::Coords: {
        int id = 0;
        Point p;
        if (!(fields >> id >> p.x >> p.y) || !(fields >> std::ws).eof())
          throw Error(where + ": malformed NODE_COORD_SECTION entry");
        if (!coords.emplace(id, p).second) throw Error(where + ": duplicate node " + std::to_string(id));
        break;
      }
      case Section::Demands: {
        int id = 0, d = 0;
        if (!(fields >> id >> d) || !(fields >> std::ws).eof()) throw Error(where + ": malformed DEMAND_SECTION entry");
        if (!demands.emplace(id, d).second) throw Error(where + ": duplicate demand for node " + std::to_string(id));
        break;
      }
      case Section::Depots: {
        int id = 0;
        if (!(fields >> id) || !(fields >> std::ws).eof()) throw Error(where + ": malformed DEPOT_SECTION entry");
        if (id == -1) {
          section = Section::None;
          break;
        }
        depots.push_back(id);
        break;
      }
      case Section::None:
        throw Error(where + ": unexpected data outside a section");
    }
  }

  if (type.empty()) throw Error("missing TYPE");
  if (!dimension || *dimension < 1) throw Error("missing DIMENSION");
  if (static_cast<int>(coords.size()) != *dimension)
    throw Error("DIMENSION mismatch: header says " + std::to_string(*dimension) + ", NODE_COORD_SECTION has " +
                std::to_string(coords.size()));
  for (int id = 1; id <= *dimension; ++id)
    if (!coords.count(id)) throw Error("malformed NODE_COORD_SECTION: node ids must run 1.." + std::to_string(*dimension));

  double min_x = coords.begin()->second.x, max_x = min_x;
  double min_y = coords.begin()->second.y, max_y = min_y;
  for (const auto& [id, p] : coords) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double extent = std::max(max_x - min_x, max_y - min_y);
  auto scaled = [&](Point p) {
    if (extent == 0.0) return Point{0.0, 0.0};
    return Point{std::clamp((p.x - min_x) / extent, 0.0, 1.0), std::clamp((p.y - min_y) / extent, 0.0, 1.0)};
  };

  if (type == "TSP") {
    std::vector<Point> nodes, original;
    for (const auto& [id, p] : coords) {
      nodes.push_back(scaled(p));
      original.push_back(p);
    }
    return Instance::tsp(std::move(nodes), name).with_rounded_costs(original);
  }

  if (!capacity) throw Error("CVRP file missing CAPACITY");
  if (depots.size() != 1) throw Error("malformed DEPOT_SECTION: exactly one depot required");
  if (static_cast<int>(demands.size()) != *dimension)
    throw Error("DIMENSION mismatch: DEMAND_SECTION has " + std::to_string(demands.size()) + " entries");
  const int depot = depots.front();
  if (!coords.count(depot)) throw Error("malformed DEPOT_SECTION: unknown depot node");

  std::vector<Point> nodes, original;
  std::vector<int> node_demands;
  for (const auto& [id, p] : coords) {
    if (id == depot) continue;
    auto it = demands.find(id);
    if (it == demands.end()) throw Error("malformed DEMAND_SECTION: missing node " + std::to_string(id));
    nodes.push_back(scaled(p));
    original.push_back(p);
    node_demands.push_back(it->second);
  }
  const Point depot_point = coords.at(depot);
  return Instance::cvrp(std::move(nodes), std::move(node_demands), *capacity, scaled(depot_point), name)
      .with_rounded_costs(original, depot_point);
}

inline Instance load_tsplib(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return parse_tsplib(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

/// name -> best-known objective, from lines `<name> <value> <source>`.
inline std::map<std::string, double> load_best_known(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::map<std::string, double> table;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name, value;
    if (!(fields >> name >> value)) throw Error(path + ": line " + std::to_string(line_no) + ": expected name and value");
    table[name] = detail::parse_number<double>(value, path + ": line " + std::to_string(line_no));
  }
  return table;
}

}  // namespace dree::io
