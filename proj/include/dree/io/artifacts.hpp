#pragma once

// Run artifacts on disk.
//
// curves.csv   header `epoch,<task 1>,...,<task K>`, then T+1 rows of
//              `t,d(t,1),...,d(t,K)`; gaps in percent, 17 significant digits.
// metrics.json {"metrics": {"ap","afb","amfb","abpl"}, "seed", "config",
//              "tasks", "replays_per_epoch", "enhancements_per_epoch"}.
// curves.svg   one polyline per task over epoch x gap, with a translucent
//              band per task over the epochs where it feeds the mixture.
//
// A file set is written to temporary names first and renamed into place only
// once every file has been written.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dree/error.hpp"
#include "dree/io/scenario.hpp"
#include "dree/metrics.hpp"
#include "dree/policy.hpp"
#include "dree/taskgen.hpp"

namespace dree::io {

inline std::string curves_csv(const MetricsLedger& ledger, const std::vector<std::string>& task_names) {
  require(static_cast<int>(task_names.size()) == ledger.task_count(), "one name per task required");
  std::string out = "epoch";
  for (const auto& n : task_names) out += "," + n;
  out += '\n';
  for (int t = 0; t <= ledger.total_epochs(); ++t) {
    out += std::to_string(t);
    for (int i = 0; i < ledger.task_count(); ++i) out += "," + format_double(ledger.at(t, i));
    out += '\n';
  }
  return out;
}

struct Curves {
  std::vector<std::string> task_names;
  MetricsLedger ledger;
};

inline Curves parse_curves_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("curves: empty file");
  auto header = detail::split(line, ',');
  if (header.size() < 2 || header[0] != "epoch") throw Error("curves: header must start with 'epoch'");
  Curves c;
  c.task_names.assign(header.begin() + 1, header.end());

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = "curves: line " + std::to_string(line_no);
    auto fields = detail::split(line, ',');
    if (fields.size() != header.size()) throw Error(where + ": wrong number of fields");
    if (detail::parse_number<int>(fields[0], where) != static_cast<int>(rows.size()))
      throw Error(where + ": epochs must run 0, 1, 2, ...");
    std::vector<double> row;
    for (std::size_t k = 1; k < fields.size(); ++k) row.push_back(detail::parse_number<double>(fields[k], where));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("curves: no rows");
  c.ledger = MetricsLedger(static_cast<int>(c.task_names.size()), static_cast<int>(rows.size()) - 1);
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t i = 0; i < rows[t].size(); ++i) c.ledger.record(static_cast<int>(t), static_cast<int>(i), rows[t][i]);
  return c;
}

inline Curves load_curves(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_curves_csv(in);
}

inline nlohmann::ordered_json metrics_json(const LifelongMetrics& m) {
  nlohmann::ordered_json j;
  j["ap"] = m.ap;
  j["afb"] = m.afb;
  j["amfb"] = m.amfb;
  j["abpl"] = m.abpl;
  return j;
}

namespace detail {

inline const char* task_colour(int i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};
  return palette[static_cast<std::size_t>(i) % std::size(palette)];
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fixed(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

}  // namespace detail

/// Learning curves as SVG. `interval` is the principal spacing m; principal i
/// feeds the mixture over epochs [(i-1)m, (i+1)m] clipped to [0, T].
inline std::string curves_svg(const MetricsLedger& ledger, const std::vector<std::string>& task_names, int interval) {
  require(static_cast<int>(task_names.size()) == ledger.task_count(), "one name per task required");
  constexpr double width = 800, height = 480, left = 70, right = 150, top = 30, bottom = 60;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  const int last = ledger.total_epochs();
  const double x_span = std::max(last, 1);

  double lo = ledger.at(0, 0), hi = lo;
  for (int t = 0; t <= last; ++t)
    for (int i = 0; i < ledger.task_count(); ++i) {
      lo = std::min(lo, ledger.at(t, i));
      hi = std::max(hi, ledger.at(t, i));
    }
  lo = std::min(lo, 0.0);
  if (hi - lo < 1e-9) hi = lo + 1.0;
  auto x_of = [&](double t) { return left + plot_w * t / x_span; };
  auto y_of = [&](double g) { return top + plot_h * (1.0 - (g - lo) / (hi - lo)); };

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int i = 0; i < ledger.task_count(); ++i) {
    if (interval <= 0) break;
    const double from = std::max(0, (i - 1) * interval);
    const double to = std::min(last, (i + 1) * interval);
    s << "<rect class=\"band\" x=\"" << detail::fixed(x_of(from)) << "\" y=\"" << top << "\" width=\""
      << detail::fixed(x_of(to) - x_of(from)) << "\" height=\"" << plot_h << "\" fill=\"" << detail::task_colour(i)
      << "\" fill-opacity=\"0.08\"/>\n";
  }

  s << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double t = x_span * k / 4.0, g = lo + (hi - lo) * k / 4.0;
    s << "<text x=\"" << detail::fixed(x_of(t)) << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
      << detail::fixed(t) << "</text>\n";
    s << "<text x=\"" << left - 6 << "\" y=\"" << detail::fixed(y_of(g) + 4) << "\" text-anchor=\"end\">"
      << detail::fixed(g) << "</text>\n";
  }
  s << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\">epoch</text>\n";
  s << "<text x=\"18\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << top + plot_h / 2 << ")\">mean optimality gap (%)</text>\n";

  for (int i = 0; i < ledger.task_count(); ++i) {
    s << "<polyline fill=\"none\" stroke=\"" << detail::task_colour(i) << "\" stroke-width=\"1.5\" points=\"";
    for (int t = 0; t <= last; ++t)
      s << (t ? " " : "") << detail::fixed(x_of(t)) << ',' << detail::fixed(y_of(ledger.at(t, i)));
    s << "\"/>\n";
    const double ly = top + 16.0 * i + 8;
    s << "<line x1=\"" << left + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + plot_w + 32 << "\" y2=\"" << ly
      << "\" stroke=\"" << detail::task_colour(i) << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << left + plot_w + 38 << "\" y=\"" << ly + 4 << "\">"
      << detail::xml_escape(task_names[static_cast<std::size_t>(i)]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

struct OutputFile {
  std::filesystem::path path;
  std::string content;
};

/// Writes every file under a temporary name, then renames them into place.
/// On any failure the temporaries are removed and no target is touched.
inline void write_files_atomically(const std::vector<OutputFile>& files) {
  std::vector<std::filesystem::path> temps;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& t : temps) std::filesystem::remove(t, ec);
  };
  try {
    for (const auto& f : files) {
      auto tmp = f.path;
      tmp += ".tmp";
      temps.push_back(tmp);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write '" + tmp.string() + "'");
      out << f.content;
      out.close();
      if (!out) throw Error("write failed for '" + tmp.string() + "'");
    }
    for (std::size_t k = 0; k < files.size(); ++k) std::filesystem::rename(temps[k], files[k].path);
  } catch (const std::filesystem::filesystem_error& e) {
    cleanup();
    throw Error(e.what());
  } catch (...) {
    cleanup();
    throw;
  }
}

inline void write_file_atomically(const std::filesystem::path& path, std::string content) {
  write_files_atomically({OutputFile{path, std::move(content)}});
}

}  // namespace dree::io
