#include "uagan/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "uagan/error.hpp"

namespace uagan {
namespace {

constexpr double kSize = 480.0;
constexpr double kMargin = 40.0;

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

NumericCsv read_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  NumericCsv csv;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  csv.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != csv.header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(csv.header.size()) + " fields, got " +
                        std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != c.size()) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
      }
      row.push_back(v);
    }
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

std::vector<std::array<double, 2>> points_from_csv(const NumericCsv& csv) {
  if (csv.header.size() < 2) throw FormatError("point CSV needs at least two columns");
  std::vector<std::array<double, 2>> pts;
  for (const auto& r : csv.rows) pts.push_back({r[0], r[1]});
  return pts;
}

std::vector<std::array<double, 3>> heat_from_csv(const NumericCsv& csv) {
  if (csv.header.size() < 3) throw FormatError("heat CSV needs x, y and value columns");
  std::vector<std::array<double, 3>> cells;
  for (const auto& r : csv.rows) cells.push_back({r[0], r[1], r[2]});
  return cells;
}

std::string render_svg(const PlotInput& input) {
  double lo_x = INFINITY, hi_x = -INFINITY, lo_y = INFINITY, hi_y = -INFINITY;
  auto extend = [&](double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    lo_x = std::min(lo_x, x);
    hi_x = std::max(hi_x, x);
    lo_y = std::min(lo_y, y);
    hi_y = std::max(hi_y, y);
  };
  for (const auto* set : {&input.real, &input.generated, &input.noise}) {
    for (const auto& p : *set) extend(p[0], p[1]);
  }
  for (const auto& c : input.heat) extend(c[0], c[1]);
  if (!(lo_x <= hi_x)) {
    lo_x = lo_y = -1.0;
    hi_x = hi_y = 1.0;
  }
  // Square frame around the data with a little padding.
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9}) * 1.1;
  const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
  const double x0 = cx - span / 2, y0 = cy - span / 2;
  const double inner = kSize - 2 * kMargin;
  auto sx = [&](double x) { return kMargin + (x - x0) / span * inner; };
  auto sy = [&](double y) { return kSize - kMargin - (y - y0) / span * inner; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
    << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  o << "<style>.real{fill:#1f77b4}.generated{fill:#d62728}.noise{fill:#7f7f7f}"
       ".axis{stroke:#000;stroke-width:1}</style>\n";

  if (!input.heat.empty()) {
    // Cell size from the grid spacing along x.
    std::set<double> xs;
    for (const auto& c : input.heat) xs.insert(c[0]);
    double step = span / 50;
    if (xs.size() > 1) step = (*xs.rbegin() - *xs.begin()) / static_cast<double>(xs.size() - 1);
    const double w = step / span * inner;
    o << "<g class=\"heatmap\">\n";
    for (const auto& c : input.heat) {
      const double v = std::clamp(c[2], 0.0, 1.0);
      o << "<rect class=\"heat\" x=\"" << fmt(sx(c[0]) - w / 2) << "\" y=\"" << fmt(sy(c[1]) - w / 2)
        << "\" width=\"" << fmt(w) << "\" height=\"" << fmt(w) << "\" fill=\"#ffa500\" fill-opacity=\""
        << fmt(v) << "\"/>\n";
    }
    o << "</g>\n";
  }

  o << "<line class=\"axis\" x1=\"" << kMargin << "\" y1=\"" << kSize - kMargin << "\" x2=\""
    << kSize - kMargin << "\" y2=\"" << kSize - kMargin << "\"/>\n";
  o << "<line class=\"axis\" x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
    << "\" y2=\"" << kSize - kMargin << "\"/>\n";
  o << "<text x=\"" << kMargin << "\" y=\"" << kSize - 10 << "\" font-size=\"10\">" << fmt(x0)
    << "</text>\n";
  o << "<text x=\"" << kSize - kMargin << "\" y=\"" << kSize - 10
    << "\" font-size=\"10\" text-anchor=\"end\">" << fmt(x0 + span) << "</text>\n";

  auto markers = [&](const std::vector<std::array<double, 2>>& pts, const char* cls, double r) {
    for (const auto& p : pts) {
      if (!std::isfinite(p[0]) || !std::isfinite(p[1])) continue;
      o << "<circle class=\"marker " << cls << "\" cx=\"" << fmt(sx(p[0])) << "\" cy=\""
        << fmt(sy(p[1])) << "\" r=\"" << r << "\"/>\n";
    }
  };
  markers(input.real, "real", 1.5);
  markers(input.noise, "noise", 1.5);
  markers(input.generated, "generated", 1.5);
  o << "</svg>\n";
  return o.str();
}

}  // namespace uagan
