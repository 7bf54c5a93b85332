#pragma once

// Field CSV format:
//   # grid dim=<d> n=<n1,...> bounds=<a1,b1;...>
// followed by one value per line in row-major node order.

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "picone_lab/grid.hpp"

namespace picone_lab {

namespace detail {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidInput("not a number: '" + s + "'");
  }
  while (used < s.size() && (s[used] == ' ' || s[used] == '\r' || s[used] == '\t')) ++used;
  if (used != s.size()) throw InvalidInput("trailing characters in number: '" + s + "'");
  return v;
}

}  // namespace detail

inline std::string grid_header(const Grid& g) {
  std::string out = "# grid dim=" + std::to_string(g.dim()) + " n=";
  for (std::size_t a = 0; a < g.dim(); ++a) {
    if (a) out += ',';
    out += std::to_string(g.resolution()[a]);
  }
  out += " bounds=";
  for (std::size_t a = 0; a < g.dim(); ++a) {
    if (a) out += ';';
    out += detail::format_double(g.bounds()[a].lo) + ',' + detail::format_double(g.bounds()[a].hi);
  }
  return out;
}

inline Grid parse_grid_header(const std::string& line) {
  std::istringstream in(line);
  std::string hash, tag;
  in >> hash >> tag;
  if (hash != "#" || tag != "grid") throw InvalidInput("field CSV must start with '# grid'");
  std::size_t dim = 0;
  std::vector<std::size_t> n;
  std::vector<Interval> bounds;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw InvalidInput("malformed grid header token '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "dim") {
      dim = static_cast<std::size_t>(detail::parse_double(val));
    } else if (key == "n") {
      for (const auto& s : detail::split(val, ',')) n.push_back(static_cast<std::size_t>(detail::parse_double(s)));
    } else if (key == "bounds") {
      for (const auto& pair : detail::split(val, ';')) {
        const auto ab = detail::split(pair, ',');
        if (ab.size() != 2) throw InvalidInput("malformed bounds '" + pair + "'");
        bounds.push_back({detail::parse_double(ab[0]), detail::parse_double(ab[1])});
      }
    } else {
      throw InvalidInput("unknown grid header key '" + key + "'");
    }
  }
  if (dim != n.size() || dim != bounds.size()) throw InvalidInput("inconsistent grid header");
  return Grid(std::move(bounds), std::move(n));
}

inline void write_field_csv(std::ostream& out, const ScalarField& f) {
  out << grid_header(f.grid) << '\n';
  for (double v : f.values) out << detail::format_double(v) << '\n';
}

inline ScalarField read_field_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty field CSV");
  Grid g = parse_grid_header(line);
  std::vector<double> values;
  values.reserve(g.size());
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    values.push_back(detail::parse_double(line));
  }
  if (values.size() != g.size()) {
    throw InvalidInput("field CSV has " + std::to_string(values.size()) + " values, grid needs " +
                       std::to_string(g.size()));
  }
  return ScalarField(std::move(g), std::move(values));
}

inline void write_field_csv(const std::string& path, const ScalarField& f) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  write_field_csv(out, f);
}

inline ScalarField read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return read_field_csv(in);
}

}  // namespace picone_lab
