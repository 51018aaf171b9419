#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsel/penalty.hpp"
#include "mixsel/selection.hpp"
#include "mixsel/slope.hpp"

namespace mixsel {

inline constexpr int kSchemaVersion = 1;

/// Shortest round-trip decimal form ("%.17g"); "inf"/"nan" for non-finite values.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

/// One real per line; blank lines and lines starting with '#' are skipped.
inline std::vector<double> read_sample_csv(std::istream& in) {
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r,");
    const std::string field = line.substr(first, last - first + 1);
    try {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      if (used != field.size()) throw std::invalid_argument("");
      out.push_back(v);
    } catch (const std::exception&) {
      // Allow a single header line.
      if (out.empty() && line_no == 1) continue;
      throw std::invalid_argument("line " + std::to_string(line_no) + ": not a real number");
    }
  }
  return out;
}

inline std::vector<double> read_sample_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_sample_csv(in);
}

inline void write_sample_csv(std::ostream& out, const std::vector<double>& sample) {
  for (double x : sample) out << format_double(x) << '\n';
}

inline void write_criterion_csv(std::ostream& out, const SelectionReport& report, PenaltyMethod method) {
  out << "model,dim,contrast,pen,risk,ideal_pen,p_w,method,se\n";
  for (const auto& r : report.rows) {
    out << r.model_index << ',' << r.dim << ',' << format_double(r.contrast) << ',' << format_double(r.pen) << ','
        << format_optional(r.risk) << ',' << format_optional(r.ideal_pen) << ',' << format_double(r.p_w) << ','
        << to_string(method) << ',' << format_double(r.standard_error) << '\n';
  }
}

inline void write_slope_csv(std::ostream& out, const SlopePath& path) {
  out << "K,model,delta\n";
  for (const auto& pt : path.points)
    out << format_double(pt.K) << ',' << pt.model_index << ',' << format_double(pt.delta) << '\n';
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace mixsel
