// Rendering of sweep results: a plain-text mean-error table and a static SVG
// line chart with the sample size on the x-axis and one polyline per budget,
// mirroring the usual error-vs-N presentation.
#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cot/harness.hpp"

namespace cot {

namespace detail {

inline std::string short_float(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace detail

// Matrix-style table: one row per N, one column per B, cells are mean |e|.
inline void write_error_matrix(const std::vector<SummaryCell>& cells, std::ostream& out) {
  std::set<int> sizes;
  std::set<double> budgets;
  std::map<std::pair<int, double>, double> mean;
  for (const SummaryCell& cell : cells) {
    sizes.insert(cell.sample_size);
    budgets.insert(cell.budget);
    mean[{cell.sample_size, cell.budget}] = cell.mean_err_after;
  }
  out << "mean |e| by sample size (rows) and budget (columns)\n";
  out << std::left << std::setw(8) << "N";
  for (double b : budgets) out << std::setw(14) << ("B=" + detail::short_float(b));
  out << '\n';
  for (int n : sizes) {
    out << std::left << std::setw(8) << n;
    for (double b : budgets) {
      auto it = mean.find({n, b});
      std::ostringstream value;
      if (it != mean.end()) {
        value << std::setprecision(6) << it->second;
      } else {
        value << "-";
      }
      out << std::setw(14) << value.str();
    }
    out << '\n';
  }
}

// Static SVG chart of mean |e| against N, one polyline per budget. Axes are
// drawn with <line> elements so counting <polyline> tags counts data series.
inline void write_error_svg(const std::vector<SummaryCell>& cells, std::ostream& out) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  const int width = 640, height = 440;
  const double left = 70, right = 600, top = 40, bottom = 380;

  std::set<int> sizes;
  std::set<double> budgets;
  double max_err = 0.0;
  for (const SummaryCell& cell : cells) {
    sizes.insert(cell.sample_size);
    budgets.insert(cell.budget);
    max_err = std::max(max_err, cell.mean_err_after);
  }
  if (max_err <= 0.0) max_err = 1.0;
  const int min_n = *sizes.begin();
  const int max_n = *sizes.rbegin();
  const double n_span = max_n > min_n ? static_cast<double>(max_n - min_n) : 1.0;

  auto x_of = [&](int n) {
    return left + (right - left) * (static_cast<double>(n - min_n) / n_span);
  };
  auto y_of = [&](double err) { return bottom - (bottom - top) * (err / (1.1 * max_err)); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "  <line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
      << bottom << "\" stroke=\"black\"/>\n";
  out << "  <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << bottom << "\" stroke=\"black\"/>\n";
  out << "  <text x=\"" << (left + right) / 2 << "\" y=\"" << bottom + 40
      << "\" text-anchor=\"middle\" font-size=\"14\">sample size N</text>\n";
  out << "  <text x=\"18\" y=\"" << (top + bottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 "
      << (top + bottom) / 2 << ")\">mean |e|</text>\n";

  for (int n : sizes) {
    out << "  <text x=\"" << x_of(n) << "\" y=\"" << bottom + 18
        << "\" text-anchor=\"middle\" font-size=\"12\">" << n << "</text>\n";
  }
  for (int tick = 0; tick <= 4; ++tick) {
    const double err = 1.1 * max_err * tick / 4.0;
    out << "  <text x=\"" << left - 8 << "\" y=\"" << y_of(err) + 4
        << "\" text-anchor=\"end\" font-size=\"12\">" << std::setprecision(3) << err
        << "</text>\n";
  }

  std::map<std::pair<int, double>, double> mean;
  for (const SummaryCell& cell : cells) {
    mean[{cell.sample_size, cell.budget}] = cell.mean_err_after;
  }

  int series = 0;
  for (double b : budgets) {
    const char* color = kPalette[series % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::ostringstream points;
    for (int n : sizes) {
      auto it = mean.find({n, b});
      if (it == mean.end()) continue;
      points << x_of(n) << ',' << y_of(it->second) << ' ';
      out << "  <circle cx=\"" << x_of(n) << "\" cy=\"" << y_of(it->second)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
        << points.str() << "\"/>\n";
    out << "  <text x=\"" << right - 120 << "\" y=\"" << (top + 18 * series)
        << "\" font-size=\"12\" fill=\"" << color << "\">B = " << detail::short_float(b)
        << "</text>\n";
    ++series;
  }
  out << "</svg>\n";
}

}  // namespace cot
