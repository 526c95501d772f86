#pragma once

#include <string>
#include <vector>

namespace bsdelab {

/// Minimal native SVG line plots (no external plotting process). Intended
/// for convergence studies: one polyline per series, optional log-log axes.
class SvgLinePlot {
 public:
  SvgLinePlot(std::string title, bool log_x, bool log_y) : title_(std::move(title)), log_x_(log_x), log_y_(log_y) {}

  void add_series(const std::string& label, const std::vector<double>& x, const std::vector<double>& y);
  void write(const std::string& filename) const;

 private:
  struct Series {
    std::string label;
    std::vector<double> x, y;
  };
  std::string title_;
  bool log_x_, log_y_;
  std::vector<Series> series_;
};

/// Single-field heat map of a (rows x cols) array, row 0 at the top.
void write_svg_heatmap(const std::string& filename, const std::string& title,
                       const std::vector<std::vector<double>>& rows);

}  // namespace bsdelab
