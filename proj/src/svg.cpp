#include "bsdelab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "bsdelab/errors.hpp"

namespace bsdelab {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kMargin = 56;

const char* kPalette[6] = {"#1f6fb2", "#c23b22", "#2e8b57", "#8a5fbf", "#b8860b", "#444444"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void SvgLinePlot::add_series(const std::string& label, const std::vector<double>& x,
                             const std::vector<double>& y) {
  series_.push_back({label, x, y});
}

void SvgLinePlot::write(const std::string& filename) const {
  std::ofstream f(filename);
  if (!f) throw SolveError("cannot open " + filename + " for writing");

  auto tx = [this](double v) { return log_x_ ? std::log10(std::max(v, 1e-300)) : v; };
  auto ty = [this](double v) { return log_y_ ? std::log10(std::max(v, 1e-300)) : v; };

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series_)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, tx(s.x[i]));
      xmax = std::max(xmax, tx(s.x[i]));
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;

  auto px = [&](double v) { return kMargin + (tx(v) - xmin) / (xmax - xmin) * (kWidth - 2 * kMargin); };
  auto py = [&](double v) { return kHeight - kMargin - (ty(v) - ymin) / (ymax - ymin) * (kHeight - 2 * kMargin); };

  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title_
    << "</text>\n";
  f << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin << "\" height=\""
    << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"#888\"/>\n";

  // corner labels carry the data range; good enough for convergence plots
  f << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 18 << "\" font-size=\"11\">"
    << (log_x_ ? "1e" + num(xmin) : num(xmin)) << "</text>\n";
  f << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 18
    << "\" text-anchor=\"end\" font-size=\"11\">" << (log_x_ ? "1e" + num(xmax) : num(xmax)) << "</text>\n";
  f << "<text x=\"" << kMargin - 4 << "\" y=\"" << kHeight - kMargin << "\" text-anchor=\"end\" font-size=\"11\">"
    << (log_y_ ? "1e" + num(ymin) : num(ymin)) << "</text>\n";
  f << "<text x=\"" << kMargin - 4 << "\" y=\"" << kMargin + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
    << (log_y_ ? "1e" + num(ymax) : num(ymax)) << "</text>\n";

  int color = 0;
  for (const auto& s : series_) {
    f << "<polyline fill=\"none\" stroke=\"" << kPalette[color % 6] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) f << num(px(s.x[i])) << "," << num(py(s.y[i])) << " ";
    f << "\"/>\n";
    f << "<text x=\"" << kWidth - kMargin - 4 << "\" y=\"" << kMargin + 16 + 16 * color
      << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << kPalette[color % 6] << "\">" << s.label
      << "</text>\n";
    ++color;
  }
  f << "</svg>\n";
}

void write_svg_heatmap(const std::string& filename, const std::string& title,
                       const std::vector<std::vector<double>>& rows) {
  std::ofstream f(filename);
  if (!f) throw SolveError("cannot open " + filename + " for writing");
  if (rows.empty() || rows[0].empty()) throw std::invalid_argument("heatmap: empty field");

  double lo = 1e300, hi = -1e300;
  for (const auto& r : rows)
    for (double v : r) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > lo)) hi = lo + 1.0;

  const std::size_t nr = rows.size(), nc = rows[0].size();
  const double cw = static_cast<double>(kWidth - 2 * kMargin) / static_cast<double>(nc);
  const double ch = static_cast<double>(kHeight - 2 * kMargin) / static_cast<double>(nr);

  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title
    << "</text>\n";
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c) {
      const double w = (rows[r][c] - lo) / (hi - lo);
      const int red = static_cast<int>(255 * w);
      const int blue = static_cast<int>(255 * (1.0 - w));
      f << "<rect x=\"" << num(kMargin + c * cw) << "\" y=\"" << num(kMargin + r * ch) << "\" width=\""
        << num(cw + 0.5) << "\" height=\"" << num(ch + 0.5) << "\" fill=\"rgb(" << red << ",64," << blue
        << ")\"/>\n";
    }
  f << "</svg>\n";
}

}  // namespace bsdelab
