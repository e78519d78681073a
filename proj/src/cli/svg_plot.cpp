#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "dsmis/cli.hpp"
#include "dsmis/report.hpp"

namespace dsmis::cli {

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 80, kRight = 180, kTop = 30, kBottom = 60;
constexpr const char* kColors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                   "#66a61e", "#e6ab02", "#a6761d", "#666666"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_figure_svg(const ExperimentGrid& grid, const FigureRun& run) {
  double r_max = 0.0;
  double lo = INFINITY, hi = -INFINITY;
  auto widen = [&](double v) {
    if (v > 0.0 && std::isfinite(v)) {
      lo = std::min(lo, std::log10(v));
      hi = std::max(hi, std::log10(v));
    }
  };
  for (const auto& p : run.points) {
    r_max = std::max(r_max, static_cast<double>(p.r));
    widen(static_cast<double>(p.n_star_hat_lo));
    widen(static_cast<double>(p.n_star_hat_hi));
    widen(static_cast<double>(p.n_star_bound));
  }
  if (!std::isfinite(lo)) lo = 4, hi = 5;
  const double y0 = std::floor(lo);
  const double y1 = std::max(y0 + 1.0, std::min(std::ceil(hi), y0 + 20.0));
  const double x1 = std::max(1.0, r_max * 1.05);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto X = [&](double r) { return kLeft + pw * r / x1; };
  auto Y = [&](double v) {
    const double l = std::clamp(std::log10(std::max(v, 1e-300)), y0, y1);
    return kTop + ph * (1.0 - (l - y0) / (y1 - y0));
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double d = y0; d <= y1; d += 1.0) {
    s << "<line x1=\"" << kLeft - 5 << "\" x2=\"" << kLeft << "\" y1=\"" << fmt(Y(std::pow(10, d)))
      << "\" y2=\"" << fmt(Y(std::pow(10, d))) << "\" stroke=\"black\"/>";
    s << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt(Y(std::pow(10, d)) + 4)
      << "\" text-anchor=\"end\">1e" << static_cast<int>(d) << "</text>\n";
  }
  for (std::size_t r : grid.r_values) {
    s << "<line x1=\"" << fmt(X(static_cast<double>(r))) << "\" x2=\"" << fmt(X(static_cast<double>(r)))
      << "\" y1=\"" << kTop + ph << "\" y2=\"" << kTop + ph + 5 << "\" stroke=\"black\"/>";
    s << "<text x=\"" << fmt(X(static_cast<double>(r))) << "\" y=\"" << kTop + ph + 18
      << "\" text-anchor=\"middle\">" << r << "</text>\n";
  }
  s << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15
    << "\" text-anchor=\"middle\">r (observed mutations)</text>\n";
  s << "<text transform=\"translate(20," << kTop + ph / 2
    << ") rotate(-90)\" text-anchor=\"middle\">N* (eps = " << format_number(grid.epsilon)
    << ")</text>\n";

  const double sqrt_n = std::sqrt(static_cast<double>(grid.n));
  if (sqrt_n <= x1) {
    s << "<line x1=\"" << fmt(X(sqrt_n)) << "\" x2=\"" << fmt(X(sqrt_n)) << "\" y1=\"" << kTop
      << "\" y2=\"" << kTop + ph << "\" stroke=\"gray\" stroke-width=\"1\"/>\n";
  }

  for (std::size_t k = 0; k < grid.t_values.size(); ++k) {
    const std::string color = kColors[k % std::size(kColors)];
    std::string bound, empirical;
    for (const auto& p : run.points) {
      if (p.t_value != grid.t_values[k]) continue;
      const double x = X(static_cast<double>(p.r));
      bound += fmt(x) + "," + fmt(Y(static_cast<double>(p.n_star_bound))) + " ";
      empirical += fmt(x) + "," + fmt(Y(static_cast<double>(p.n_star_hat))) + " ";
      s << "<line x1=\"" << fmt(x) << "\" x2=\"" << fmt(x) << "\" y1=\""
        << fmt(Y(static_cast<double>(p.n_star_hat_lo))) << "\" y2=\""
        << fmt(Y(static_cast<double>(p.n_star_hat_hi))) << "\" stroke=\"" << color << "\"/>\n";
    }
    s << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-dasharray=\"6,4\" points=\"" << bound << "\"/>\n";
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
      << empirical << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(k) + 10.0;
    s << "<line x1=\"" << kWidth - kRight + 15 << "\" x2=\"" << kWidth - kRight + 40 << "\" y1=\""
      << ly << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
    s << "<text x=\"" << kWidth - kRight + 45 << "\" y=\"" << ly + 4 << "\">T = "
      << format_number(grid.t_values[k]) << (grid.t_absolute ? "" : " r/n") << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace dsmis::cli
