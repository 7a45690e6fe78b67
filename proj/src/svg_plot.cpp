#include "rvf/svg_plot.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>

#include "rvf/errors.hpp"

namespace rvf {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string fmt_tick(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

void check(const AggregateResult& agg) {
  if (agg.curves.empty())
    throw SchemaError("nothing to plot: aggregate has no curves");
  for (const Curve& c : agg.curves) {
    const std::size_t n = c.episodes.size();
    if (n == 0)
      throw SchemaError("curve '" + c.method + "' has no checkpoints");
    if (c.mean.size() != n || c.se.size() != n || c.lo.size() != n ||
        c.hi.size() != n || c.n_seeds.size() != n)
      throw SchemaError("curve '" + c.method +
                        "' has mismatched column lengths");
  }
}

}  // namespace

std::string emit_plot(const AggregateResult& agg, const PlotStyle& style) {
  check(agg);

  double xmin = agg.curves[0].episodes.front();
  double xmax = agg.curves[0].episodes.back();
  double ymin = 0.0, ymax = agg.curves[0].hi[0];
  for (const Curve& c : agg.curves) {
    xmin = std::min(xmin, static_cast<double>(c.episodes.front()));
    xmax = std::max(xmax, static_cast<double>(c.episodes.back()));
    for (std::size_t k = 0; k < c.episodes.size(); ++k) {
      ymin = std::min(ymin, c.lo[k]);
      ymax = std::max(ymax, c.hi[k]);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  ymax += 0.05 * (ymax - ymin);

  const int W = style.width, H = style.height;
  const double left = 62, right = 16, top = 34, bottom = 46;
  const double pw = W - left - right, ph = H - top - bottom;
  auto sx = [&](double e) { return left + (e - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double v) {
    return top + (1.0 - (v - ymin) / (ymax - ymin)) * ph;
  };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H
      << "\">\n"
      << "<rect width=\"" << W << "\" height=\"" << H
      << "\" fill=\"#ffffff\"/>\n";

  const std::string title =
      style.title.empty() ? agg.experiment : style.title;
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << title << "</text>\n";

  // Frame and ticks.
  out << "<g stroke=\"#333333\" stroke-width=\"1\">\n"
      << "<line x1=\"" << fmt2(left) << "\" y1=\"" << fmt2(top) << "\" x2=\""
      << fmt2(left) << "\" y2=\"" << fmt2(top + ph) << "\"/>\n"
      << "<line x1=\"" << fmt2(left) << "\" y1=\"" << fmt2(top + ph)
      << "\" x2=\"" << fmt2(left + pw) << "\" y2=\"" << fmt2(top + ph)
      << "\"/>\n</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
  for (int i = 0; i < 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    out << "<line x1=\"" << fmt2(sx(xv)) << "\" y1=\"" << fmt2(top + ph)
        << "\" x2=\"" << fmt2(sx(xv)) << "\" y2=\"" << fmt2(top + ph + 4)
        << "\" stroke=\"#333333\"/>\n"
        << "<text x=\"" << fmt2(sx(xv)) << "\" y=\"" << fmt2(top + ph + 16)
        << "\" text-anchor=\"middle\">" << fmt_tick(xv) << "</text>\n"
        << "<line x1=\"" << fmt2(left - 4) << "\" y1=\"" << fmt2(sy(yv))
        << "\" x2=\"" << fmt2(left) << "\" y2=\"" << fmt2(sy(yv))
        << "\" stroke=\"#333333\"/>\n"
        << "<text x=\"" << fmt2(left - 7) << "\" y=\"" << fmt2(sy(yv) + 4)
        << "\" text-anchor=\"end\">" << fmt_tick(yv) << "</text>\n";
  }
  out << "<text x=\"" << fmt2(left + pw / 2) << "\" y=\"" << H - 8
      << "\" text-anchor=\"middle\">" << agg.x_label << "</text>\n"
      << "<text x=\"14\" y=\"" << fmt2(top + ph / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << fmt2(top + ph / 2) << ")\">" << agg.y_label << "</text>\n</g>\n";

  // One group per method: confidence band, then the mean curve on top.
  for (std::size_t ci = 0; ci < agg.curves.size(); ++ci) {
    const Curve& c = agg.curves[ci];
    const char* color = kPalette[ci % kPaletteSize];
    out << "<g class=\"curve\" data-method=\"" << c.method << "\">\n";
    out << "<path d=\"M";
    for (std::size_t k = 0; k < c.episodes.size(); ++k)
      out << (k == 0 ? " " : " L ") << fmt2(sx(c.episodes[k])) << ' '
          << fmt2(sy(c.hi[k]));
    for (std::size_t k = c.episodes.size(); k-- > 0;)
      out << " L " << fmt2(sx(c.episodes[k])) << ' ' << fmt2(sy(c.lo[k]));
    out << " Z\" fill=\"" << color
        << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    out << "<polyline points=\"";
    for (std::size_t k = 0; k < c.episodes.size(); ++k)
      out << (k == 0 ? "" : " ") << fmt2(sx(c.episodes[k])) << ','
          << fmt2(sy(c.mean[k]));
    out << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\"/>\n</g>\n";
  }

  // Legend, top right.
  out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t ci = 0; ci < agg.curves.size(); ++ci) {
    const Curve& c = agg.curves[ci];
    const double ly = top + 10 + 18.0 * ci;
    out << "<rect x=\"" << fmt2(left + pw - 150) << "\" y=\"" << fmt2(ly - 9)
        << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[ci % kPaletteSize] << "\"/>\n"
        << "<text x=\"" << fmt2(left + pw - 133) << "\" y=\"" << fmt2(ly + 2)
        << "\">" << c.method << (c.partial ? " (partial)" : "")
        << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

}  // namespace rvf
