#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qop {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

// Static, single-file line chart. Axes may be logarithmic; nonfinite or
// nonpositive values on a log axis are skipped. Output bytes are fully
// determined by the inputs.
inline std::string render_line_plot(const std::string& title,
                                    const std::string& xlabel,
                                    const std::string& ylabel,
                                    const std::vector<PlotSeries>& series,
                                    bool log_x, bool log_y) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#ff7f0e", "#9467bd", "#8c564b"};
  const double width = 840, height = 560;
  const double ml = 90, mr = 30, mt = 50, mb = 70;

  const auto usable = [&](double v, bool log_axis) {
    return std::isfinite(v) && (!log_axis || v > 0.0);
  };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], log_x) || !usable(s.y[i], log_y)) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!(xmin <= xmax)) {
    xmin = log_x ? 0.1 : 0.0;
    xmax = 1.0;
  }
  if (!(ymin <= ymax)) {
    ymin = log_y ? 0.1 : 0.0;
    ymax = 1.0;
  }
  const auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  const auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  double x0 = tx(xmin), x1 = tx(xmax), y0 = ty(ymin), y1 = ty(ymax);
  if (x1 - x0 < 1e-12) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 - y0 < 1e-12) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double padx = 0.03 * (x1 - x0), pady = 0.06 * (y1 - y0);
  x0 -= padx;
  x1 += padx;
  y0 -= pady;
  y1 += pady;
  const auto sx = [&](double v) {
    return ml + (tx(v) - x0) / (x1 - x0) * (width - ml - mr);
  };
  const auto sy = [&](double v) {
    return height - mb - (ty(v) - y0) / (y1 - y0) * (height - mt - mb);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << detail::px(width / 2) << "\" y=\"28\" font-size=\"18\" "
         "text-anchor=\"middle\" font-family=\"sans-serif\">"
      << title << "</text>\n";

  // frame
  out << "<rect x=\"" << detail::px(ml) << "\" y=\"" << detail::px(mt)
      << "\" width=\"" << detail::px(width - ml - mr) << "\" height=\""
      << detail::px(height - mt - mb)
      << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

  // ticks
  const auto emit_xtick = [&](double v) {
    const double gx = sx(v);
    out << "<line x1=\"" << detail::px(gx) << "\" y1=\"" << detail::px(mt)
        << "\" x2=\"" << detail::px(gx) << "\" y2=\""
        << detail::px(height - mb)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << detail::px(gx) << "\" y=\""
        << detail::px(height - mb + 20)
        << "\" font-size=\"12\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">"
        << detail::tick_label(v) << "</text>\n";
  };
  const auto emit_ytick = [&](double v) {
    const double gy = sy(v);
    out << "<line x1=\"" << detail::px(ml) << "\" y1=\"" << detail::px(gy)
        << "\" x2=\"" << detail::px(width - mr) << "\" y2=\"" << detail::px(gy)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << detail::px(ml - 8) << "\" y=\""
        << detail::px(gy + 4)
        << "\" font-size=\"12\" text-anchor=\"end\" "
           "font-family=\"sans-serif\">"
        << detail::tick_label(v) << "</text>\n";
  };
  if (log_x) {
    for (int e = static_cast<int>(std::floor(x0)); e <= static_cast<int>(std::ceil(x1)); ++e) {
      const double v = std::pow(10.0, e);
      if (tx(v) >= x0 && tx(v) <= x1) emit_xtick(v);
    }
  } else {
    for (int i = 0; i <= 5; ++i) emit_xtick(x0 + (x1 - x0) * i / 5.0);
  }
  if (log_y) {
    const int e0 = static_cast<int>(std::floor(y0));
    const int e1 = static_cast<int>(std::ceil(y1));
    const int stride = std::max(1, (e1 - e0) / 8);
    for (int e = e0; e <= e1; e += stride) {
      const double v = std::pow(10.0, e);
      if (ty(v) >= y0 && ty(v) <= y1) emit_ytick(v);
    }
  } else {
    for (int i = 0; i <= 5; ++i) emit_ytick(y0 + (y1 - y0) * i / 5.0);
  }

  out << "<text x=\"" << detail::px(width / 2) << "\" y=\""
      << detail::px(height - 18)
      << "\" font-size=\"14\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\">"
      << xlabel << "</text>\n";
  out << "<text x=\"22\" y=\"" << detail::px(height / 2)
      << "\" font-size=\"14\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" transform=\"rotate(-90 22 "
      << detail::px(height / 2) << ")\">" << ylabel << "</text>\n";

  // series
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = colors[si % 6];
    std::ostringstream pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], log_x) || !usable(s.y[i], log_y)) continue;
      pts << detail::px(sx(s.x[i])) << "," << detail::px(sy(s.y[i])) << " ";
    }
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], log_x) || !usable(s.y[i], log_y)) continue;
      out << "<circle cx=\"" << detail::px(sx(s.x[i])) << "\" cy=\""
          << detail::px(sy(s.y[i])) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    // legend entry
    const double ly = mt + 18 + 20.0 * static_cast<double>(si);
    out << "<line x1=\"" << detail::px(width - mr - 150) << "\" y1=\""
        << detail::px(ly) << "\" x2=\"" << detail::px(width - mr - 120)
        << "\" y2=\"" << detail::px(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << detail::px(width - mr - 112) << "\" y=\""
        << detail::px(ly + 4)
        << "\" font-size=\"13\" font-family=\"sans-serif\">" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

inline void write_line_plot(const std::string& path, const std::string& title,
                            const std::string& xlabel, const std::string& ylabel,
                            const std::vector<PlotSeries>& series, bool log_x,
                            bool log_y) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_line_plot: cannot open " + path);
  f << render_line_plot(title, xlabel, ylabel, series, log_x, log_y);
}

}  // namespace qop
