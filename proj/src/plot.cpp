#include "ifyot/plot.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace ifyot {

namespace {

constexpr double kWidth = 720.0, kHeight = 480.0;
constexpr double kLeft = 70.0, kRight = 20.0, kTop = 40.0, kBottom = 50.0;

const char* kPalette[] = {"#1f6fb2", "#d95f02", "#1b9e77", "#7570b3",
                          "#e7298a", "#66a61e", "#a6761d", "#666666"};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;  // transformed coordinates

  double transform(double v) const { return log ? std::log10(v) : v; }
  bool admits(double v) const {
    return std::isfinite(v) && (!log || v > 0.0);
  }
  double unit(double v) const { return (transform(v) - lo) / (hi - lo); }
};

Axis fit_axis(const std::vector<PlotSeries>& series, bool log, bool use_x) {
  Axis ax;
  ax.log = log;
  double lo = kInf, hi = -kInf;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double v = use_x ? s.x[i] : s.y[i];
      double other = use_x ? s.y[i] : s.x[i];
      if (!ax.admits(v) || !std::isfinite(other)) continue;
      lo = std::min(lo, ax.transform(v));
      hi = std::max(hi, ax.transform(v));
    }
  }
  if (!(lo <= hi)) {
    lo = log ? 0.0 : 0.0;
    hi = log ? 1.0 : 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= log ? 1.0 : std::max(1.0, std::abs(lo));
    hi += log ? 1.0 : std::max(1.0, std::abs(hi));
  } else {
    double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  ax.lo = lo;
  ax.hi = hi;
  return ax;
}

std::vector<double> axis_ticks(const Axis& ax) {
  std::vector<double> ticks;  // transformed coordinates
  if (ax.log) {
    for (double p = std::ceil(ax.lo); p <= std::floor(ax.hi) + 1e-9; p += 1.0)
      ticks.push_back(p);
    if (ticks.size() < 2) ticks = {ax.lo, ax.hi};
    return ticks;
  }
  double span = ax.hi - ax.lo;
  double raw = span / 5.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double norm = raw / mag;
  double step = (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0) * mag;
  double first = std::ceil(ax.lo / step) * step;
  for (double t = first; t <= ax.hi + 1e-9 * span; t += step)
    ticks.push_back(t);
  if (ticks.size() < 2) ticks = {ax.lo, ax.hi};
  return ticks;
}

}  // namespace

std::string render_svg(const std::vector<PlotSeries>& series,
                       const PlotOptions& options) {
  Axis xa = fit_axis(series, options.logx, true);
  Axis ya = fit_axis(series, options.logy, false);
  if (options.has_hline && ya.admits(options.hline)) {
    double t = ya.transform(options.hline);
    ya.lo = std::min(ya.lo, t - 0.05 * (ya.hi - ya.lo));
    ya.hi = std::max(ya.hi, t + 0.05 * (ya.hi - ya.lo));
  }

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + xa.unit(v) * plot_w; };
  auto py = [&](double v) { return kTop + (1.0 - ya.unit(v)) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\""
      << fmt(plot_w) << "\" height=\"" << fmt(plot_h)
      << "\" fill=\"none\" stroke=\"#333333\"/>\n";

  for (double t : axis_ticks(xa)) {
    double u = (t - xa.lo) / (xa.hi - xa.lo);
    if (u < -1e-9 || u > 1.0 + 1e-9) continue;
    double x = kLeft + u * plot_w;
    svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(kTop + plot_h)
        << "\" x2=\"" << fmt(x) << "\" y2=\"" << fmt(kTop + plot_h + 5)
        << "\" stroke=\"#333333\"/>\n";
    double value = xa.log ? std::pow(10.0, t) : t;
    svg << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(kTop + plot_h + 18)
        << "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">"
        << tick_label(value) << "</text>\n";
  }
  for (double t : axis_ticks(ya)) {
    double u = (t - ya.lo) / (ya.hi - ya.lo);
    if (u < -1e-9 || u > 1.0 + 1e-9) continue;
    double y = kTop + (1.0 - u) * plot_h;
    svg << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(y)
        << "\" x2=\"" << fmt(kLeft) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#333333\"/>\n";
    double value = ya.log ? std::pow(10.0, t) : t;
    svg << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(y + 4)
        << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">"
        << tick_label(value) << "</text>\n";
  }

  if (!options.title.empty())
    svg << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" font-size=\"14\" "
           "text-anchor=\"middle\" font-family=\"sans-serif\">"
        << escape(options.title) << "</text>\n";
  if (!options.xlabel.empty())
    svg << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\""
        << fmt(kHeight - 12)
        << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">"
        << escape(options.xlabel) << "</text>\n";
  if (!options.ylabel.empty())
    svg << "<text x=\"16\" y=\"" << fmt(kTop + plot_h / 2)
        << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 16 "
        << fmt(kTop + plot_h / 2) << ")\">" << escape(options.ylabel)
        << "</text>\n";

  if (options.has_hline && ya.admits(options.hline)) {
    double y = py(options.hline);
    svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(y) << "\" x2=\""
        << fmt(kLeft + plot_w) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#cc0000\" stroke-dasharray=\"6 3\"/>\n";
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    const PlotSeries& sr = series[s];
    std::ostringstream pts;
    bool any = false;
    for (std::size_t i = 0; i < sr.x.size(); ++i) {
      if (!xa.admits(sr.x[i]) || !ya.admits(sr.y[i])) continue;
      if (any) pts << ' ';
      pts << fmt(px(sr.x[i])) << ',' << fmt(py(sr.y[i]));
      any = true;
    }
    if (!any) continue;
    if (!options.scatter)
      svg << "<polyline points=\"" << pts.str()
          << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    for (std::size_t i = 0; i < sr.x.size(); ++i) {
      if (!xa.admits(sr.x[i]) || !ya.admits(sr.y[i])) continue;
      svg << "<circle cx=\"" << fmt(px(sr.x[i])) << "\" cy=\""
          << fmt(py(sr.y[i])) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    double ly = kTop + 14.0 + 14.0 * static_cast<double>(s);
    svg << "<rect x=\"" << fmt(kLeft + plot_w - 130) << "\" y=\""
        << fmt(ly - 8) << "\" width=\"10\" height=\"4\" fill=\"" << color
        << "\"/>\n";
    svg << "<text x=\"" << fmt(kLeft + plot_w - 116) << "\" y=\"" << fmt(ly)
        << "\" font-size=\"11\" font-family=\"sans-serif\">"
        << escape(sr.label) << "</text>\n";
  }

  svg << "</svg>\n";
  return svg.str();
}

void write_plot(const std::string& path, const std::vector<PlotSeries>& series,
                const PlotOptions& options) {
  write_text_file(path, render_svg(series, options));
}

std::vector<PlotSeries> series_from_table(const CsvTable& table,
                                          const std::string& x,
                                          const std::string& y,
                                          const std::string& group_by) {
  std::vector<double> xs = table.numeric_column(x);
  std::vector<double> ys = table.numeric_column(y);
  std::vector<PlotSeries> out;
  if (group_by.empty()) {
    PlotSeries s;
    s.label = y;
    s.x = std::move(xs);
    s.y = std::move(ys);
    out.push_back(std::move(s));
    return out;
  }
  Index gc = table.column_index(group_by);
  std::map<std::string, std::size_t> index;  // ordered: stable output
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& key = table.rows[r][static_cast<std::size_t>(gc)];
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      PlotSeries s;
      s.label = group_by + "=" + key;
      out.push_back(std::move(s));
    }
    out[it->second].x.push_back(xs[r]);
    out[it->second].y.push_back(ys[r]);
  }
  return out;
}

}  // namespace ifyot
