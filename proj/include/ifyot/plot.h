#pragma once

#include <string>
#include <vector>

#include "ifyot/common.h"
#include "ifyot/io.h"

namespace ifyot {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = false;
  bool logy = false;
  bool scatter = false;   // markers only, no connecting lines
  bool has_hline = false;  // horizontal reference line at hline
  double hline = 0.0;
};

// Self-contained SVG document; no external assets, deterministic text.
std::string render_svg(const std::vector<PlotSeries>& series,
                       const PlotOptions& options);

void write_plot(const std::string& path, const std::vector<PlotSeries>& series,
                const PlotOptions& options);

// Splits a long-format table into one series per distinct value of group_by
// (empty group_by: a single series), taking point coordinates from the x and
// y columns. Rows whose cells do not parse as finite numbers are skipped.
std::vector<PlotSeries> series_from_table(const CsvTable& table,
                                          const std::string& x,
                                          const std::string& y,
                                          const std::string& group_by);

}  // namespace ifyot
