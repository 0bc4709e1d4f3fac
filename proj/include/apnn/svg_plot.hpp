#pragma once

#include <string>
#include <vector>

namespace apnn {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

// Self-contained SVG line chart, no external assets. With log_y the vertical
// axis is log10 of the values clamped below at floor_y, and tick labels show
// powers of ten.
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel,
                      const std::vector<PlotSeries>& series, bool log_y = false,
                      double floor_y = 1e-16);

}
