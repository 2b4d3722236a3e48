#pragma once

#include <string>
#include <utility>
#include <vector>

namespace rculab {

struct ChartSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

// Self-contained SVG line chart (axes, grid, legend), no external assets.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<ChartSeries>& series, int width = 960,
                              int height = 540);

}  // namespace rculab
