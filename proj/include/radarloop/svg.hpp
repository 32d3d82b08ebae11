#pragma once

#include <string>
#include <vector>

#include "radarloop/geometry.hpp"

namespace radarloop {

struct PlotSeries {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<Eigen::Vector2d> points;
  bool line = true;  // polyline; false draws markers only
  double marker_radius = 3.0;
};

// Self-contained chart with axes, tick labels and a legend, autoscaled to
// the union of the series. Equal-axis mode keeps x and y at the same scale
// for trajectory overlays.
void write_plot_svg(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series, bool equal_axes = false,
                    int width = 760, int height = 540);

}  // namespace radarloop
