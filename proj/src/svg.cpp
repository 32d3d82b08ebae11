#include "radarloop/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "radarloop/errors.hpp"

namespace radarloop {

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void write_plot_svg(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series, bool equal_axes, int width,
                    int height) {
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      x_min = std::min(x_min, p.x());
      x_max = std::max(x_max, p.x());
      y_min = std::min(y_min, p.y());
      y_max = std::max(y_max, p.y());
    }
  if (!std::isfinite(x_min)) {
    x_min = 0.0;
    x_max = 1.0;
    y_min = 0.0;
    y_max = 1.0;
  }
  auto widen = [](double& lo, double& hi) {
    const double span = hi - lo;
    if (span <= 0.0) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      lo -= 0.05 * span;
      hi += 0.05 * span;
    }
  };
  widen(x_min, x_max);
  widen(y_min, y_max);

  const double left = 70.0, right = 160.0, top = 45.0, bottom = 55.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double sx = plot_w / (x_max - x_min);
  double sy = plot_h / (y_max - y_min);
  if (equal_axes) {
    const double s = std::min(sx, sy);
    const double cx = 0.5 * (x_min + x_max), cy = 0.5 * (y_min + y_max);
    x_min = cx - 0.5 * plot_w / s;
    x_max = cx + 0.5 * plot_w / s;
    y_min = cy - 0.5 * plot_h / s;
    y_max = cy + 0.5 * plot_h / s;
    sx = sy = s;
  }
  auto px = [&](double x) { return left + (x - x_min) * sx; };
  auto py = [&](double y) { return top + plot_h - (y - y_min) * sy; };

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\">\n",
                width, height, width, height);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(left + plot_w / 2) + "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">" + escape_xml(title) + "</text>\n";

  svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(plot_w) +
         "\" height=\"" + num(plot_h) + "\" fill=\"none\" stroke=\"#333\"/>\n";

  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double fx = x_min + (x_max - x_min) * i / ticks;
    const double fy = y_min + (y_max - y_min) * i / ticks;
    svg += "<line x1=\"" + num(px(fx)) + "\" y1=\"" + num(top + plot_h) + "\" x2=\"" +
           num(px(fx)) + "\" y2=\"" + num(top + plot_h + 5) + "\" stroke=\"#333\"/>\n";
    svg += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(top + plot_h + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + num(fx) +
           "</text>\n";
    svg += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(py(fy)) + "\" x2=\"" + num(left) +
           "\" y2=\"" + num(py(fy)) + "\" stroke=\"#333\"/>\n";
    svg += "<text x=\"" + num(left - 8) + "\" y=\"" + num(py(fy) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(fy) +
           "</text>\n";
  }
  svg += "<text x=\"" + num(left + plot_w / 2) + "\" y=\"" + num(height - 12.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         escape_xml(x_label) + "</text>\n";
  svg += "<text x=\"18\" y=\"" + num(top + plot_h / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 18 " + num(top + plot_h / 2) + ")\">" + escape_xml(y_label) +
         "</text>\n";

  for (const auto& s : series) {
    if (s.line && s.points.size() > 1) {
      svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"";
      for (const auto& p : s.points) svg += num(px(p.x())) + "," + num(py(p.y())) + " ";
      svg += "\"/>\n";
    } else {
      for (const auto& p : s.points)
        svg += "<circle cx=\"" + num(px(p.x())) + "\" cy=\"" + num(py(p.y())) + "\" r=\"" +
               num(s.marker_radius) + "\" fill=\"" + s.color + "\"/>\n";
    }
  }

  double ly = top + 10.0;
  for (const auto& s : series) {
    const double lx = width - right + 12.0;
    if (s.line)
      svg += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(lx + 18) +
             "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + s.color + "\" stroke-width=\"2\"/>\n";
    else
      svg += "<circle cx=\"" + num(lx + 9) + "\" cy=\"" + num(ly - 4) + "\" r=\"4\" fill=\"" +
             s.color + "\"/>\n";
    svg += "<text x=\"" + num(lx + 24) + "\" y=\"" + num(ly) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + escape_xml(s.label) + "</text>\n";
    ly += 18.0;
  }
  svg += "</svg>\n";

  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << svg;
}

}  // namespace radarloop
