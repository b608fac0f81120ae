#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "poselab/errors.hpp"

namespace poselab {

/// Minimal SVG line-plot writer: fixed-size canvas, one polyline per series,
/// linear axes with min/max labels. Deterministic output for identical data.
class SvgLinePlot {
 public:
  SvgLinePlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add_series(const std::string& name, const std::vector<double>& x,
                  const std::vector<double>& y, const std::string& color) {
    series_.push_back({name, x, y, color});
  }

  void write(const std::string& path) const {
    const double w = 760, h = 480, ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series_)
      for (size_t i = 0; i < s.x.size(); ++i) {
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, s.y[i]);
        ymax = std::max(ymax, s.y[i]);
      }
    if (xmin > xmax) {
      xmin = 0;
      xmax = 1;
      ymin = 0;
      ymax = 1;
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1;
    if (ymax - ymin < 1e-12) ymax = ymin + 1;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open SVG for writing: " + path);
    char buf[160];
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title_ << "</text>\n";
    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
        << h - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
        << "\" stroke=\"black\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">%.6g</text>\n",
                  ml, h - mb + 16, xmin);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">%.6g</text>\n",
                  w - mr, h - mb + 16, xmax);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.6g</text>\n",
                  ml - 6, h - mb, ymin);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.6g</text>\n",
                  ml - 6, mt + 4, ymax);
    out << buf;
    out << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label_ << "</text>\n";
    out << "<text x=\"16\" y=\"" << (mt + h - mb) / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << (mt + h - mb) / 2 << ")\">" << y_label_ << "</text>\n";

    double legend_y = mt + 6;
    for (const auto& s : series_) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < s.x.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[i]), py(s.y[i]));
        out << buf;
      }
      out << "\"/>\n";
      out << "<text x=\"" << w - mr - 150 << "\" y=\"" << legend_y << "\" font-size=\"12\" fill=\""
          << s.color << "\">" << s.name << "</text>\n";
      legend_y += 16;
    }
    out << "</svg>\n";
  }

 private:
  struct Series {
    std::string name;
    std::vector<double> x, y;
    std::string color;
  };
  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
};

}  // namespace poselab
