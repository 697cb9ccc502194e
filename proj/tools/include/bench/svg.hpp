#pragma once

#include <string>
#include <utility>
#include <vector>

namespace gthmc::bench {

/// Minimal SVG line/marker plot in data coordinates.
class SvgPlot {
 public:
  SvgPlot(double width, double height, double x_lo, double x_hi, double y_lo, double y_hi);

  void title(const std::string& text);
  void axis_labels(const std::string& x, const std::string& y);
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                double stroke_width = 1.0);
  void asterisk(double x, double y, const std::string& color, double size = 4.0);
  /// Circle with a radius in data units along x.
  void circle(double x, double y, double r, const std::string& color);
  void legend(const std::vector<std::pair<std::string, std::string>>& entries);
  std::string str() const;
  void save(const std::string& path) const;

  double x_lo() const { return x_lo_; }
  double x_hi() const { return x_hi_; }
  double y_lo() const { return y_lo_; }
  double y_hi() const { return y_hi_; }

 private:
  double px(double x) const;
  double py(double y) const;

  double w_, h_;
  double x_lo_, x_hi_, y_lo_, y_hi_;
  std::string title_, xlabel_, ylabel_;
  std::vector<std::string> body_;
  std::vector<std::pair<std::string, std::string>> legend_;
};

std::string xml_escape(const std::string& s);

/// Range [lo, hi] padded by a fraction; a degenerate range is widened to +-1.
std::pair<double, double> padded_range(double lo, double hi, double pad = 0.05);

}  // namespace gthmc::bench
