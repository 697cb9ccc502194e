#include "bench/svg.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace gthmc::bench {

namespace {

constexpr double kLeft = 60, kRight = 20, kTop = 30, kBottom = 45;

std::string num(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << x;
  return os.str();
}

std::string tick_label(double x) {
  std::ostringstream os;
  os << std::setprecision(4) << x;
  return os.str();
}

// 1, 2, 5 spacing giving about n ticks
double tick_step(double span, int n) {
  const double raw = span / n;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10 * mag;
}

}  // namespace

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::pair<double, double> padded_range(double lo, double hi, double pad) {
  if (!(hi > lo)) return {lo - 1.0, hi + 1.0};
  const double d = (hi - lo) * pad;
  return {lo - d, hi + d};
}

SvgPlot::SvgPlot(double width, double height, double x_lo, double x_hi, double y_lo, double y_hi)
    : w_(width), h_(height), x_lo_(x_lo), x_hi_(x_hi), y_lo_(y_lo), y_hi_(y_hi) {
  if (!(x_hi > x_lo) || !(y_hi > y_lo)) throw std::invalid_argument("svg: empty plot range");
}

double SvgPlot::px(double x) const {
  return kLeft + (x - x_lo_) / (x_hi_ - x_lo_) * (w_ - kLeft - kRight);
}

double SvgPlot::py(double y) const {
  return h_ - kBottom - (y - y_lo_) / (y_hi_ - y_lo_) * (h_ - kTop - kBottom);
}

void SvgPlot::title(const std::string& text) { title_ = text; }

void SvgPlot::axis_labels(const std::string& x, const std::string& y) {
  xlabel_ = x;
  ylabel_ = y;
}

void SvgPlot::polyline(const std::vector<std::pair<double, double>>& pts,
                       const std::string& color, double stroke_width) {
  if (pts.empty()) return;
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << xml_escape(color) << "\" stroke-width=\""
     << stroke_width << "\" points=\"";
  for (const auto& [x, y] : pts) os << num(px(x)) << ',' << num(py(y)) << ' ';
  os << "\"/>";
  body_.push_back(os.str());
}

void SvgPlot::asterisk(double x, double y, const std::string& color, double size) {
  const double cx = px(x), cy = py(y);
  std::ostringstream os;
  os << "<g stroke=\"" << xml_escape(color) << "\" stroke-width=\"1\">";
  for (int k = 0; k < 3; ++k) {
    const double a = k * std::numbers::pi / 3.0;
    const double dx = size * std::cos(a), dy = size * std::sin(a);
    os << "<line x1=\"" << num(cx - dx) << "\" y1=\"" << num(cy - dy) << "\" x2=\""
       << num(cx + dx) << "\" y2=\"" << num(cy + dy) << "\"/>";
  }
  os << "</g>";
  body_.push_back(os.str());
}

void SvgPlot::circle(double x, double y, double r, const std::string& color) {
  const double rx = std::abs(px(x + r) - px(x));
  const double ry = std::abs(py(y + r) - py(y));
  std::ostringstream os;
  os << "<ellipse cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" rx=\"" << num(rx)
     << "\" ry=\"" << num(ry) << "\" fill=\"none\" stroke=\"" << xml_escape(color)
     << "\" stroke-dasharray=\"3,3\"/>";
  body_.push_back(os.str());
}

void SvgPlot::legend(const std::vector<std::pair<std::string, std::string>>& entries) {
  legend_ = entries;
}

std::string SvgPlot::str() const {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
     << "\" viewBox=\"0 0 " << w_ << ' ' << h_ << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // frame and ticks
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << w_ - kLeft - kRight
     << "\" height=\"" << h_ - kTop - kBottom
     << "\" fill=\"none\" stroke=\"black\"/>\n<g font-family=\"sans-serif\" font-size=\"10\">\n";
  const double sx = tick_step(x_hi_ - x_lo_, 8);
  for (double t = std::ceil(x_lo_ / sx) * sx; t <= x_hi_ + 1e-9 * sx; t += sx) {
    os << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(py(y_lo_)) << "\" x2=\"" << num(px(t))
       << "\" y2=\"" << num(py(y_lo_) + 4) << "\" stroke=\"black\"/><text x=\"" << num(px(t))
       << "\" y=\"" << num(py(y_lo_) + 15) << "\" text-anchor=\"middle\">"
       << tick_label(std::abs(t) < 1e-12 * sx ? 0.0 : t) << "</text>\n";
  }
  const double sy = tick_step(y_hi_ - y_lo_, 6);
  for (double t = std::ceil(y_lo_ / sy) * sy; t <= y_hi_ + 1e-9 * sy; t += sy) {
    os << "<line x1=\"" << num(px(x_lo_) - 4) << "\" y1=\"" << num(py(t)) << "\" x2=\""
       << num(px(x_lo_)) << "\" y2=\"" << num(py(t)) << "\" stroke=\"black\"/><text x=\""
       << num(px(x_lo_) - 6) << "\" y=\"" << num(py(t) + 3) << "\" text-anchor=\"end\">"
       << tick_label(std::abs(t) < 1e-12 * sy ? 0.0 : t) << "</text>\n";
  }
  if (!xlabel_.empty()) {
    os << "<text x=\"" << num((kLeft + w_ - kRight) / 2) << "\" y=\"" << num(h_ - 8)
       << "\" text-anchor=\"middle\">" << xml_escape(xlabel_) << "</text>\n";
  }
  if (!ylabel_.empty()) {
    os << "<text x=\"14\" y=\"" << num((kTop + h_ - kBottom) / 2)
       << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << num((kTop + h_ - kBottom) / 2)
       << ")\">" << xml_escape(ylabel_) << "</text>\n";
  }
  if (!title_.empty()) {
    os << "<text x=\"" << num(w_ / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
       << xml_escape(title_) << "</text>\n";
  }
  os << "</g>\n<clipPath id=\"plot\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
     << w_ - kLeft - kRight << "\" height=\"" << h_ - kTop - kBottom
     << "\"/></clipPath>\n<g clip-path=\"url(#plot)\">\n";
  for (const std::string& b : body_) os << b << '\n';
  os << "</g>\n";
  double ly = kTop + 14;
  for (const auto& [label, color] : legend_) {
    os << "<g font-family=\"sans-serif\" font-size=\"10\"><line x1=\"" << num(w_ - kRight - 110)
       << "\" y1=\"" << num(ly - 3) << "\" x2=\"" << num(w_ - kRight - 90) << "\" y2=\""
       << num(ly - 3) << "\" stroke=\"" << xml_escape(color) << "\" stroke-width=\"2\"/><text x=\""
       << num(w_ - kRight - 85) << "\" y=\"" << num(ly) << "\">" << xml_escape(label)
       << "</text></g>\n";
    ly += 14;
  }
  os << "</svg>\n";
  return os.str();
}

void SvgPlot::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << str();
}

}  // namespace gthmc::bench
