#include "apnn/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "apnn/errors.hpp"

namespace apnn {

namespace {

constexpr double kWidth = 860, kHeight = 540;
constexpr double kLeft = 78, kRight = 24, kTop = 46, kBottom = 58;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                "#9467bd", "#ff7f0e", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double nice_step(double range, int target) {
  const double raw = range / std::max(1, target);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  const double s = r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0;
  return s * mag;
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel,
                      const std::vector<PlotSeries>& series, bool log_y,
                      double floor_y) {
  if (series.empty()) throw config_error("nothing to plot");
  for (const PlotSeries& s : series)
    if (s.x.size() != s.y.size() || s.x.empty())
      throw config_error("plot series needs matching nonempty x and y");

  auto ty = [&](double y) {
    return log_y ? std::log10(std::max(y, floor_y)) : y;
  };

  double xmin = series[0].x[0], xmax = xmin;
  double ymin = ty(series[0].y[0]), ymax = ymin;
  for (const PlotSeries& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  if (xmax <= xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax <= ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double ypad = 0.06 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) {
    return kTop + (1.0 - (ty(y) - ymin) / (ymax - ymin)) * ph;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"26\" font-size=\"17\" "
         "text-anchor=\"middle\" font-family=\"sans-serif\">"
      << escape(title) << "</text>\n";

  // x ticks
  const double xstep = nice_step(xmax - xmin, 7);
  for (double t = std::ceil(xmin / xstep) * xstep; t <= xmax + 1e-12 * xstep;
       t += xstep) {
    const double X = px(t);
    svg << "<line x1=\"" << X << "\" y1=\"" << kTop << "\" x2=\"" << X
        << "\" y2=\"" << kTop + ph
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << X << "\" y=\"" << kTop + ph + 20
        << "\" font-size=\"12\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">"
        << num(std::abs(t) < 1e-12 * xstep ? 0.0 : t) << "</text>\n";
  }

  // y ticks; in log mode ticks sit on integer exponents
  if (log_y) {
    const int klo = int(std::ceil(ymin));
    const int khi = int(std::floor(ymax));
    const int kstep = std::max(1, (khi - klo) / 7 + 1);
    for (int k = klo; k <= khi; k += kstep) {
      const double Y = kTop + (1.0 - (k - ymin) / (ymax - ymin)) * ph;
      svg << "<line x1=\"" << kLeft << "\" y1=\"" << Y << "\" x2=\""
          << kLeft + pw << "\" y2=\"" << Y
          << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
      svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << Y + 4
          << "\" font-size=\"12\" text-anchor=\"end\" "
             "font-family=\"sans-serif\">1e"
          << k << "</text>\n";
    }
  } else {
    const double ystep = nice_step(ymax - ymin, 6);
    for (double t = std::ceil(ymin / ystep) * ystep; t <= ymax + 1e-12 * ystep;
         t += ystep) {
      const double Y = kTop + (1.0 - (t - ymin) / (ymax - ymin)) * ph;
      svg << "<line x1=\"" << kLeft << "\" y1=\"" << Y << "\" x2=\""
          << kLeft + pw << "\" y2=\"" << Y
          << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
      svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << Y + 4
          << "\" font-size=\"12\" text-anchor=\"end\" "
             "font-family=\"sans-serif\">"
          << num(std::abs(t) < 1e-12 * ystep ? 0.0 : t) << "</text>\n";
    }
  }

  // frame and axis labels
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
      << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 14
      << "\" font-size=\"14\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\">"
      << escape(xlabel) << "</text>\n";
  svg << "<text x=\"20\" y=\"" << kTop + ph / 2
      << "\" font-size=\"14\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" transform=\"rotate(-90 20 "
      << kTop + ph / 2 << ")\">" << escape(ylabel) << "</text>\n";

  // data
  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kPalette[si % kPaletteSize];
    if (s.x.size() == 1) {
      svg << "<circle cx=\"" << px(s.x[0]) << "\" cy=\"" << py(s.y[0])
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      continue;
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    svg << "\"/>\n";
  }

  // legend, top right inside the frame
  const double lx = kLeft + pw - 180, lh = 20;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const double Y = kTop + 14 + lh * double(si);
    svg << "<line x1=\"" << lx << "\" y1=\"" << Y << "\" x2=\"" << lx + 26
        << "\" y2=\"" << Y << "\" stroke=\"" << kPalette[si % kPaletteSize]
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << lx + 32 << "\" y=\"" << Y + 4
        << "\" font-size=\"12\" font-family=\"sans-serif\">"
        << escape(series[si].label) << "</text>\n";
  }

  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw io_error("cannot open plot file: " + path);
  out << svg.str();
  if (!out) throw io_error("failed writing plot file: " + path);
}

}  // namespace apnn
