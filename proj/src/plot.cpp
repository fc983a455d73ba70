#include "srmix/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "srmix/error.hpp"

namespace srmix {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Step of 1, 2 or 5 times a power of ten giving about `target` intervals.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

PlotLayout plot_convergence(const std::vector<PlotSeries>& series, const std::filesystem::path& out_path,
                            const std::string& title) {
  if (series.empty()) throw Error(ErrorCode::Usage, "nothing to plot: no logs given");
  PlotLayout layout;
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (const PlotSeries& s : series) {
    for (const TrainLogRow& row : s.log.rows) {
      const double y = row.val_psnr.as_double();
      if (!std::isfinite(y)) continue;
      xmin = std::min(xmin, static_cast<double>(row.iteration));
      xmax = std::max(xmax, static_cast<double>(row.iteration));
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  layout.x = {xmin, xmax};
  layout.y = {ymin - pad, ymax + pad};

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - layout.x.min) / (layout.x.max - layout.x.min) * pw; };
  auto sy = [&](double y) { return kTop + ph - (y - layout.y.min) / (layout.y.max - layout.y.min) * ph; };

  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + out_path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kLeft + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  const double xstep = nice_step(layout.x.max - layout.x.min, 6);
  for (double t = std::ceil(layout.x.min / xstep) * xstep; t <= layout.x.max + 1e-9 * xstep; t += xstep) {
    out << "<line x1=\"" << sx(t) << "\" y1=\"" << kTop + ph << "\" x2=\"" << sx(t) << "\" y2=\"" << kTop + ph + 5
        << "\" stroke=\"black\"/><text x=\"" << sx(t) << "\" y=\"" << kTop + ph + 18
        << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  const double ystep = nice_step(layout.y.max - layout.y.min, 6);
  for (double t = std::ceil(layout.y.min / ystep) * ystep; t <= layout.y.max + 1e-9 * ystep; t += ystep) {
    out << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << sy(t) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << sy(t)
        << "\" stroke=\"#dddddd\"/><text x=\"" << kLeft - 8 << "\" y=\"" << sy(t) + 4
        << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">iteration</text>\n"
      << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">PSNR (dB)</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    std::string points;
    for (const TrainLogRow& row : series[i].log.rows) {
      const double y = row.val_psnr.as_double();
      if (!std::isfinite(y)) continue;
      points += num(sx(static_cast<double>(row.iteration))) + "," + num(sy(y)) + " ";
    }
    if (!points.empty()) {
      ++layout.plotted_series;
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"" << points
          << "\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    out << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 32 << "\" y2=\""
        << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << kLeft + pw + 38 << "\" y=\""
        << ly + 4 << "\">" << escape(series[i].label) << "</text>\n";
  }
  out << "</svg>\n";
  return layout;
}

std::vector<PlotSeries> load_series(const std::vector<std::filesystem::path>& log_paths) {
  std::vector<PlotSeries> series;
  for (const auto& path : log_paths) {
    std::string label = path.parent_path().filename().string();
    if (label.empty() || label == ".") label = path.stem().string();
    series.push_back({label, read_train_log(path)});
  }
  return series;
}

}  // namespace srmix
