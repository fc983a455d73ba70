#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "srmix/training.hpp"

namespace srmix {

struct PlotSeries {
  std::string label;
  TrainLog log;
};

struct AxisRange {
  double min = 0.0;
  double max = 1.0;
};

struct PlotLayout {
  AxisRange x;
  AxisRange y;
  std::size_t plotted_series = 0;
};

/// Validation PSNR against iteration, one labelled polyline per series,
/// written as SVG. Rows without a finite PSNR are skipped. The axis ranges
/// cover every plotted point. Throws Usage for an empty series list.
PlotLayout plot_convergence(const std::vector<PlotSeries>& series, const std::filesystem::path& out_path,
                            const std::string& title = "validation PSNR");

/// Reads each CSV log (MalformedLog on bad input) and labels it by its
/// parent directory name, falling back to the file stem.
std::vector<PlotSeries> load_series(const std::vector<std::filesystem::path>& log_paths);

}  // namespace srmix
