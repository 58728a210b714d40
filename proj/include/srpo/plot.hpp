// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Learning-curve extraction and SVG rendering.

#ifndef SRPO_PLOT_HPP_
#define SRPO_PLOT_HPP_

#include <span>
#include <string>
#include <vector>

namespace srpo::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Trailing mean over the last `window` points (fewer at the start).
std::vector<double> running_mean(std::span<const double> y, int window);

/// Numeric fields of a metrics record, nested ones as dotted paths.
std::vector<std::string> metric_fields(const std::string& metrics_path);

/// Reads (step, field) pairs from a line-delimited metrics file. Throws
/// ConfigError listing the available fields if `field` is absent.
Series load_series(const std::string& metrics_path, const std::string& field);

/// Self-contained SVG: each series drawn raw (faint) and smoothed (solid),
/// axes scaled to the data with 5% margins.
std::string render_svg(std::span<const Series> series, int window, const std::string& y_label);

}  // namespace srpo::plot

#endif  // SRPO_PLOT_HPP_
