// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_PLOT_H_
#define NOISYVOS_PLOT_H_

#include <optional>
#include <string>
#include <vector>

#include "noisyvos/experiment.h"

namespace noisyvos {

struct PlotSeries {
  std::string metric;
  std::vector<std::optional<double>> values;  // one per x position; nullopt = gap
};

struct PlotData {
  std::string title;
  std::string x_label;
  std::vector<double> x;  // ascending noise levels
  std::vector<PlotSeries> series;
};

// Self-contained SVG with one polyline per metric on a [0, 1] y axis and
// x ticks at the noise levels. Throws ArgumentError below 2 levels.
std::string RenderSvg(const PlotData& data);

enum class SweepAxis { kTextRate, kKernel };

// Metric-vs-noise data for `method` from matrix cells, averaging seeds.
// Cells where the other noise source is active are ignored.
// Text-rate ticks are percentages (0, 20, ...); kernel ticks are sizes.
PlotData SweepPlot(const std::vector<CellResult>& cells, const std::string& method,
                   SweepAxis axis);

}  // namespace noisyvos

#endif  // NOISYVOS_PLOT_H_
