// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/plot.h"

#include <algorithm>
#include <cstdio>
#include <map>

#include "noisyvos/errors.h"

namespace noisyvos {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;
constexpr const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#17becf"};

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Escape(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string Tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

std::string RenderSvg(const PlotData& data) {
  if (data.x.size() < 2) throw ArgumentError("plot: needs at least 2 noise levels");
  for (const auto& s : data.series) {
    if (s.values.size() != data.x.size()) {
      throw ArgumentError("plot: series '" + s.metric + "' does not match the noise levels");
    }
  }
  const double x0 = data.x.front(), x1 = data.x.back();
  if (!(x1 > x0)) throw ArgumentError("plot: noise levels must be ascending");
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - std::clamp(y, 0.0, 1.0)) * ph; };

  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
         "viewBox=\"0 0 640 400\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg += "<text x=\"" + Num(kLeft) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" +
         Escape(data.title) + "</text>\n";
  // Axes, grid and ticks.
  svg += "<g stroke=\"black\" stroke-width=\"1\">\n";
  svg += "<line x1=\"" + Num(kLeft) + "\" y1=\"" + Num(kTop + ph) + "\" x2=\"" + Num(kLeft + pw) +
         "\" y2=\"" + Num(kTop + ph) + "\"/>\n";
  svg += "<line x1=\"" + Num(kLeft) + "\" y1=\"" + Num(kTop) + "\" x2=\"" + Num(kLeft) +
         "\" y2=\"" + Num(kTop + ph) + "\"/>\n";
  svg += "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (double x : data.x) {
    svg += "<line x1=\"" + Num(px(x)) + "\" y1=\"" + Num(kTop + ph) + "\" x2=\"" + Num(px(x)) +
           "\" y2=\"" + Num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + Num(px(x)) + "\" y=\"" + Num(kTop + ph + 18) +
           "\" text-anchor=\"middle\">" + Tick(x) + "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = i / 4.0;
    svg += "<line x1=\"" + Num(kLeft) + "\" y1=\"" + Num(py(y)) + "\" x2=\"" + Num(kLeft + pw) +
           "\" y2=\"" + Num(py(y)) + "\" stroke=\"#dddddd\"/>\n";
    svg += "<text x=\"" + Num(kLeft - 8) + "\" y=\"" + Num(py(y) + 4) +
           "\" text-anchor=\"end\">" + Tick(y) + "</text>\n";
  }
  svg += "<text x=\"" + Num(kLeft + pw / 2) + "\" y=\"" + Num(kHeight - 10) +
         "\" text-anchor=\"middle\">" + Escape(data.x_label) + "</text>\n</g>\n";

  for (std::size_t s = 0; s < data.series.size(); ++s) {
    const auto& series = data.series[s];
    const char* colour = kColours[s % std::size(kColours)];
    std::string points;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
      if (!series.values[i]) continue;
      if (!points.empty()) points += ' ';
      points += Num(px(data.x[i])) + "," + Num(py(*series.values[i]));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(colour) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(s) + 8.0;
    svg += "<line x1=\"" + Num(kLeft + pw + 15) + "\" y1=\"" + Num(ly) + "\" x2=\"" +
           Num(kLeft + pw + 35) + "\" y2=\"" + Num(ly) + "\" stroke=\"" + colour +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + Num(kLeft + pw + 40) + "\" y=\"" + Num(ly + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + Escape(series.metric) +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

PlotData SweepPlot(const std::vector<CellResult>& cells, const std::string& method,
                   SweepAxis axis) {
  struct Sums {
    double sum[6] = {};
    int count[6] = {};
  };
  std::map<double, Sums> by_level;
  for (const auto& c : cells) {
    if (c.method != method || !c.report) continue;
    // Sweeps vary one noise source with the other held clean.
    if (axis == SweepAxis::kTextRate ? c.noise.kernel != 0 : c.noise.text_rate != 0.0) continue;
    const double level =
        axis == SweepAxis::kTextRate ? c.noise.text_rate * 100.0 : c.noise.kernel;
    const MetricsReport& r = *c.report;
    const std::optional<double> values[6] = {r.p_miou, r.n_miou, r.p_ciou,
                                             r.n_ciou, r.giou,   r.acc};
    Sums& s = by_level[level];
    for (int m = 0; m < 6; ++m) {
      if (values[m]) {
        s.sum[m] += *values[m];
        ++s.count[m];
      }
    }
  }
  PlotData data;
  data.title = method + ": metrics vs " +
               (axis == SweepAxis::kTextRate ? "text noise rate" : "mask dilation kernel");
  data.x_label = axis == SweepAxis::kTextRate ? "noise rate (%)" : "kernel size";
  const char* names[6] = {"p-mIoU", "n-mIoU", "p-cIoU", "n-cIoU", "gIoU", "Acc"};
  for (int m = 0; m < 6; ++m) data.series.push_back({names[m], {}});
  for (const auto& [level, s] : by_level) {
    data.x.push_back(level);
    for (int m = 0; m < 6; ++m) {
      data.series[m].values.push_back(
          s.count[m] ? std::optional<double>(s.sum[m] / s.count[m]) : std::nullopt);
    }
  }
  return data;
}

}  // namespace noisyvos
