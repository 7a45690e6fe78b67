#pragma once

// Dependency-free learning-curve rendering: aggregated curves with their
// confidence bands straight to SVG 1.1 markup.

#include <string>

#include "rvf/experiment.hpp"

namespace rvf {

struct PlotStyle {
  int width = 640;
  int height = 420;
  std::string title;  // defaults to the experiment name
};

// One <g class="curve"> per method: a shaded confidence band plus the mean
// polyline, with axes, tick labels and a legend derived from the aggregate
// metadata. Rendering is deterministic (fixed palette, "%.2f" coordinates),
// so the same aggregate always yields the same bytes. An aggregate with no
// curves, an empty curve, or a curve whose arrays disagree in length is
// rejected with SchemaError.
std::string emit_plot(const AggregateResult& agg, const PlotStyle& style = {});

}  // namespace rvf
