#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pcir/eval.hpp"
#include "pcir/experiment.hpp"
#include "pcir/io.hpp"

namespace pcir::plot {

// Hand-written SVG. Every figure is deterministic text; structural elements
// carry a class attribute (bar-group, ablation, point) so tests can count them.

/// One bar group per (report, environment): an opaque bar with the
/// environment's mean AUROC (and a std whisker) drawn over a transparent bar
/// with the same report's in-distribution AUROC.
std::string auroc_bars_svg(const std::vector<std::pair<std::string, eval::EvalReport>>& reports,
                           const std::string& in_distribution_env = "e0");

/// Mean AUROC over seeds against the regularization weight (log axis, with
/// weight 0 drawn left of the smallest positive weight); one polyline per
/// test environment.
std::string ablation_svg(const std::vector<experiment::SweepRow>& rows);

/// Representations projected on their two leading principal components,
/// colored by environment.
std::string pca_scatter_svg(const io::RepsTable& reps);

}  // namespace pcir::plot
