#pragma once

#include <span>
#include <string>
#include <vector>

#include "riskplan/pipeline.hpp"

namespace riskplan {

struct BoxStats {
  std::string plan_id;
  std::size_t n = 0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  /// Whisker ends: the extreme samples inside the 1.5 IQR fences.
  double low = 0.0;
  double high = 0.0;
  std::vector<double> outliers;
};

/// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::string plan_id, std::span<const double> samples);

struct PlotOutput {
  std::string svg;
  std::string csv;
  std::vector<BoxStats> boxes;
  /// Plans left out for having fewer than two samples.
  std::vector<std::string> skipped;
};

/// One box per plan with at least two samples, ordered by plan id (P2 before
/// P10); the CSV holds every raw sample plus a warning row per skipped plan.
/// Throws EmptyReport when no plan qualifies.
PlotOutput plot_report(const AssessmentReport& report);

}  // namespace riskplan
