#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace riskplan {

struct MetricConfig {
  /// Entropy bin width, seconds; bins are anchored at 0.
  double bin_width = 5.0;
  double alpha = 0.9;
  /// Execution-time bound for the bounded probability, seconds.
  double time_bound = 300.0;
};

struct RiskMetrics {
  std::size_t samples = 0;
  double mean = 0.0;
  double variance = 0.0;
  double entropy_bits = 0.0;
  double var_alpha = 0.0;
  double es_alpha = 0.0;
  double bounded_prob = 0.0;
  /// Configuration the metrics were computed with.
  double bin_width = 0.0;
  double alpha = 0.0;
  double time_bound = 0.0;
};

/// Mean, unbiased variance, binned entropy, value at risk (upper order
/// statistic at ceil(alpha*n)), expected shortfall (mean strictly above
/// VaR, or VaR itself) and the fraction of samples above the time bound.
RiskMetrics compute_metrics(std::span<const double> samples, const MetricConfig& cfg = {});

struct PlanMetrics {
  std::string plan_id;
  RiskMetrics metrics;
};

struct Elimination {
  std::string plan_id;
  std::string reason;
};

struct Selection {
  std::string plan_id;
  double mean_threshold = 0.0;
  std::vector<Elimination> eliminated;
};

/// Keeps plans whose mean is within (1 + alpha_mean) of the best mean, then
/// takes the lowest variance; ties fall to entropy, mean, then plan id.
Selection select_plan(const std::vector<PlanMetrics>& table, double alpha_mean = 0.05);

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

WelchResult compare_means(std::span<const double> a, std::span<const double> b);

nlohmann::json to_json(const RiskMetrics& m);
RiskMetrics metrics_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json to_json(const Selection& s);
nlohmann::json to_json(const WelchResult& w);

}  // namespace riskplan
