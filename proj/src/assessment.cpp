#include "riskplan/assessment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "riskplan/errors.hpp"
#include "riskplan/plan_io.hpp"

namespace riskplan {

namespace {

double sample_mean(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs, double mean) {
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

RiskMetrics compute_metrics(std::span<const double> samples, const MetricConfig& cfg) {
  if (samples.size() < 2) throw InsufficientSamples(samples.size());
  if (!(cfg.bin_width > 0.0)) throw InvalidArgument("entropy bin width must be positive");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw InvalidArgument("alpha must lie in (0,1)");

  RiskMetrics m;
  m.samples = samples.size();
  m.bin_width = cfg.bin_width;
  m.alpha = cfg.alpha;
  m.time_bound = cfg.time_bound;
  m.mean = sample_mean(samples);
  m.variance = sample_variance(samples, m.mean);

  const double n = static_cast<double>(samples.size());
  std::map<long long, std::size_t> bins;
  for (double x : samples) ++bins[static_cast<long long>(std::floor(x / cfg.bin_width))];
  for (const auto& [bin, count] : bins) {
    const double p = static_cast<double>(count) / n;
    m.entropy_bits -= p * std::log2(p);
  }
  m.entropy_bits = std::max(0.0, m.entropy_bits);

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  // 1-based rank ceil(alpha*n); the epsilon absorbs products like 0.9*10.
  auto rank = static_cast<std::size_t>(std::ceil(cfg.alpha * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  m.var_alpha = sorted[rank - 1];
  double tail = 0.0;
  std::size_t tail_n = 0;
  for (double x : sorted) {
    if (x > m.var_alpha) {
      tail += x;
      ++tail_n;
    }
  }
  m.es_alpha = tail_n ? tail / static_cast<double>(tail_n) : m.var_alpha;

  const auto above = std::count_if(samples.begin(), samples.end(), [&](double x) { return x > cfg.time_bound; });
  m.bounded_prob = static_cast<double>(above) / n;
  return m;
}

Selection select_plan(const std::vector<PlanMetrics>& table, double alpha_mean) {
  if (table.empty()) throw InvalidArgument("cannot select from an empty metric table");
  Selection sel;
  double best_mean = std::numeric_limits<double>::infinity();
  for (const auto& row : table) best_mean = std::min(best_mean, row.metrics.mean);
  sel.mean_threshold = (1.0 + alpha_mean) * best_mean;

  std::vector<const PlanMetrics*> kept;
  for (const auto& row : table) {
    if (row.metrics.mean <= sel.mean_threshold) {
      kept.push_back(&row);
    } else {
      sel.eliminated.push_back(
          {row.plan_id, fmt::format("mean filter: mean {:.4g} exceeds {:.4g} = (1 + {}) x best mean {:.4g}",
                                    row.metrics.mean, sel.mean_threshold, alpha_mean, best_mean)});
    }
  }
  auto key = [](const PlanMetrics* p) {
    return std::make_tuple(p->metrics.variance, p->metrics.entropy_bits, p->metrics.mean, p->plan_id);
  };
  const auto* winner = *std::min_element(kept.begin(), kept.end(), [&](auto* a, auto* b) { return key(a) < key(b); });
  sel.plan_id = winner->plan_id;

  for (const auto* p : kept) {
    if (p == winner) continue;
    const auto& a = p->metrics;
    const auto& w = winner->metrics;
    std::string reason;
    if (a.variance != w.variance) {
      reason = fmt::format("variance {:.4g} above selected {:.4g}", a.variance, w.variance);
    } else if (a.entropy_bits != w.entropy_bits) {
      reason = fmt::format("equal variance, entropy {:.4g} above selected {:.4g}", a.entropy_bits, w.entropy_bits);
    } else if (a.mean != w.mean) {
      reason = fmt::format("equal variance and entropy, mean {:.4g} above selected {:.4g}", a.mean, w.mean);
    } else {
      reason = "metrics identical, plan id orders after selected";
    }
    sel.eliminated.push_back({p->plan_id, std::move(reason)});
  }
  return sel;
}

WelchResult compare_means(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2) throw InsufficientSamples(a.size());
  if (b.size() < 2) throw InsufficientSamples(b.size());
  const double ma = sample_mean(a), mb = sample_mean(b);
  const double va = sample_variance(a, ma) / static_cast<double>(a.size());
  const double vb = sample_variance(b, mb) / static_cast<double>(b.size());
  WelchResult r;
  const double se2 = va + vb;
  if (se2 == 0.0) {
    // Both samples constant: either identical or perfectly separated.
    r.t = ma == mb ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
    r.dof = static_cast<double>(a.size() + b.size() - 2);
    r.p_value = ma == mb ? 1.0 : 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.dof = se2 * se2 /
          (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(r.dof);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

nlohmann::json to_json(const RiskMetrics& m) {
  return {{"samples", m.samples},       {"mean", m.mean},         {"variance", m.variance},
          {"entropy_bits", m.entropy_bits}, {"var_alpha", m.var_alpha}, {"es_alpha", m.es_alpha},
          {"bounded_prob", m.bounded_prob}, {"bin_width", m.bin_width}, {"alpha", m.alpha},
          {"time_bound", m.time_bound}};
}

RiskMetrics metrics_from_json(const nlohmann::json& j, const std::string& path) {
  using namespace schema;
  expect_keys(j, path,
              {"samples", "mean", "variance", "entropy_bits", "var_alpha", "es_alpha", "bounded_prob", "bin_width",
               "alpha", "time_bound"});
  RiskMetrics m;
  m.samples = unsigned_integer(j["samples"], path + ".samples");
  m.mean = number(j["mean"], path + ".mean");
  m.variance = number(j["variance"], path + ".variance");
  m.entropy_bits = number(j["entropy_bits"], path + ".entropy_bits");
  m.var_alpha = number(j["var_alpha"], path + ".var_alpha");
  m.es_alpha = number(j["es_alpha"], path + ".es_alpha");
  m.bounded_prob = number(j["bounded_prob"], path + ".bounded_prob");
  m.bin_width = number(j["bin_width"], path + ".bin_width");
  m.alpha = number(j["alpha"], path + ".alpha");
  m.time_bound = number(j["time_bound"], path + ".time_bound");
  return m;
}

nlohmann::json to_json(const Selection& s) {
  nlohmann::json elim = nlohmann::json::array();
  for (const auto& e : s.eliminated) elim.push_back({{"plan_id", e.plan_id}, {"reason", e.reason}});
  return {{"selected", s.plan_id}, {"mean_threshold", s.mean_threshold}, {"eliminated", std::move(elim)}};
}

nlohmann::json to_json(const WelchResult& w) {
  // JSON has no infinities; perfectly separated samples store the sign as text.
  const auto t = std::isfinite(w.t) ? nlohmann::json(w.t) : nlohmann::json(w.t > 0 ? "+inf" : "-inf");
  return {{"t", t}, {"dof", w.dof}, {"p_value", w.p_value}};
}

}  // namespace riskplan
