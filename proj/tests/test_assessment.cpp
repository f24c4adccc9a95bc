#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "riskplan/assessment.hpp"
#include "riskplan/errors.hpp"

using namespace riskplan;

namespace {

PlanMetrics row(const std::string& id, double mean, double variance, double entropy) {
  PlanMetrics p;
  p.plan_id = id;
  p.metrics.mean = mean;
  p.metrics.variance = variance;
  p.metrics.entropy_bits = entropy;
  return p;
}

// Mean, variance and entropy columns of the five-plan tank mission table.
std::vector<PlanMetrics> tank_table() {
  return {row("P1", 293, 1.92, 1.6), row("P2", 297, 1.8, 1.6), row("P3", 322, 0.17, 1.6),
          row("P4", 294, 0.02, 0.2), row("P5", 305, 0.1, 1.6)};
}

}  // namespace

TEST_CASE("constant samples have zero variance and zero entropy") {
  const std::vector<double> x(10, 42.0);
  const auto m = compute_metrics(x);
  CHECK(m.mean == 42.0);
  CHECK(m.variance == 0.0);
  CHECK(m.entropy_bits == 0.0);
  CHECK(m.var_alpha == 42.0);
  CHECK(m.es_alpha == 42.0);
}

TEST_CASE("four equally filled bins carry two bits") {
  const std::vector<double> x{1, 6, 11, 16, 2, 7, 12, 17};
  CHECK(compute_metrics(x).entropy_bits == doctest::Approx(2.0).epsilon(1e-12));
  MetricConfig wide;
  wide.bin_width = 10.0;
  CHECK(compute_metrics(x, wide).entropy_bits == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("value at risk and expected shortfall on 1..10 at alpha 0.9") {
  std::vector<double> x(10);
  std::iota(x.begin(), x.end(), 1.0);
  std::shuffle(x.begin(), x.end(), std::mt19937_64(4));
  const auto m = compute_metrics(x);
  CHECK(m.var_alpha == 9.0);
  CHECK(m.es_alpha == 10.0);
  CHECK(m.mean == 5.5);
  CHECK(m.variance == doctest::Approx(55.0 / 6.0));
}

TEST_CASE("bounded probability counts samples above the bound") {
  MetricConfig cfg;
  cfg.time_bound = 7.0;
  const std::vector<double> x{5, 6, 7, 8, 9};
  CHECK(compute_metrics(x, cfg).bounded_prob == doctest::Approx(0.4));
  CHECK(compute_metrics(x, cfg).time_bound == 7.0);
}

TEST_CASE("property: mean and variance agree with a two-pass computation") {
  std::mt19937_64 rng(8);
  std::gamma_distribution<double> g(2.0, 30.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(50);
    for (auto& v : x) v = g(rng);
    double sum = 0.0;
    for (double v : x) sum += v;
    const double mean = sum / 50.0;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const auto m = compute_metrics(x);
    CHECK(m.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(m.variance == doctest::Approx(ss / 49.0).epsilon(1e-10));
    CHECK(m.entropy_bits >= 0.0);
    CHECK(m.entropy_bits <= std::log2(50.0) + 1e-12);
    CHECK(m.es_alpha >= m.var_alpha);
  }
}

TEST_CASE("metrics need two samples and a valid configuration") {
  CHECK_THROWS_AS(compute_metrics(std::vector<double>{1.0}), InsufficientSamples);
  MetricConfig bad;
  bad.alpha = 1.0;
  CHECK_THROWS_AS(compute_metrics(std::vector<double>{1.0, 2.0}, bad), InvalidArgument);
  bad = {};
  bad.bin_width = 0.0;
  CHECK_THROWS_AS(compute_metrics(std::vector<double>{1.0, 2.0}, bad), InvalidArgument);
}

TEST_CASE("the tank mission table selects P4 and drops P3 by the mean filter") {
  const auto sel = select_plan(tank_table(), 0.05);
  CHECK(sel.plan_id == "P4");
  CHECK(sel.mean_threshold == doctest::Approx(293 * 1.05));
  const auto p3 = std::find_if(sel.eliminated.begin(), sel.eliminated.end(), [](auto& e) { return e.plan_id == "P3"; });
  REQUIRE(p3 != sel.eliminated.end());
  CHECK(p3->reason.rfind("mean filter", 0) == 0);
  CHECK(sel.eliminated.size() == 4);
  for (const auto& e : sel.eliminated)
    if (e.plan_id != "P3") CHECK(e.reason.rfind("variance", 0) == 0);
}

TEST_CASE("a single plan is selected as is") {
  const auto sel = select_plan({row("P1", 10, 5, 1)});
  CHECK(sel.plan_id == "P1");
  CHECK(sel.eliminated.empty());
  CHECK_THROWS_AS(select_plan({}), InvalidArgument);
}

TEST_CASE("ties fall to entropy, then mean, then plan id") {
  CHECK(select_plan({row("P1", 100, 1, 2), row("P2", 100, 1, 1)}).plan_id == "P2");
  CHECK(select_plan({row("P1", 101, 1, 1), row("P2", 100, 1, 1)}).plan_id == "P2");
  const auto same = select_plan({row("P2", 100, 1, 1), row("P1", 100, 1, 1)});
  CHECK(same.plan_id == "P1");
  REQUIRE(same.eliminated.size() == 1);
  CHECK(same.eliminated[0].plan_id == "P2");
}

TEST_CASE("alpha zero keeps only the best mean") {
  CHECK(select_plan(tank_table(), 0.0).plan_id == "P1");
}

TEST_CASE("Welch test on identical samples") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const auto r = compare_means(a, a);
  CHECK(r.t == 0.0);
  CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("Welch statistic and degrees of freedom") {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8};
  const auto r = compare_means(a, b);
  const double va = 5.0 / 3.0 / 4.0, vb = 20.0 / 3.0 / 4.0;
  CHECK(r.t == doctest::Approx(-2.5 / std::sqrt(va + vb)));
  CHECK(r.dof == doctest::Approx((va + vb) * (va + vb) / (va * va / 3 + vb * vb / 3)));
  CHECK(r.p_value > 0.05);
  CHECK(r.p_value < 0.5);
}

TEST_CASE("Welch test separates shifted samples and handles constant ones") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::vector<double> a(30), b(30);
  for (auto& v : a) v = 100 + jitter(rng);
  for (auto& v : b) v = 110 + jitter(rng);
  CHECK(compare_means(a, b).p_value < 1e-10);

  const std::vector<double> c{3, 3, 3}, d{4, 4, 4};
  const auto r = compare_means(c, d);
  CHECK(std::isinf(r.t));
  CHECK(r.t < 0.0);
  CHECK(r.p_value == 0.0);
  CHECK(to_json(r)["t"] == "-inf");
  CHECK_THROWS_AS(compare_means(std::vector<double>{1}, d), InsufficientSamples);
}

TEST_CASE("property: Welch p-values are calibrated under the null") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> x(0.0, 1.0), y(0.0, 3.0);
  int rejections = 0;
  const int trials = 2000;
  for (int i = 0; i < trials; ++i) {
    std::vector<double> a(12), b(20);
    for (auto& v : a) v = x(rng);
    for (auto& v : b) v = y(rng);
    if (compare_means(a, b).p_value < 0.05) ++rejections;
  }
  const double rate = static_cast<double>(rejections) / trials;
  CHECK(rate > 0.03);
  CHECK(rate < 0.07);
}

TEST_CASE("metrics round-trip through JSON") {
  std::vector<double> x(10);
  std::iota(x.begin(), x.end(), 1.0);
  const auto m = compute_metrics(x);
  const auto back = metrics_from_json(to_json(m), ".metrics");
  CHECK(back.mean == m.mean);
  CHECK(back.variance == m.variance);
  CHECK(back.es_alpha == m.es_alpha);
  auto j = to_json(m);
  j.erase("alpha");
  CHECK_THROWS_AS(metrics_from_json(j, ".metrics"), SchemaMismatch);
}
