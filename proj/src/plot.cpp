#include "riskplan/plot.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "riskplan/errors.hpp"

namespace riskplan {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// "P2" sorts before "P10".
bool plan_id_less(const std::string& a, const std::string& b) {
  auto split = [](const std::string& s) {
    auto pos = s.find_last_not_of("0123456789");
    pos = pos == std::string::npos ? 0 : pos + 1;
    const auto digits = s.substr(pos);
    return std::make_tuple(s.substr(0, pos), digits.size(), digits);
  };
  return split(a) < split(b);
}

}  // namespace

BoxStats box_stats(std::string plan_id, std::span<const double> samples) {
  if (samples.size() < 2) throw InsufficientSamples(samples.size());
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  BoxStats b;
  b.plan_id = std::move(plan_id);
  b.n = sorted.size();
  b.q1 = quantile(sorted, 0.25);
  b.median = quantile(sorted, 0.5);
  b.q3 = quantile(sorted, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
  b.low = b.median;
  b.high = b.median;
  for (double x : sorted) {
    if (x < lo_fence || x > hi_fence) {
      b.outliers.push_back(x);
    } else {
      b.low = std::min(b.low, x);
      b.high = std::max(b.high, x);
    }
  }
  return b;
}

PlotOutput plot_report(const AssessmentReport& report) {
  std::vector<const AssessmentReport::PlanEntry*> plans;
  for (const auto& p : report.plans) plans.push_back(&p);
  std::stable_sort(plans.begin(), plans.end(), [](auto* a, auto* b) { return plan_id_less(a->plan_id, b->plan_id); });

  PlotOutput out;
  out.csv = csv_provenance(report.provenance) + "plan_id,episode,execution_time,note\n";
  for (const auto* p : plans) {
    if (p->samples.size() < 2) {
      out.skipped.push_back(p->plan_id);
      out.csv += fmt::format("{},,,warning: {} sample(s), need at least 2 for a box\n", p->plan_id, p->samples.size());
      continue;
    }
    for (std::size_t i = 0; i < p->samples.size(); ++i) out.csv += fmt::format("{},{},{},\n", p->plan_id, i, p->samples[i]);
    out.boxes.push_back(box_stats(p->plan_id, p->samples));
  }
  if (out.boxes.empty()) throw EmptyReport("no plan has at least two execution-time samples");

  double lo = out.boxes.front().q1, hi = lo;
  for (const auto& b : out.boxes) {
    lo = std::min({lo, b.low, b.outliers.empty() ? b.low : b.outliers.front()});
    hi = std::max({hi, b.high, b.outliers.empty() ? b.high : b.outliers.back()});
  }
  if (hi - lo < 1e-9) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double left = 70.0, top = 40.0, plot_h = 300.0, slot = 90.0;
  const double width = left + slot * static_cast<double>(out.boxes.size()) + 30.0;
  const double height = top + plot_h + 50.0;
  auto y = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

  std::string& s = out.svg;
  s += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      width, height, width, height);
  s += fmt::format("<!-- config_hash={} master_seed={} -->\n", report.provenance.config_hash,
                   report.provenance.master_seed);
  s += "<style>text{font-family:sans-serif;font-size:12px}</style>\n";
  s += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", width, height);
  s += fmt::format("<text x=\"{:.1f}\" y=\"20\" text-anchor=\"middle\">Execution time per plan</text>\n", width / 2);
  s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", left, top,
                   top + plot_h);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.2f}\" x2=\"{:.1f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", left - 4, y(v),
                     left, y(v));
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.1f}</text>\n", left - 6, y(v) + 4, v);
  }
  s += fmt::format(
      "<text x=\"16\" y=\"{:.1f}\" transform=\"rotate(-90 16 {:.1f})\" text-anchor=\"middle\">time [s]</text>\n",
      top + plot_h / 2, top + plot_h / 2);

  for (std::size_t i = 0; i < out.boxes.size(); ++i) {
    const auto& b = out.boxes[i];
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    const double half = slot * 0.25;
    s += fmt::format("<g id=\"box-{}\">\n", b.plan_id);
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.2f}\" x2=\"{0:.1f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n", cx,
                     y(b.high), y(b.q3));
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.2f}\" x2=\"{0:.1f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n", cx,
                     y(b.q1), y(b.low));
    for (double w : {b.low, b.high})
      s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.2f}\" x2=\"{:.1f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n",
                       cx - half / 2, y(w), cx + half / 2, y(w));
    s += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.2f}\" width=\"{:.1f}\" height=\"{:.2f}\" fill=\"#9ecae1\" stroke=\"black\"/>\n",
        cx - half, y(b.q3), 2 * half, y(b.q1) - y(b.q3));
    s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.2f}\" x2=\"{:.1f}\" y2=\"{:.2f}\" stroke=\"black\" stroke-width=\"2\"/>\n",
                     cx - half, y(b.median), cx + half, y(b.median));
    for (double o : b.outliers)
      s += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.2f}\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n", cx, y(o));
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", cx, top + plot_h + 20,
                     b.plan_id);
    s += "</g>\n";
  }
  s += "</svg>\n";
  return out;
}

}  // namespace riskplan
