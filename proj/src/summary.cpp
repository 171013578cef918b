#include "acipf/summary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "acipf/experiment.hpp"

namespace acipf {

MetricStats describe(std::span<const double> values) {
  MetricStats s;
  s.n = values.size();
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  const double half = 1.96 * s.stddev / std::sqrt(static_cast<double>(s.n));
  s.ci_low = s.mean - half;
  s.ci_high = s.mean + half;
  return s;
}

RunSummary summarize(std::span<const StepRecord> records) {
  RunSummary out;
  if (records.empty()) {
    out.notes.push_back("no records");
    return out;
  }

  struct Columns {
    std::vector<double> racr, acr, aps, radius, lambda;
    std::size_t warmup = 0;
    std::size_t saturated = 0;
  };
  std::map<int, Columns> groups;
  int max_h = 0;
  for (const auto& r : records) {
    max_h = std::max(max_h, r.horizon);
    if (r.degenerate) ++out.degenerate_records;
    auto& g = groups[r.horizon];
    if (!r.has_set()) {
      ++g.warmup;
      continue;
    }
    g.racr.push_back(1.0 - r.realized_lambda);
    g.acr.push_back(r.covered ? 1.0 : 0.0);
    g.aps.push_back(std::numbers::pi * r.radius * r.radius);
    g.radius.push_back(r.radius);
    g.lambda.push_back(r.realized_lambda);
    if (r.alpha_used <= 0.0) ++g.saturated;
  }

  for (int h = 1; h <= max_h; ++h) {
    const auto it = groups.find(h);
    if (it == groups.end() || it->second.racr.empty()) {
      out.notes.push_back("horizon " + std::to_string(h) + ": no evaluated records");
      continue;
    }
    const auto& g = it->second;
    HorizonSummary hs;
    hs.horizon = h;
    hs.count = g.racr.size();
    hs.warmup_records = g.warmup;
    hs.racr = describe(g.racr);
    hs.acr = describe(g.acr);
    hs.aps = describe(g.aps);
    hs.radius = describe(g.radius);
    hs.lambda = describe(g.lambda);
    hs.saturated = g.saturated;
    auto sorted = g.radius;
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    hs.median_radius = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    out.horizons.push_back(hs);
  }
  return out;
}

}  // namespace acipf
