#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace acipf {

struct StepRecord;

// Mean with a normal-approximation 95% interval.
struct MetricStats {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

MetricStats describe(std::span<const double> values);

struct HorizonSummary {
  int horizon = 1;
  std::size_t count = 0;
  std::size_t warmup_records = 0;
  MetricStats racr;    // realized aggregated coverage, 1 - lambda
  MetricStats acr;     // actual coverage of the true position
  MetricStats aps;     // area of the predicted set, pi r^2
  MetricStats radius;
  MetricStats lambda;
  double median_radius = 0.0;
  // Sets built with alpha <= 0, whose radius is the C* clamp.
  std::size_t saturated = 0;
};

struct RunSummary {
  std::string predictor;
  bool adaptive = true;
  std::vector<HorizonSummary> horizons;
  std::size_t degenerate_records = 0;
  std::vector<std::string> notes;
};

RunSummary summarize(std::span<const StepRecord> records);

}  // namespace acipf
