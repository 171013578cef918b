#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "acipf/experiment.hpp"

namespace acipf {

struct SweepGrid {
  std::vector<FilterKind> predictors{FilterKind::kPF, FilterKind::kAPF};
  std::vector<bool> adaptive_modes{true, false};
};

// Parses "pf,apf x adaptive,fixed" (either side may list one or both values).
SweepGrid parse_grid(const std::string& text);

struct SweepRun {
  std::uint64_t seed = 0;
  FilterKind predictor = FilterKind::kPF;
  bool adaptive = true;
  RunSummary summary;
  RunDiagnostics diagnostics;
  std::size_t alpha_bound_violations = 0;
  std::size_t coverage_flag_mismatches = 0;
};

// Across-seed statistics of per-seed means for one (predictor, adaptive, horizon).
struct SweepCell {
  std::string predictor;
  bool adaptive = true;
  int horizon = 1;
  MetricStats racr;
  MetricStats acr;
  MetricStats aps;
  MetricStats radius;
  MetricStats median_radius;
  MetricStats saturated_fraction;
};

struct SweepResult {
  std::vector<SweepRun> runs;
  std::vector<SweepCell> cells;

  const SweepCell& cell(FilterKind predictor, bool adaptive, int horizon) const;
};

using SweepProgress = std::function<void(const SweepRun&)>;

// Every seed shares one scenario across the grid; adaptive and fixed trackers
// share one filter pass per predictor.
SweepResult run_sweep(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds,
                      const SweepGrid& grid, const SweepProgress& progress = {});

std::vector<SweepCell> aggregate_runs(const std::vector<SweepRun>& runs);

// alpha_used outside [-gamma, 1 + gamma] and covered flags that disagree
// with the record's own distance/radius.
std::size_t count_alpha_violations(const std::vector<StepRecord>& records, double gamma);
std::size_t count_coverage_mismatches(const std::vector<StepRecord>& records);

nlohmann::json sweep_to_json(const SweepResult& result);
// Table-1-shaped text: metrics as rows, variants as columns, one block per horizon.
std::string format_table(const SweepResult& result);
// Long-format CSV: predictor,adaptive,horizon,metric,mean,ci_low,ci_high,n
std::string cells_to_csv(const std::vector<SweepCell>& cells);

}  // namespace acipf
