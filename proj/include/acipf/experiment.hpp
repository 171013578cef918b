#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "acipf/conformal.hpp"
#include "acipf/motion_model.hpp"
#include "acipf/particle_filter.hpp"
#include "acipf/sensor_network.hpp"
#include "acipf/summary.hpp"
#include "acipf/types.hpp"

namespace acipf {

struct ExperimentConfig {
  std::uint64_t seed = 7;
  int T = 1000;   // total steps
  int T0 = 200;   // training steps; inference covers T0+1..T
  std::size_t M = 1000;
  std::size_t b = 10;
  double gamma = 0.01;
  double alpha = 0.1;
  int H = 1;

  MotionParams motion;
  DetectionParams detection;
  double map_margin = 100.0;
  StateVector initial_state = StateVector(0.0, 0.0, 1.0, 1.0);

  FilterKind predictor = FilterKind::kPF;
  bool adaptive = true;
  FilterOptions filter;

  double prior_position_std = 10.0;
  double prior_velocity_std = 1.0;

  // C* = c_star_factor * diagonal of the deployment map, unless c_star is set.
  double c_star_factor = 10.0;
  std::optional<double> c_star;

  // Optional `x y` table pinning the sensor deployment.
  std::string sensor_table;

  std::string records_path;
  std::string summary_path;

  static ExperimentConfig paper_preset();
  static ExperimentConfig smoke_preset();

  void validate() const;
};

// Simulated ground truth shared by every predictor/adaptive variant of a seed.
struct Scenario {
  std::vector<StateVector> trajectory;  // trajectory[t - 1] is X_t, t = 1..T
  MapRect map;
  SensorField field;
  std::vector<Observation> observations;  // observations[t - 1] is Y_t
  double c_star = 0.0;

  const StateVector& state_at(std::int64_t t) const { return trajectory[static_cast<std::size_t>(t - 1)]; }
};

std::vector<StateVector> simulate_trajectory(const StateVector& initial, int steps,
                                             const MotionModel& motion, RandomStream& rng);
MapRect enclosing_map(const std::vector<StateVector>& trajectory, double margin);
Scenario build_scenario(const ExperimentConfig& config);

struct StepRecord {
  std::int64_t time = 0;  // evaluation time t + h
  int horizon = 1;
  Vec2 predicted_position = Vec2::Zero();
  double radius = 0.0;  // kNoPredictionSet while the window is warming up
  double alpha_used = 0.0;
  double realized_lambda = 0.0;
  bool covered = false;
  Vec2 true_position = Vec2::Zero();
  double ess = 0.0;
  bool degenerate = false;

  bool has_set() const { return radius >= 0.0; }
};

inline constexpr double kNoPredictionSet = -1.0;

struct RunDiagnostics {
  std::size_t filter_steps = 0;
  std::size_t degenerate_steps = 0;
  std::size_t clipped_ratios = 0;
  std::size_t c_star_exceedances = 0;
  std::size_t warmup_records = 0;
  double min_ess = 0.0;
};

struct ExperimentResult {
  bool adaptive = true;
  std::vector<StepRecord> records;
  RunSummary summary;
  RunDiagnostics diagnostics;
};

// Per-step hook for figure data: the filter output at time t and the clouds
// issued from time t (empty at t = T).
using StepObserver =
    std::function<void(std::int64_t t, const FilterStep& step, const std::vector<MultiStepCloud>& clouds)>;

ExperimentResult run_experiment(const ExperimentConfig& config);

// One filter pass feeding one conformal tracker per entry of `adaptive_modes`.
// Each result equals what run_experiment would give with config.adaptive set
// to that mode.
std::vector<ExperimentResult> run_variants(const ExperimentConfig& config, const Scenario& scenario,
                                           const std::vector<bool>& adaptive_modes,
                                           const StepObserver& observer = {});

}  // namespace acipf
