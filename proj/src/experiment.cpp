#include "acipf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

namespace acipf {

ExperimentConfig ExperimentConfig::paper_preset() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::smoke_preset() {
  ExperimentConfig c;
  c.T = 30;
  c.T0 = 10;
  c.M = 50;
  c.H = 2;
  return c;
}

void ExperimentConfig::validate() const {
  if (T0 < 1 || T <= T0) throw std::invalid_argument("config: need T > T0 >= 1");
  if (H < 1) throw std::invalid_argument("config: H must be >= 1");
  if (H > T0) throw std::invalid_argument("config: H must not exceed T0 so every horizon has T - T0 records");
  if (M == 0) throw std::invalid_argument("config: M must be >= 1");
  if (b == 0) throw std::invalid_argument("config: b must be >= 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("config: gamma must be >= 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("config: alpha must lie in (0, 1)");
  motion.validate();
  detection.validate();
  if (!(map_margin >= 0.0)) throw std::invalid_argument("config: map margin must be >= 0");
  if (!initial_state.allFinite()) throw std::invalid_argument("config: initial state must be finite");
  if (!(prior_position_std >= 0.0) || !(prior_velocity_std >= 0.0))
    throw std::invalid_argument("config: prior standard deviations must be >= 0");
  if (!(c_star_factor > 0.0)) throw std::invalid_argument("config: c_star factor must be > 0");
  if (c_star && !(*c_star > 0.0)) throw std::invalid_argument("config: c_star must be > 0");
  if (!(filter.ess_fraction >= 0.0 && filter.ess_fraction <= 1.0))
    throw std::invalid_argument("config: ess fraction must lie in [0, 1]");
  if (!(filter.likelihood_tolerance > 0.0 && filter.likelihood_tolerance < 1.0))
    throw std::invalid_argument("config: likelihood tolerance must lie in (0, 1)");
  if (filter.threads == 0) throw std::invalid_argument("config: threads must be >= 1");
}

std::vector<StateVector> simulate_trajectory(const StateVector& initial, int steps,
                                             const MotionModel& motion, RandomStream& rng) {
  std::vector<StateVector> out;
  out.reserve(static_cast<std::size_t>(steps));
  StateVector x = initial;
  for (int t = 1; t <= steps; ++t) {
    out.push_back(x);
    x = motion.step(x, rng);
  }
  return out;
}

MapRect enclosing_map(const std::vector<StateVector>& trajectory, double margin) {
  if (trajectory.empty()) throw std::invalid_argument("map: empty trajectory");
  MapRect m{trajectory[0](0), trajectory[0](0), trajectory[0](1), trajectory[0](1)};
  for (const auto& x : trajectory) {
    m.xmin = std::min(m.xmin, x(0));
    m.xmax = std::max(m.xmax, x(0));
    m.ymin = std::min(m.ymin, x(1));
    m.ymax = std::max(m.ymax, x(1));
  }
  m.xmin -= margin;
  m.xmax += margin;
  m.ymin -= margin;
  m.ymax += margin;
  return m;
}

namespace {

RandomStream root_stream(const ExperimentConfig& config) { return RandomStream(config.seed, "acipf"); }

SensorField make_field(const ExperimentConfig& config, const MapRect& map) {
  if (!config.sensor_table.empty()) return load_sensor_table(config.sensor_table, config.detection);
  auto rng = root_stream(config).derive("deploy");
  return deploy(map, config.detection, rng);
}

}  // namespace

Scenario build_scenario(const ExperimentConfig& config) {
  config.validate();
  const MotionModel motion(config.motion);
  const auto root = root_stream(config);
  auto traj_rng = root.derive("trajectory");
  auto trajectory = simulate_trajectory(config.initial_state, config.T, motion, traj_rng);
  const auto map = enclosing_map(trajectory, config.map_margin);
  auto field = make_field(config, map);

  std::vector<Observation> observations;
  observations.reserve(trajectory.size());
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto t = static_cast<std::int64_t>(i + 1);
    auto rng = root.derive("observe", {static_cast<std::uint64_t>(t)});
    observations.push_back(observe(field, position_of(trajectory[i]), rng, t));
  }
  const double c_star = config.c_star ? *config.c_star : config.c_star_factor * map.diagonal();
  return Scenario{std::move(trajectory), map, std::move(field), std::move(observations), c_star};
}

namespace {

struct Pending {
  std::int64_t origin = 0;
  Vec2 center = Vec2::Zero();
  // Window as it stood at the issue time; dropped once the set is built.
  std::optional<CalibrationWindow> window;
  bool needs_set = false;
  bool finalized = false;
  std::optional<PredictionSet> set;
  double alpha_used = 0.0;
};

// alpha_{t+1,h} needs Lambda_{t,h}, which is known only at t + h. The set
// issued at t therefore keeps its centre and a copy of its window, and its
// radius is fixed once alpha_{t,h} is available (at t + h - 1 at the latest,
// before the target time).
struct HorizonState {
  CalibrationWindow window;
  AlphaState alpha;           // alpha_{next_origin,h}
  std::int64_t next_origin = 0;
  std::deque<Pending> pending;
};

// Conformal bookkeeping for one adaptive mode.
class Tracker {
 public:
  Tracker(const ExperimentConfig& config, const Scenario& scenario, bool adaptive)
      : config_(config), scenario_(scenario), adaptive_(adaptive) {
    for (int h = 1; h <= config.H; ++h)
      horizons_.push_back({CalibrationWindow(config.b, h),
                           AlphaState::initial(config.alpha, config.gamma, scenario.c_star), 0, {}});
    result_.adaptive = adaptive;
  }

  void evaluate(std::int64_t t, const FilterStep& step, const std::vector<Vec2>& positions,
                const std::vector<double>& weights) {
    const bool inference = t > config_.T0;
    const Vec2 truth = position_of(scenario_.state_at(t));
    for (auto& hs : horizons_) {
      const int h = hs.window.horizon();
      if (hs.pending.empty() || hs.pending.front().origin + h != t) continue;
      Pending p = std::move(hs.pending.front());
      hs.pending.pop_front();
      if (!p.finalized) throw std::logic_error("tracker: prediction evaluated before its set was built");

      double lambda = std::numeric_limits<double>::quiet_NaN();
      if (p.set) lambda = realized_miscoverage(*p.set, positions, weights);
      if (inference) {
        StepRecord r;
        r.time = t;
        r.horizon = h;
        r.predicted_position = p.center;
        r.true_position = truth;
        r.ess = step.diagnostics.ess;
        r.degenerate = step.diagnostics.degenerate;
        r.alpha_used = p.alpha_used;
        if (p.set) {
          r.radius = p.set->radius;
          r.realized_lambda = lambda;
          r.covered = p.set->contains(truth);
        } else {
          r.radius = kNoPredictionSet;
          r.realized_lambda = lambda;
          ++result_.diagnostics.warmup_records;
        }
        result_.records.push_back(r);
      }
      if (inference && p.set && adaptive_) hs.alpha = update_alpha(hs.alpha, lambda);
      hs.next_origin = p.origin + 1;

      hs.window.push({p.center, positions, weights, p.origin});
      if (hs.window.entries().back().scores.back() > scenario_.c_star) ++result_.diagnostics.c_star_exceedances;
      finalize(hs);
    }
  }

  void issue(std::int64_t t, const std::vector<MultiStepCloud>& clouds) {
    for (auto& hs : horizons_) {
      const int h = hs.window.horizon();
      if (t + h > config_.T) continue;
      Pending p;
      p.origin = t;
      p.center = clouds[static_cast<std::size_t>(h - 1)].point_prediction;
      p.needs_set = t + h > config_.T0;
      if (p.needs_set && h > 1) p.window = hs.window;
      hs.pending.push_back(std::move(p));
      finalize(hs);
    }
  }

  ExperimentResult& result() { return result_; }

 private:
  // Builds the set of the pending prediction whose alpha is now known.
  void finalize(HorizonState& hs) {
    for (auto& p : hs.pending) {
      if (p.finalized) continue;
      if (p.origin != hs.next_origin) return;
      p.alpha_used = hs.alpha.alpha_t;
      if (p.needs_set) p.set = build_prediction_set(p.center, p.window ? *p.window : hs.window, hs.alpha);
      p.window.reset();
      p.finalized = true;
      return;
    }
  }

  const ExperimentConfig& config_;
  const Scenario& scenario_;
  bool adaptive_;
  std::vector<HorizonState> horizons_;
  ExperimentResult result_;
};

}  // namespace

std::vector<ExperimentResult> run_variants(const ExperimentConfig& config, const Scenario& scenario,
                                           const std::vector<bool>& adaptive_modes,
                                           const StepObserver& observer) {
  config.validate();
  if (scenario.trajectory.size() != static_cast<std::size_t>(config.T))
    throw std::invalid_argument("run: scenario length does not match T");
  const MotionModel motion(config.motion);
  const auto root = root_stream(config);
  const auto filter_rng = root.derive("filter");

  std::vector<Tracker> trackers;
  trackers.reserve(adaptive_modes.size());
  for (bool a : adaptive_modes) trackers.emplace_back(config, scenario, a);

  // The prior describes X_0, one noise-free step before the initial state.
  PriorSpec prior;
  prior.mean = motion.mean_step_back(config.initial_state);
  prior.stddev << config.prior_position_std, config.prior_position_std, config.prior_velocity_std,
      config.prior_velocity_std;
  auto prior_rng = root.derive("prior");
  ParticleSet set = init(prior, config.M, config.predictor, prior_rng);

  RunDiagnostics diag;
  diag.min_ess = std::numeric_limits<double>::infinity();
  const std::vector<MultiStepCloud> no_clouds;
  auto clouds = predict_multistep(set, config.H, motion, filter_rng, config.filter.threads);
  for (auto& tr : trackers) tr.issue(0, clouds);

  for (std::int64_t t = 1; t <= config.T; ++t) {
    const auto step = filter_step(set, scenario.observations[static_cast<std::size_t>(t - 1)], scenario.field,
                                  motion, filter_rng, config.filter);
    ++diag.filter_steps;
    if (step.diagnostics.degenerate) ++diag.degenerate_steps;
    diag.clipped_ratios += step.diagnostics.clipped_ratios;
    diag.min_ess = std::min(diag.min_ess, step.diagnostics.ess);

    const auto positions = step.posterior.positions();
    const auto weights = step.posterior.weights();
    for (auto& tr : trackers) tr.evaluate(t, step, positions, weights);

    set = step.carried;
    if (t < config.T) {
      clouds = predict_multistep(set, config.H, motion, filter_rng, config.filter.threads);
      for (auto& tr : trackers) tr.issue(t, clouds);
    }
    if (observer) observer(t, step, t < config.T ? clouds : no_clouds);
  }

  std::vector<ExperimentResult> out;
  out.reserve(trackers.size());
  for (auto& tr : trackers) {
    auto& r = tr.result();
    const auto warmup = r.diagnostics.warmup_records;
    const auto exceed = r.diagnostics.c_star_exceedances;
    r.diagnostics = diag;
    r.diagnostics.warmup_records = warmup;
    r.diagnostics.c_star_exceedances = exceed;
    r.summary = summarize(r.records);
    r.summary.predictor = to_string(config.predictor);
    r.summary.adaptive = r.adaptive;
    out.push_back(std::move(r));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto scenario = build_scenario(config);
  auto results = run_variants(config, scenario, {config.adaptive});
  return std::move(results.front());
}

}  // namespace acipf
