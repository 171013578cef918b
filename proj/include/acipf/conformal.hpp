#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "acipf/types.hpp"

namespace acipf {

// Euclidean distance between a point prediction and a candidate position.
double conformity_score(const Vec2& prediction, const Vec2& x);

// One time slice of a calibration set: a prediction and the weighted particle
// cloud it is scored against.
struct CalibrationEntry {
  Vec2 predicted_position = Vec2::Zero();
  std::vector<Vec2> particle_positions;
  std::vector<double> particle_weights;
  std::int64_t time_index = 0;
};

// Rolling store of the most recent `capacity` scored entries for one horizon.
//
// Scores are computed once on push and kept sorted (ties by particle index),
// together with prefix sums of the atom masses w / b for the current entry
// count b. Quantile queries then only need binary searches.
class CalibrationWindow {
 public:
  struct ScoredEntry {
    std::int64_t time_index = 0;
    std::vector<double> scores;
    std::vector<double> weights;
    std::vector<std::uint32_t> particle_index;
    std::vector<double> cumulative_mass;
  };

  explicit CalibrationWindow(std::size_t capacity, int horizon = 1);

  // Throws std::logic_error if the entry is not newer than the newest stored
  // one, or if its lengths/weights are inconsistent.
  void push(const CalibrationEntry& entry);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  int horizon() const { return horizon_; }
  const std::deque<ScoredEntry>& entries() const { return entries_; }
  std::vector<std::int64_t> time_indices() const;
  double max_score() const;

  // Mass of atoms with score <= c.
  double cumulative_mass(double c) const;

 private:
  void rebuild_masses();

  std::size_t capacity_;
  int horizon_;
  std::deque<ScoredEntry> entries_;
};

CalibrationWindow push_entry(CalibrationWindow window, const CalibrationEntry& entry);

// inf{c : sum 1(delta <= c) w / b >= q}, with 0 for q <= 0 and c_star for
// q >= 1. nullopt while the window is still empty (warm-up).
std::optional<double> weighted_quantile(const CalibrationWindow& window, double q, double c_star);

struct AlphaState {
  double alpha_t = 0.1;
  double gamma = 0.01;
  double alpha_target = 0.1;
  double c_star = 1.0;

  static AlphaState initial(double alpha_target, double gamma, double c_star);
  void validate() const;
  bool within_bounds() const;
};

struct PredictionSet {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  double alpha_used = 0.0;
  int horizon = 1;

  bool contains(const Vec2& x) const { return conformity_score(center, x) <= radius; }
};

std::optional<PredictionSet> build_prediction_set(const Vec2& center, const CalibrationWindow& window,
                                                  const AlphaState& alpha_state);

// Weight of particles strictly outside the set.
double realized_miscoverage(const PredictionSet& set, std::span<const Vec2> particle_positions,
                            std::span<const double> particle_weights);

// alpha_{t+1} = alpha_t + gamma (alpha - lambda). Throws std::logic_error if
// the result leaves [-gamma, 1 + gamma].
AlphaState update_alpha(const AlphaState& alpha_state, double realized_lambda);

// Diagnostic: sup{beta in [0, 1] : Lambda(beta) <= alpha} for the set centred
// at `center` built from `window`, scored against the given particle cloud.
double optimal_alpha(const CalibrationWindow& window, const Vec2& center,
                     std::span<const Vec2> particle_positions,
                     std::span<const double> particle_weights, double alpha_target, double c_star);

}  // namespace acipf
