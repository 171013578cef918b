#include "acipf/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace acipf {

double conformity_score(const Vec2& prediction, const Vec2& x) {
  const double dx = prediction.x() - x.x();
  const double dy = prediction.y() - x.y();
  return std::sqrt(dx * dx + dy * dy);
}

CalibrationWindow::CalibrationWindow(std::size_t capacity, int horizon)
    : capacity_(capacity), horizon_(horizon) {
  if (capacity == 0) throw std::invalid_argument("calibration window: capacity must be >= 1");
  if (horizon < 1) throw std::invalid_argument("calibration window: horizon must be >= 1");
}

void CalibrationWindow::push(const CalibrationEntry& entry) {
  const auto m = entry.particle_positions.size();
  if (m == 0 || entry.particle_weights.size() != m)
    throw std::logic_error("calibration entry: positions and weights must be non-empty and equal length");
  if (!entries_.empty() && entry.time_index <= entries_.back().time_index)
    throw std::logic_error("calibration entry at time " + std::to_string(entry.time_index) +
                           " is not newer than " + std::to_string(entries_.back().time_index));
  const double total = std::accumulate(entry.particle_weights.begin(), entry.particle_weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9)
    throw std::logic_error("calibration entry: weights sum to " + std::to_string(total));

  ScoredEntry scored;
  scored.time_index = entry.time_index;
  std::vector<double> raw(m);
  for (std::size_t j = 0; j < m; ++j)
    raw[j] = conformity_score(entry.predicted_position, entry.particle_positions[j]);
  scored.particle_index.resize(m);
  std::iota(scored.particle_index.begin(), scored.particle_index.end(), 0u);
  std::sort(scored.particle_index.begin(), scored.particle_index.end(),
            [&](std::uint32_t a, std::uint32_t b) { return raw[a] < raw[b] || (raw[a] == raw[b] && a < b); });
  scored.scores.resize(m);
  scored.weights.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    scored.scores[k] = raw[scored.particle_index[k]];
    scored.weights[k] = entry.particle_weights[scored.particle_index[k]];
  }

  const auto before = entries_.size();
  entries_.push_back(std::move(scored));
  if (entries_.size() > capacity_) entries_.pop_front();
  if (entries_.size() != before) {
    rebuild_masses();
  } else {
    auto& e = entries_.back();
    const auto b = static_cast<double>(entries_.size());
    e.cumulative_mass.resize(e.weights.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < e.weights.size(); ++k) e.cumulative_mass[k] = acc += e.weights[k] / b;
  }
}

void CalibrationWindow::rebuild_masses() {
  const auto b = static_cast<double>(entries_.size());
  for (auto& e : entries_) {
    e.cumulative_mass.resize(e.weights.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < e.weights.size(); ++k) e.cumulative_mass[k] = acc += e.weights[k] / b;
  }
}

std::vector<std::int64_t> CalibrationWindow::time_indices() const {
  std::vector<std::int64_t> out;
  for (const auto& e : entries_) out.push_back(e.time_index);
  return out;
}

double CalibrationWindow::max_score() const {
  double top = 0.0;
  for (const auto& e : entries_)
    if (!e.scores.empty()) top = std::max(top, e.scores.back());
  return top;
}

double CalibrationWindow::cumulative_mass(double c) const {
  double total = 0.0;
  for (const auto& e : entries_) {
    const auto it = std::upper_bound(e.scores.begin(), e.scores.end(), c);
    const auto n = static_cast<std::size_t>(it - e.scores.begin());
    if (n > 0) total += e.cumulative_mass[n - 1];
  }
  return total;
}

CalibrationWindow push_entry(CalibrationWindow window, const CalibrationEntry& entry) {
  window.push(entry);
  return window;
}

std::optional<double> weighted_quantile(const CalibrationWindow& window, double q, double c_star) {
  if (window.empty()) return std::nullopt;
  if (q <= 0.0) return 0.0;
  if (q >= 1.0) return c_star;
  // Prefix sums of w / b round differently from a single sorted scan; a mass
  // within kMassSlack of q counts as reaching it.
  constexpr double kMassSlack = 1e-12;
  q -= kMassSlack;

  // The answer is an atom. Within each entry, find the smallest score whose
  // cumulative mass over the whole window reaches q; the minimum over entries wins.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : window.entries()) {
    if (e.scores.empty() || e.scores.front() >= best) continue;
    if (window.cumulative_mass(e.scores.back()) < q) continue;
    std::size_t lo = 0, hi = e.scores.size() - 1;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (window.cumulative_mass(e.scores[mid]) >= q) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    best = std::min(best, e.scores[lo]);
  }
  // Total mass can round to just under q when q is within an ulp of 1.
  if (!std::isfinite(best)) best = window.max_score();
  return best;
}

AlphaState AlphaState::initial(double alpha_target, double gamma, double c_star) {
  AlphaState s{alpha_target, gamma, alpha_target, c_star};
  s.validate();
  return s;
}

void AlphaState::validate() const {
  if (!(alpha_target > 0.0 && alpha_target < 1.0))
    throw std::invalid_argument("alpha: target miscoverage must lie in (0, 1)");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("alpha: gamma must be >= 0");
  if (!(c_star > 0.0) || !std::isfinite(c_star)) throw std::invalid_argument("alpha: c_star must be > 0");
}

bool AlphaState::within_bounds() const {
  constexpr double kSlack = 1e-12;
  return alpha_t >= -gamma - kSlack && alpha_t <= 1.0 + gamma + kSlack;
}

std::optional<PredictionSet> build_prediction_set(const Vec2& center, const CalibrationWindow& window,
                                                  const AlphaState& alpha_state) {
  const auto radius = weighted_quantile(window, 1.0 - alpha_state.alpha_t, alpha_state.c_star);
  if (!radius) return std::nullopt;
  return PredictionSet{center, *radius, alpha_state.alpha_t, window.horizon()};
}

double realized_miscoverage(const PredictionSet& set, std::span<const Vec2> particle_positions,
                            std::span<const double> particle_weights) {
  if (particle_positions.size() != particle_weights.size())
    throw std::logic_error("realized_miscoverage: positions and weights differ in length");
  double lambda = 0.0;
  for (std::size_t j = 0; j < particle_positions.size(); ++j)
    if (conformity_score(set.center, particle_positions[j]) > set.radius) lambda += particle_weights[j];
  return std::clamp(lambda, 0.0, 1.0);
}

AlphaState update_alpha(const AlphaState& alpha_state, double realized_lambda) {
  if (!(realized_lambda >= -1e-12 && realized_lambda <= 1.0 + 1e-12))
    throw std::logic_error("update_alpha: realized miscoverage outside [0, 1]: " +
                           std::to_string(realized_lambda));
  AlphaState next = alpha_state;
  next.alpha_t = alpha_state.alpha_t + alpha_state.gamma * (alpha_state.alpha_target - realized_lambda);
  if (!next.within_bounds())
    throw std::logic_error("update_alpha: alpha left [-gamma, 1 + gamma]: " + std::to_string(next.alpha_t));
  return next;
}

double optimal_alpha(const CalibrationWindow& window, const Vec2& center,
                     std::span<const Vec2> particle_positions,
                     std::span<const double> particle_weights, double alpha_target, double c_star) {
  if (window.empty()) throw std::logic_error("optimal_alpha: empty calibration window");
  auto lambda_at = [&](double radius) {
    return realized_miscoverage(PredictionSet{center, radius, 0.0, window.horizon()}, particle_positions,
                                particle_weights);
  };

  std::vector<double> atoms;
  for (const auto& e : window.entries()) atoms.insert(atoms.end(), e.scores.begin(), e.scores.end());
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());

  // beta in [1 - F(s_i), 1 - F(s_{i-1})) maps to radius s_i; Lambda grows with beta.
  if (lambda_at(c_star) > alpha_target) return 0.0;
  double sup = 0.0;
  for (std::size_t i = atoms.size(); i-- > 0;) {
    if (lambda_at(atoms[i]) > alpha_target) return sup;
    const double below = i > 0 ? window.cumulative_mass(atoms[i - 1]) : 0.0;
    sup = std::min(1.0, 1.0 - below);
  }
  return lambda_at(0.0) <= alpha_target ? 1.0 : sup;
}

}  // namespace acipf
