#include "acipf/motion_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace acipf {

void MotionParams::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("motion: dt must be positive, got " + std::to_string(dt));
  if (!(sigma1_sq >= 0.0) || !(sigma2_sq >= 0.0) || !std::isfinite(sigma1_sq) ||
      !std::isfinite(sigma2_sq))
    throw std::invalid_argument("motion: acceleration variances must be finite and >= 0");
}

TransitionMatrices build_matrices(const MotionParams& params) {
  params.validate();
  const double dt = params.dt;
  TransitionMatrices m;
  m.dt = dt;
  m.P.setIdentity();
  m.P(0, 2) = dt;
  m.P(1, 3) = dt;
  m.Q.setZero();
  m.Q(0, 0) = dt * dt / 2.0;
  m.Q(1, 1) = dt * dt / 2.0;
  m.Q(2, 0) = dt;
  m.Q(3, 1) = dt;
  return m;
}

// Written out rather than as P*x + Q*a: the sparsity is fixed and this sits in
// the innermost filter loop.
StateVector propagate(const StateVector& state, const Vec2& accel, const TransitionMatrices& mats) {
  const double dt = mats.dt;
  const double half = dt * dt / 2.0;
  StateVector out;
  out(0) = state(0) + dt * state(2) + half * accel(0);
  out(1) = state(1) + dt * state(3) + half * accel(1);
  out(2) = state(2) + dt * accel(0);
  out(3) = state(3) + dt * accel(1);
  return out;
}

Vec2 sample_acceleration(const MotionParams& params, RandomStream& rng) {
  const double a1 = rng.normal();
  const double a2 = rng.normal();
  return Vec2(std::sqrt(params.sigma1_sq) * a1, std::sqrt(params.sigma2_sq) * a2);
}

StateVector propagate_h(const StateVector& state, int h, const MotionParams& params,
                        RandomStream& rng) {
  if (h < 1) throw std::invalid_argument("propagate_h: horizon must be >= 1");
  const auto mats = build_matrices(params);
  StateVector x = state;
  for (int k = 0; k < h; ++k) x = propagate(x, sample_acceleration(params, rng), mats);
  return x;
}

MotionModel::MotionModel(const MotionParams& params)
    : params_(params),
      mats_(build_matrices(params)),
      sigma1_(std::sqrt(params.sigma1_sq)),
      sigma2_(std::sqrt(params.sigma2_sq)) {}

StateVector MotionModel::step(const StateVector& state, RandomStream& rng) const {
  const double a1 = rng.normal();
  const double a2 = rng.normal();
  return propagate(state, Vec2(sigma1_ * a1, sigma2_ * a2), mats_);
}

StateVector MotionModel::mean_step(const StateVector& state) const {
  return propagate(state, Vec2::Zero(), mats_);
}

StateVector MotionModel::mean_step_back(const StateVector& state) const {
  StateVector out = state;
  out(0) -= mats_.dt * state(2);
  out(1) -= mats_.dt * state(3);
  return out;
}

}  // namespace acipf
