#pragma once

#include <Eigen/Core>

#include "acipf/random.hpp"
#include "acipf/types.hpp"

namespace acipf {

// Constant-velocity dynamics driven by Gaussian acceleration:
//   X_{t+1} = P X_t + Q a_t,  a_t ~ N(0, diag(sigma1_sq, sigma2_sq)).
struct MotionParams {
  double dt = 1.0;
  double sigma1_sq = 0.1;
  double sigma2_sq = 0.1;

  void validate() const;
};

struct TransitionMatrices {
  Eigen::Matrix4d P;
  Eigen::Matrix<double, 4, 2> Q;
  double dt = 1.0;
};

TransitionMatrices build_matrices(const MotionParams& params);

StateVector propagate(const StateVector& state, const Vec2& accel, const TransitionMatrices& mats);

Vec2 sample_acceleration(const MotionParams& params, RandomStream& rng);

// h noisy steps, each with a fresh acceleration draw from rng.
StateVector propagate_h(const StateVector& state, int h, const MotionParams& params,
                        RandomStream& rng);

// Bundles parameters with their matrices so hot loops don't rebuild P and Q.
class MotionModel {
 public:
  explicit MotionModel(const MotionParams& params);

  const MotionParams& params() const { return params_; }
  const TransitionMatrices& matrices() const { return mats_; }

  StateVector step(const StateVector& state, RandomStream& rng) const;
  StateVector mean_step(const StateVector& state) const;
  // Inverse of the noise-free step; used to back out a prior one step earlier.
  StateVector mean_step_back(const StateVector& state) const;

 private:
  MotionParams params_;
  TransitionMatrices mats_;
  double sigma1_;
  double sigma2_;
};

}  // namespace acipf
