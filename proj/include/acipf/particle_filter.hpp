#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "acipf/motion_model.hpp"
#include "acipf/random.hpp"
#include "acipf/sensor_network.hpp"
#include "acipf/types.hpp"

namespace acipf {

enum class FilterKind { kPF, kAPF };
enum class ResamplingScheme { kMultinomial, kSystematic };

const char* to_string(FilterKind kind);
const char* to_string(ResamplingScheme scheme);

struct Particle {
  StateVector state;
  double weight = 0.0;
};

struct ParticleSet {
  std::vector<Particle> particles;
  std::int64_t time_index = 0;
  FilterKind kind = FilterKind::kPF;

  std::size_t size() const { return particles.size(); }
  std::vector<Vec2> positions() const;
  std::vector<double> weights() const;
};

// Independent Gaussian per state component; a zero stddev gives a point mass.
struct PriorSpec {
  StateVector mean = StateVector::Zero();
  StateVector stddev = StateVector::Zero();
};

struct FilterOptions {
  ResamplingScheme resampling = ResamplingScheme::kMultinomial;
  // When false, PF resamples only if ESS < ess_fraction * M.
  bool resample_every_step = true;
  double ess_fraction = 0.5;
  // log of the ratio bound applied when an APF ancestor's look-ahead
  // likelihood is zero but its offspring's is not.
  double apf_max_log_ratio = 30.0;
  double likelihood_tolerance = 1e-20;
  unsigned threads = 1;
};

struct StepDiagnostics {
  double ess = 0.0;
  bool degenerate = false;
  std::size_t clipped_ratios = 0;
  bool resampled = false;
};

struct FilterStep {
  // Propagated particles with normalized weights, before any resampling reset.
  ParticleSet posterior;
  // The set the next step starts from (resampled for PF, equal to posterior for APF).
  ParticleSet carried;
  StepDiagnostics diagnostics;
};

struct MultiStepCloud {
  int horizon = 1;
  std::vector<Vec2> positions;
  Vec2 point_prediction = Vec2::Zero();
  std::int64_t origin_time = 0;
};

ParticleSet init(const PriorSpec& prior, std::size_t count, FilterKind kind, RandomStream& rng);

// `rng` is a root stream: particle j at time t draws its acceleration from
// rng.derive({kPropagateTag, t, j}), so results do not depend on thread count.
FilterStep pf_step(const ParticleSet& set, const Observation& obs, const SensorField& field,
                   const MotionModel& motion, const RandomStream& rng,
                   const FilterOptions& options = {});

FilterStep apf_step(const ParticleSet& set, const Observation& obs, const SensorField& field,
                    const MotionModel& motion, const RandomStream& rng,
                    const FilterOptions& options = {});

FilterStep filter_step(const ParticleSet& set, const Observation& obs, const SensorField& field,
                       const MotionModel& motion, const RandomStream& rng,
                       const FilterOptions& options = {});

// Unweighted mean of particle positions.
Vec2 point_predict(const ParticleSet& set);

// Clouds for h = 1..max_horizon, each extending the previous one by a step.
// The first step of particle j reuses the stream the next filter step uses
// for particle j, so for PF the h = 1 cloud is exactly the next propagation.
std::vector<MultiStepCloud> predict_multistep(const ParticleSet& set, int max_horizon,
                                              const MotionModel& motion, const RandomStream& rng,
                                              unsigned threads = 1);

double effective_sample_size(const ParticleSet& set);
double effective_sample_size(std::span<const double> weights);

std::vector<std::size_t> resample_indices(std::span<const double> weights, std::size_t count,
                                          ResamplingScheme scheme, RandomStream& rng);

// Turns log-weights into normalized weights in place via max-shift.
// Returns false (and writes uniform weights) when every entry is log-zero.
bool normalize_log_weights(std::vector<double>& log_weights);

// One `x1 x2 v1 v2 w` row per particle.
void write_particle_snapshot(const ParticleSet& set, const std::filesystem::path& path);

inline constexpr std::uint64_t kPropagateTag = 1;
inline constexpr std::uint64_t kResampleTag = 2;
inline constexpr std::uint64_t kAncestorTag = 3;

}  // namespace acipf
