#include "acipf/particle_filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "acipf/parallel.hpp"

namespace acipf {

const char* to_string(FilterKind kind) { return kind == FilterKind::kPF ? "pf" : "apf"; }

const char* to_string(ResamplingScheme scheme) {
  return scheme == ResamplingScheme::kMultinomial ? "multinomial" : "systematic";
}

std::vector<Vec2> ParticleSet::positions() const {
  std::vector<Vec2> out;
  out.reserve(particles.size());
  for (const auto& p : particles) out.push_back(position_of(p.state));
  return out;
}

std::vector<double> ParticleSet::weights() const {
  std::vector<double> out;
  out.reserve(particles.size());
  for (const auto& p : particles) out.push_back(p.weight);
  return out;
}

ParticleSet init(const PriorSpec& prior, std::size_t count, FilterKind kind, RandomStream& rng) {
  if (count == 0) throw std::invalid_argument("filter: particle count must be >= 1");
  if (!prior.mean.allFinite() || !prior.stddev.allFinite() || (prior.stddev.array() < 0.0).any())
    throw std::invalid_argument("filter: prior mean/stddev must be finite with stddev >= 0");
  ParticleSet set;
  set.kind = kind;
  set.time_index = 0;
  set.particles.resize(count);
  const double w = 1.0 / static_cast<double>(count);
  for (auto& p : set.particles) {
    for (int k = 0; k < 4; ++k) p.state(k) = prior.mean(k) + prior.stddev(k) * rng.normal();
    p.weight = w;
  }
  return set;
}

bool normalize_log_weights(std::vector<double>& log_weights) {
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  if (!(top > kLogZero)) {
    std::fill(log_weights.begin(), log_weights.end(), 1.0 / static_cast<double>(log_weights.size()));
    return false;
  }
  double sum = 0.0;
  for (auto& l : log_weights) {
    l = std::exp(l - top);
    sum += l;
  }
  for (auto& l : log_weights) l /= sum;
  return true;
}

double effective_sample_size(std::span<const double> weights) {
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  return 1.0 / sq;
}

double effective_sample_size(const ParticleSet& set) { return effective_sample_size(set.weights()); }

std::vector<std::size_t> resample_indices(std::span<const double> weights, std::size_t count,
                                          ResamplingScheme scheme, RandomStream& rng) {
  if (weights.empty()) throw std::invalid_argument("resample: empty weight vector");
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  const double total = cumulative.back();
  if (!(total > 0.0)) throw std::invalid_argument("resample: weights sum to zero");

  std::size_t last_positive = weights.size() - 1;
  while (last_positive > 0 && !(weights[last_positive] > 0.0)) --last_positive;

  auto locate = [&](double x) {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
    const auto idx = static_cast<std::size_t>(it - cumulative.begin());
    return std::min(idx, last_positive);
  };

  std::vector<std::size_t> out(count);
  if (scheme == ResamplingScheme::kMultinomial) {
    for (auto& i : out) i = locate(rng.uniform() * total);
  } else {
    const double step = total / static_cast<double>(count);
    const double start = rng.uniform() * step;
    for (std::size_t k = 0; k < count; ++k) out[k] = locate(start + static_cast<double>(k) * step);
  }
  return out;
}

namespace {

void require_kind(const ParticleSet& set, FilterKind kind, const char* op) {
  if (set.kind != kind) throw std::logic_error(std::string(op) + ": particle set has the wrong filter kind");
  if (set.particles.empty()) throw std::logic_error(std::string(op) + ": empty particle set");
}

void assign_weights(ParticleSet& set, const std::vector<double>& w) {
  for (std::size_t j = 0; j < w.size(); ++j) set.particles[j].weight = w[j];
}

}  // namespace

FilterStep pf_step(const ParticleSet& set, const Observation& obs, const SensorField& field,
                   const MotionModel& motion, const RandomStream& rng, const FilterOptions& options) {
  require_kind(set, FilterKind::kPF, "pf_step");
  const std::size_t m = set.size();
  const auto t = static_cast<std::uint64_t>(set.time_index + 1);
  const ObservationLikelihood likelihood(field, obs, options.likelihood_tolerance);

  FilterStep out;
  out.posterior.kind = FilterKind::kPF;
  out.posterior.time_index = set.time_index + 1;
  out.posterior.particles.resize(m);
  std::vector<double> logw(m);

  parallel_for(m, options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      auto stream = rng.derive({kPropagateTag, t, j});
      const auto& src = set.particles[j];
      auto& dst = out.posterior.particles[j];
      dst.state = motion.step(src.state, stream);
      const double prior = src.weight > 0.0 ? std::log(src.weight) : kLogZero;
      logw[j] = prior + likelihood(position_of(dst.state));
    }
  });

  out.diagnostics.degenerate = !normalize_log_weights(logw);
  assign_weights(out.posterior, logw);
  out.diagnostics.ess = effective_sample_size(logw);

  const bool resample = options.resample_every_step ||
                        out.diagnostics.ess < options.ess_fraction * static_cast<double>(m);
  if (!resample) {
    out.carried = out.posterior;
    return out;
  }
  out.diagnostics.resampled = true;
  auto stream = rng.derive({kResampleTag, t});
  const auto picks = resample_indices(logw, m, options.resampling, stream);
  out.carried.kind = FilterKind::kPF;
  out.carried.time_index = out.posterior.time_index;
  out.carried.particles.resize(m);
  const double uniform = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j)
    out.carried.particles[j] = {out.posterior.particles[picks[j]].state, uniform};
  return out;
}

FilterStep apf_step(const ParticleSet& set, const Observation& obs, const SensorField& field,
                    const MotionModel& motion, const RandomStream& rng, const FilterOptions& options) {
  require_kind(set, FilterKind::kAPF, "apf_step");
  const std::size_t m = set.size();
  const auto t = static_cast<std::uint64_t>(set.time_index + 1);
  const ObservationLikelihood likelihood(field, obs, options.likelihood_tolerance);

  // First stage: look-ahead likelihood at the conditional mean P X_{t-1}.
  std::vector<StateVector> means(m);
  std::vector<double> mean_loglik(m);
  std::vector<double> first(m);
  parallel_for(m, options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const auto& src = set.particles[j];
      means[j] = motion.mean_step(src.state);
      mean_loglik[j] = likelihood(position_of(means[j]));
      const double prior = src.weight > 0.0 ? std::log(src.weight) : kLogZero;
      first[j] = prior + mean_loglik[j];
    }
  });

  FilterStep out;
  const bool first_ok = normalize_log_weights(first);

  auto ancestor_stream = rng.derive({kAncestorTag, t});
  const auto ancestors = resample_indices(first, m, options.resampling, ancestor_stream);

  out.posterior.kind = FilterKind::kAPF;
  out.posterior.time_index = set.time_index + 1;
  out.posterior.particles.resize(m);
  std::vector<double> second(m);
  std::vector<std::uint8_t> clipped(m, 0);
  parallel_for(m, options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      auto stream = rng.derive({kPropagateTag, t, j});
      const auto k = ancestors[j];
      auto& dst = out.posterior.particles[j];
      dst.state = motion.step(set.particles[k].state, stream);
      const double num = likelihood(position_of(dst.state));
      const double den = mean_loglik[k];
      if (num == kLogZero) {
        second[j] = kLogZero;
      } else if (den == kLogZero) {
        second[j] = options.apf_max_log_ratio;
        clipped[j] = 1;
      } else {
        second[j] = num - den;
      }
    }
  });
  out.diagnostics.clipped_ratios =
      static_cast<std::size_t>(std::count(clipped.begin(), clipped.end(), std::uint8_t{1}));

  const bool second_ok = normalize_log_weights(second);
  out.diagnostics.degenerate = !first_ok || !second_ok;
  assign_weights(out.posterior, second);
  out.diagnostics.ess = effective_sample_size(second);
  out.carried = out.posterior;
  return out;
}

FilterStep filter_step(const ParticleSet& set, const Observation& obs, const SensorField& field,
                       const MotionModel& motion, const RandomStream& rng, const FilterOptions& options) {
  return set.kind == FilterKind::kPF ? pf_step(set, obs, field, motion, rng, options)
                                     : apf_step(set, obs, field, motion, rng, options);
}

Vec2 point_predict(const ParticleSet& set) {
  if (set.particles.empty()) throw std::logic_error("point_predict: empty particle set");
  Vec2 sum = Vec2::Zero();
  for (const auto& p : set.particles) sum += position_of(p.state);
  return sum / static_cast<double>(set.size());
}

std::vector<MultiStepCloud> predict_multistep(const ParticleSet& set, int max_horizon,
                                              const MotionModel& motion, const RandomStream& rng,
                                              unsigned threads) {
  if (max_horizon < 1) throw std::invalid_argument("predict_multistep: horizon must be >= 1");
  if (set.particles.empty()) throw std::logic_error("predict_multistep: empty particle set");
  const std::size_t m = set.size();
  const auto t = static_cast<std::uint64_t>(set.time_index + 1);

  std::vector<MultiStepCloud> clouds(static_cast<std::size_t>(max_horizon));
  for (int h = 1; h <= max_horizon; ++h) {
    auto& c = clouds[static_cast<std::size_t>(h - 1)];
    c.horizon = h;
    c.origin_time = set.time_index;
    c.positions.resize(m);
  }
  parallel_for(m, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      auto stream = rng.derive({kPropagateTag, t, j});
      StateVector x = set.particles[j].state;
      for (auto& c : clouds) {
        x = motion.step(x, stream);
        c.positions[j] = position_of(x);
      }
    }
  });
  for (auto& c : clouds) {
    Vec2 sum = Vec2::Zero();
    for (const auto& p : c.positions) sum += p;
    c.point_prediction = sum / static_cast<double>(m);
  }
  return clouds;
}

void write_particle_snapshot(const ParticleSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open particle snapshot for writing: " + path.string());
  out.precision(17);
  for (const auto& p : set.particles)
    out << p.state(0) << ' ' << p.state(1) << ' ' << p.state(2) << ' ' << p.state(3) << ' '
        << p.weight << '\n';
  if (!out) throw std::runtime_error("failed writing particle snapshot: " + path.string());
}

}  // namespace acipf
