#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "acipf/particle_filter.hpp"
#include "support.hpp"

using namespace acipf;

namespace {

MotionParams still_motion() {
  MotionParams mp;
  mp.sigma1_sq = mp.sigma2_sq = 0.0;
  return mp;
}

ParticleSet make_set(FilterKind kind, const std::vector<StateVector>& states, std::vector<double> weights = {}) {
  ParticleSet s;
  s.kind = kind;
  if (weights.empty()) weights.assign(states.size(), 1.0 / static_cast<double>(states.size()));
  for (std::size_t j = 0; j < states.size(); ++j) s.particles.push_back({states[j], weights[j]});
  return s;
}

double weight_sum(const ParticleSet& s) {
  double t = 0.0;
  for (const auto& p : s.particles) t += p.weight;
  return t;
}

// Plain-arithmetic likelihood of an observation, independent of the library.
double hand_likelihood(const std::vector<Vec2>& sensors, const std::vector<std::uint8_t>& bits, double x, double y,
                       const DetectionParams& p) {
  double prod = 1.0;
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const double dx = sensors[i].x() - x, dy = sensors[i].y() - y;
    const double d = std::sqrt(dx * dx + dy * dy);
    const double q = p.w * std::exp(-p.beta * d * d) + (d <= p.r0 ? (1 - p.w) * p.p0 : 0.0);
    prod *= bits[i] ? q : 1 - q;
  }
  return prod;
}

}  // namespace

TEST_CASE("init") {
  RandomStream rng(1);
  SUBCASE("uniform weights") {
    const auto s = init(PriorSpec{}, 4, FilterKind::kPF, rng);
    REQUIRE(s.size() == 4);
    for (const auto& p : s.particles) CHECK(p.weight == 0.25);
  }
  SUBCASE("point mass prior") {
    PriorSpec prior;
    prior.mean = StateVector(0, 0, 1, 1);
    const auto s = init(prior, 10, FilterKind::kAPF, rng);
    for (const auto& p : s.particles) CHECK(p.state == prior.mean);
    CHECK(s.kind == FilterKind::kAPF);
  }
  SUBCASE("gaussian prior mean") {
    PriorSpec prior;
    prior.mean = StateVector(5, -3, 1, 2);
    prior.stddev = StateVector(10, 10, 1, 1);
    const std::size_t m = 100000;
    const auto s = init(prior, m, FilterKind::kPF, rng);
    StateVector mean = StateVector::Zero();
    for (const auto& p : s.particles) mean += p.state;
    mean /= static_cast<double>(m);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(mean(k) - prior.mean(k)) <= 3.0 * prior.stddev(k) / std::sqrt(m));
  }
  SUBCASE("rejects M = 0") { CHECK_THROWS_AS(init(PriorSpec{}, 0, FilterKind::kPF, rng), std::invalid_argument); }
}

TEST_CASE("effective_sample_size") {
  CHECK(effective_sample_size(std::vector<double>(100, 0.01)) == doctest::Approx(100.0));
  CHECK(effective_sample_size(std::vector<double>{1, 0, 0, 0}) == 1.0);
  CHECK(effective_sample_size(std::vector<double>{0.5, 0.5, 0, 0}) == 2.0);
}

TEST_CASE("normalize_log_weights") {
  std::vector<double> lw = {-1000.0, -1001.0, kLogZero};
  CHECK(normalize_log_weights(lw));
  CHECK(lw[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(lw[1] == doctest::Approx(std::exp(-1.0) / (1.0 + std::exp(-1.0))));
  CHECK(lw[2] == 0.0);

  std::vector<double> dead(5, kLogZero);
  CHECK_FALSE(normalize_log_weights(dead));
  for (double w : dead) CHECK(w == 0.2);
}

TEST_CASE("resample_indices frequencies") {
  const std::vector<double> w = {0.5, 0.2, 0.1, 0.1, 0.1};
  for (auto scheme : {ResamplingScheme::kMultinomial, ResamplingScheme::kSystematic}) {
    CAPTURE(to_string(scheme));
    RandomStream rng(12, "resample");
    std::vector<double> counts(w.size(), 0.0);
    const int trials = 100000;
    for (int i = 0; i < trials; ++i) counts[resample_indices(w, 1, scheme, rng)[0]] += 1.0;
    for (std::size_t k = 0; k < w.size(); ++k) CHECK(std::abs(counts[k] / trials - w[k]) <= 0.01);
  }
}

TEST_CASE("property: multinomial resampling passes a chi-square test") {
  test::Gen gen(13);
  // 0.999 quantiles of chi-square with 1..9 degrees of freedom.
  const double crit[] = {0, 10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877};
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t m = static_cast<std::size_t>(gen.integer(2, 10));
    const auto w = gen.simplex(m);
    RandomStream rng(gen.u64());
    const auto picks = resample_indices(w, 100000, ResamplingScheme::kMultinomial, rng);
    std::vector<double> counts(m, 0.0);
    for (auto i : picks) counts[i] += 1.0;
    double chi2 = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double e = w[k] * 100000.0;
      chi2 += (counts[k] - e) * (counts[k] - e) / e;
    }
    CHECK(chi2 < crit[m - 1]);
  }
}

TEST_CASE("resample_indices never picks zero-weight particles") {
  test::Gen gen(14);
  for (int trial = 0; trial < 100; ++trial) {
    const auto w = gen.simplex(static_cast<std::size_t>(gen.integer(1, 20)), 0.5);
    RandomStream rng(gen.u64());
    for (auto scheme : {ResamplingScheme::kMultinomial, ResamplingScheme::kSystematic})
      for (auto i : resample_indices(w, 200, scheme, rng)) CHECK(w[i] > 0.0);
  }
  const std::vector<double> one_hot = {1.0, 0.0};
  RandomStream rng(15);
  for (auto i : resample_indices(one_hot, 50, ResamplingScheme::kMultinomial, rng)) CHECK(i == 0);
}

TEST_CASE("pf_step") {
  const MotionModel motion(still_motion());
  const SensorField field({Vec2(0, 0), Vec2(100, 100)}, DetectionParams{});
  const RandomStream root(21, "filter");

  SUBCASE("identical likelihoods keep propagated states with uniform weights") {
    // Mirror-image particles around the diagonal see identical likelihoods
    // for this symmetric layout.
    const auto set = make_set(FilterKind::kPF, {StateVector(10, 20, 1, 1), StateVector(20, 10, 1, 1)});
    const auto step = pf_step(set, Observation{{1, 0}, 1}, field, motion, root);
    CHECK(step.posterior.particles[0].weight == doctest::Approx(0.5));
    CHECK(step.carried.time_index == 1);
    for (const auto& p : step.carried.particles) {
      CHECK(p.weight == 0.5);
      const bool known = p.state == StateVector(11, 21, 1, 1) || p.state == StateVector(21, 11, 1, 1);
      CHECK(known);
    }
  }
  SUBCASE("one dominant particle is copied everywhere") {
    DetectionParams sharp;
    sharp.w = 0.0;
    sharp.r0 = 10.0;
    const SensorField near_field({Vec2(0, 0)}, sharp);
    const auto set = make_set(FilterKind::kPF, {StateVector(0, 0, 0, 0), StateVector(500, 500, 0, 0)});
    const auto step = pf_step(set, Observation{{1}, 1}, near_field, motion, root);
    CHECK(step.posterior.particles[0].weight == 1.0);
    CHECK(step.posterior.particles[1].weight == 0.0);
    for (const auto& p : step.carried.particles) CHECK(p.state == StateVector(0, 0, 0, 0));
  }
  SUBCASE("all-zero likelihood is flagged and falls back to uniform") {
    DetectionParams sharp;
    sharp.w = 0.0;
    sharp.r0 = 10.0;
    const SensorField near_field({Vec2(0, 0)}, sharp);
    const auto set = make_set(FilterKind::kPF, {StateVector(300, 0, 0, 0), StateVector(500, 500, 0, 0)});
    const auto step = pf_step(set, Observation{{1}, 1}, near_field, motion, root);
    CHECK(step.diagnostics.degenerate);
    for (const auto& p : step.posterior.particles) CHECK(p.weight == 0.5);
  }
  SUBCASE("wrong kind is rejected") {
    const auto set = make_set(FilterKind::kAPF, {StateVector::Zero()});
    CHECK_THROWS_AS(pf_step(set, Observation{{0, 0}, 1}, field, motion, root), std::logic_error);
  }
}

TEST_CASE("property: weights are normalized after every update") {
  test::Gen gen(22);
  RandomStream deploy_rng(22);
  const auto field = deploy(MapRect{0, 600, 0, 600}, DetectionParams{}, deploy_rng);
  const MotionModel motion(MotionParams{});
  for (int trial = 0; trial < 10; ++trial) {
    const auto kind = gen.coin() ? FilterKind::kPF : FilterKind::kAPF;
    PriorSpec prior;
    prior.mean = StateVector(gen.real(100, 500), gen.real(100, 500), gen.real(-1, 1), gen.real(-1, 1));
    prior.stddev = StateVector(20, 20, 1, 1);
    RandomStream rng(gen.u64());
    auto set = init(prior, static_cast<std::size_t>(gen.integer(1, 300)), kind, rng);
    const Vec2 target(prior.mean(0), prior.mean(1));
    for (int t = 0; t < 5; ++t) {
      const auto obs = observe(field, target, rng, t + 1);
      const auto step = filter_step(set, obs, field, motion, rng);
      CHECK(std::abs(weight_sum(step.posterior) - 1.0) < 1e-9);
      CHECK(std::abs(weight_sum(step.carried) - 1.0) < 1e-9);
      CHECK(step.diagnostics.ess >= 1.0 - 1e-9);
      CHECK(step.diagnostics.ess <= static_cast<double>(set.size()) + 1e-9);
      set = step.carried;
    }
  }
}

TEST_CASE("apf_step") {
  const DetectionParams params;
  const std::vector<Vec2> sensors = {Vec2(0, 0), Vec2(60, 0), Vec2(0, 60)};
  const SensorField field(sensors, params);
  const Observation obs{{1, 1, 0}, 1};
  const RandomStream root(31, "apf");

  SUBCASE("zero process noise gives uniform second-stage weights") {
    const MotionModel motion(still_motion());
    const auto set = make_set(FilterKind::kAPF,
                              {StateVector(0, 0, 1, 0), StateVector(30, 5, 0, 1), StateVector(10, 40, 1, 1),
                               StateVector(-20, 10, 0, 0)},
                              {0.1, 0.2, 0.3, 0.4});
    const auto step = apf_step(set, obs, field, motion, root);
    for (const auto& p : step.posterior.particles) CHECK(std::abs(p.weight - 0.25) <= 1e-12);
    CHECK(step.carried.particles.size() == 4);
  }

  SUBCASE("three-particle hand computation") {
    MotionParams mp;
    mp.sigma1_sq = 4.0;
    mp.sigma2_sq = 9.0;
    const MotionModel motion(mp);
    const std::vector<StateVector> states = {StateVector(5, 5, 1, 0), StateVector(40, 10, -1, 2),
                                             StateVector(-30, 50, 2, -1)};
    const std::vector<double> prev = {0.2, 0.5, 0.3};
    const auto set = make_set(FilterKind::kAPF, states, prev);

    // First stage: w_bar_k ∝ L(P X_k) w_k, with P X written out by hand.
    std::vector<double> mu_lik(3), wbar(3);
    for (int k = 0; k < 3; ++k) {
      const double mx = states[k](0) + states[k](2), my = states[k](1) + states[k](3);
      mu_lik[k] = hand_likelihood(sensors, obs.bits, mx, my, params);
      wbar[k] = mu_lik[k] * prev[k];
    }
    const double wsum = wbar[0] + wbar[1] + wbar[2];
    for (auto& v : wbar) v /= wsum;

    // Same ancestor stream as the filter, fed the hand first-stage weights.
    auto anc_rng = root.derive({kAncestorTag, 1});
    const auto ancestors = resample_indices(wbar, 3, ResamplingScheme::kMultinomial, anc_rng);

    const auto step = apf_step(set, obs, field, motion, root);

    std::vector<double> ratio(3);
    for (std::size_t j = 0; j < 3; ++j) {
      auto stream = root.derive({kPropagateTag, 1, j});
      const double a1 = std::sqrt(4.0) * stream.normal();
      const double a2 = std::sqrt(9.0) * stream.normal();
      const auto& xk = states[ancestors[j]];
      const double x = xk(0) + xk(2) + 0.5 * a1, y = xk(1) + xk(3) + 0.5 * a2;
      CHECK(step.posterior.particles[j].state(0) == doctest::Approx(x).epsilon(1e-13));
      CHECK(step.posterior.particles[j].state(1) == doctest::Approx(y).epsilon(1e-13));
      ratio[j] = hand_likelihood(sensors, obs.bits, x, y, params) / mu_lik[ancestors[j]];
    }
    const double rsum = ratio[0] + ratio[1] + ratio[2];
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(std::abs(step.posterior.particles[j].weight - ratio[j] / rsum) <= 1e-12);
  }

  SUBCASE("first-stage ancestor frequencies follow the hand weights") {
    const MotionModel motion(still_motion());
    const std::vector<StateVector> states = {StateVector(5, 5, 1, 0), StateVector(40, 10, -1, 2),
                                             StateVector(-30, 50, 2, -1)};
    const std::vector<double> prev = {0.2, 0.5, 0.3};
    std::vector<double> wbar(3);
    for (int k = 0; k < 3; ++k)
      wbar[k] = prev[k] * hand_likelihood(sensors, obs.bits, states[k](0) + states[k](2),
                                          states[k](1) + states[k](3), params);
    const double s = wbar[0] + wbar[1] + wbar[2];
    std::vector<double> freq(3, 0.0);
    const int reps = 20000;
    for (int r = 0; r < reps; ++r) {
      const auto set = make_set(FilterKind::kAPF, states, prev);
      const auto step = apf_step(set, obs, field, motion, RandomStream(static_cast<std::uint64_t>(r), "anc"));
      for (const auto& p : step.posterior.particles)
        for (int k = 0; k < 3; ++k)
          if (p.state == motion.mean_step(states[k])) freq[k] += 1.0;
    }
    for (int k = 0; k < 3; ++k) CHECK(std::abs(freq[k] / (3.0 * reps) - wbar[k] / s) <= 0.01);
  }

  SUBCASE("uniform weights and identical look-ahead likelihoods give uniform ancestors") {
    const MotionModel motion(still_motion());
    const SensorField lone({Vec2(1e6, 1e6)}, params);
    const std::vector<StateVector> states = {StateVector(0, 0, 0, 0), StateVector(10, 0, 0, 0),
                                             StateVector(0, 10, 0, 0), StateVector(10, 10, 0, 0)};
    std::vector<double> freq(4, 0.0);
    const int reps = 20000;
    for (int r = 0; r < reps; ++r) {
      const auto step = apf_step(make_set(FilterKind::kAPF, states), Observation{{0}, 1}, lone, motion,
                                 RandomStream(static_cast<std::uint64_t>(r), "uniform"));
      for (const auto& p : step.posterior.particles)
        for (int k = 0; k < 4; ++k)
          if (p.state == states[k]) freq[k] += 1.0;
    }
    for (int k = 0; k < 4; ++k) CHECK(std::abs(freq[k] / (4.0 * reps) - 0.25) <= 0.01);
  }

  SUBCASE("zero look-ahead likelihood with a live offspring is clipped") {
    DetectionParams sharp;
    sharp.w = 0.0;
    sharp.r0 = 5.0;
    const SensorField near_field({Vec2(0, 0)}, sharp);
    MotionParams mp;
    mp.sigma1_sq = mp.sigma2_sq = 400.0;
    const MotionModel motion(mp);
    // Every look-ahead mean is out of range, so the first stage is degenerate
    // (uniform); some offspring still land inside r0.
    std::vector<StateVector> states(200, StateVector(8, 0, 0, 0));
    const auto step = apf_step(make_set(FilterKind::kAPF, states), Observation{{1}, 1}, near_field, motion, root);
    CHECK(step.diagnostics.degenerate);
    CHECK(step.diagnostics.clipped_ratios > 0);
    CHECK(std::abs(weight_sum(step.posterior) - 1.0) < 1e-9);
  }
}

TEST_CASE("point_predict") {
  CHECK(point_predict(make_set(FilterKind::kPF, {StateVector(3, 4, 0, 0), StateVector(3, 4, 9, 9)})) == Vec2(3, 4));
  CHECK(point_predict(make_set(FilterKind::kPF, {StateVector(0, 0, 0, 0), StateVector(2, 2, 0, 0)})) == Vec2(1, 1));

  test::Gen gen(41);
  std::vector<StateVector> states;
  for (int i = 0; i < 1000; ++i) states.emplace_back(gen.real(-500, 500), gen.real(-500, 500), 0, 0);
  long double sx = 0, sy = 0;
  for (const auto& s : states) {
    sx += s(0);
    sy += s(1);
  }
  const auto got = point_predict(make_set(FilterKind::kPF, states));
  CHECK(test::rel_close(got.x(), static_cast<double>(sx / 1000), 1e-12));
  CHECK(test::rel_close(got.y(), static_cast<double>(sy / 1000), 1e-12));

  std::shuffle(states.begin(), states.end(), gen.engine());
  const auto shuffled = point_predict(make_set(FilterKind::kPF, states));
  CHECK(test::rel_close(shuffled.x(), got.x(), 1e-12));
  CHECK(test::rel_close(shuffled.y(), got.y(), 1e-12));
}

TEST_CASE("predict_multistep") {
  const RandomStream root(51, "multi");
  SUBCASE("zero noise") {
    const MotionModel motion(still_motion());
    const auto clouds = predict_multistep(make_set(FilterKind::kPF, std::vector<StateVector>(5, StateVector(0, 0, 1, 1))),
                                          3, motion, root);
    REQUIRE(clouds.size() == 3);
    for (int h = 1; h <= 3; ++h) {
      CHECK(clouds[h - 1].horizon == h);
      CHECK(clouds[h - 1].point_prediction == Vec2(h, h));
    }
  }
  SUBCASE("rejects H < 1") {
    const MotionModel motion(still_motion());
    CHECK_THROWS_AS(predict_multistep(make_set(FilterKind::kPF, {StateVector::Zero()}), 0, motion, root),
                    std::invalid_argument);
  }
  SUBCASE("h = 1 cloud is the next PF propagation") {
    const MotionModel motion(MotionParams{});
    RandomStream rng(52);
    PriorSpec prior;
    prior.stddev = StateVector(5, 5, 1, 1);
    auto set = init(prior, 64, FilterKind::kPF, rng);
    set.time_index = 7;
    const auto clouds = predict_multistep(set, 4, motion, root);
    const SensorField field({Vec2(0, 0)}, DetectionParams{});
    const auto step = pf_step(set, Observation{{1}, 8}, field, motion, root);
    for (std::size_t j = 0; j < set.size(); ++j)
      CHECK(clouds[0].positions[j] == position_of(step.posterior.particles[j].state));
    CHECK(clouds[0].point_prediction == point_predict(step.posterior));
  }
  SUBCASE("mean displacement per step matches mean velocity") {
    const MotionModel motion(MotionParams{});
    auto set = make_set(FilterKind::kPF, std::vector<StateVector>(20000, StateVector(0, 0, 1.5, -0.5)));
    const auto clouds = predict_multistep(set, 10, motion, root);
    Vec2 prev(0, 0);
    for (const auto& c : clouds) {
      const Vec2 step = c.point_prediction - prev;
      // Position variance after h steps grows like h^3 sigma^2 / 3; the per-step
      // increment mean has sd well under 0.05 at this M.
      CHECK(std::abs(step.x() - 1.5) <= 0.05);
      CHECK(std::abs(step.y() + 0.5) <= 0.05);
      prev = c.point_prediction;
    }
  }
  SUBCASE("successive clouds extend each other") {
    const MotionModel motion(MotionParams{});
    const auto set = make_set(FilterKind::kPF, std::vector<StateVector>(10, StateVector(0, 0, 1, 1)));
    const auto c3 = predict_multistep(set, 3, motion, root);
    const auto c5 = predict_multistep(set, 5, motion, root);
    for (int h = 0; h < 3; ++h) CHECK(c3[h].positions == c5[h].positions);
  }
}

TEST_CASE("filter output does not depend on thread count") {
  RandomStream deploy_rng(61);
  const auto field = deploy(MapRect{0, 500, 0, 500}, DetectionParams{}, deploy_rng);
  const MotionModel motion(MotionParams{});
  for (auto kind : {FilterKind::kPF, FilterKind::kAPF}) {
    PriorSpec prior;
    prior.mean = StateVector(250, 250, 1, 1);
    prior.stddev = StateVector(10, 10, 1, 1);
    RandomStream rng(62);
    const auto set = init(prior, 500, kind, rng);
    const auto obs = observe(field, Vec2(251, 251), rng, 1);
    FilterOptions one, four;
    four.threads = 4;
    const RandomStream root(63);
    const auto a = filter_step(set, obs, field, motion, root, one);
    const auto b = filter_step(set, obs, field, motion, root, four);
    for (std::size_t j = 0; j < set.size(); ++j) {
      CHECK(a.posterior.particles[j].state == b.posterior.particles[j].state);
      CHECK(a.posterior.particles[j].weight == b.posterior.particles[j].weight);
      CHECK(a.carried.particles[j].state == b.carried.particles[j].state);
    }
    const auto ca = predict_multistep(set, 3, motion, root, 1);
    const auto cb = predict_multistep(set, 3, motion, root, 4);
    for (int h = 0; h < 3; ++h) CHECK(ca[h].positions == cb[h].positions);
  }
}

TEST_CASE("particle snapshot rows") {
  const auto set = make_set(FilterKind::kPF, {StateVector(1, 2, 3, 4), StateVector(5, 6, 7, 8)}, {0.25, 0.75});
  const auto path = std::filesystem::temp_directory_path() / "acipf_snapshot_test.txt";
  write_particle_snapshot(set, path);
  std::ifstream in(path);
  double v[5];
  for (const auto& p : set.particles) {
    for (double& x : v) in >> x;
    for (int k = 0; k < 4; ++k) CHECK(v[k] == p.state(k));
    CHECK(v[4] == p.weight);
  }
  std::filesystem::remove(path);
}
