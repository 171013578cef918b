#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <vector>

#include "acipf/sensor_network.hpp"
#include "support.hpp"

using namespace acipf;

namespace {

DetectionParams paper_detection() { return DetectionParams{}; }

// Detection probability written straight from the formula, no shared helpers.
double oracle_prob(double d, const DetectionParams& p) {
  const double indicator = d <= p.r0 ? 1.0 : 0.0;
  return p.w * std::exp(-p.beta * d * d) + (1.0 - p.w) * p.p0 * indicator;
}

double oracle_likelihood(const std::vector<Vec2>& sensors, const std::vector<std::uint8_t>& bits, const Vec2& x,
                         const DetectionParams& p) {
  double prod = 1.0;
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const double d = std::sqrt((sensors[i].x() - x.x()) * (sensors[i].x() - x.x()) +
                               (sensors[i].y() - x.y()) * (sensors[i].y() - x.y()));
    const double q = oracle_prob(d, p);
    prod *= bits[i] ? q : 1.0 - q;
  }
  return prod;
}

std::vector<Vec2> random_sensors(test::Gen& gen, std::size_t n, double lo, double hi) {
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(gen.real(lo, hi), gen.real(lo, hi));
  return out;
}

}  // namespace

TEST_CASE("detection_prob at reference distances") {
  const auto p = paper_detection();
  CHECK(detection_prob(Vec2(0, 0), Vec2(0, 0), p) == doctest::Approx(1.0));
  CHECK(detection_prob(Vec2(0, 0), Vec2(50, 0), p) == doctest::Approx(0.5 * std::exp(-2.5) + 0.5).epsilon(1e-14));
  CHECK(detection_prob(Vec2(0, 0), Vec2(30, 40), p) == doctest::Approx(0.54104).epsilon(1e-5));
  CHECK(detection_prob(Vec2(0, 0), Vec2(50.0001, 0), p) < 0.05);
}

TEST_CASE("property: detection_prob is monotone with one drop at r0") {
  test::Gen gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    DetectionParams p;
    p.beta = gen.real(1e-4, 1e-2);
    p.r0 = gen.real(1, 100);
    p.p0 = gen.real(0, 1);
    p.w = gen.real(0, 1);
    double prev = detection_prob(Vec2(0, 0), Vec2(0, 0), p);
    for (double d = 0.25; d < 3 * p.r0; d += 0.25) {
      const double cur = detection_prob(Vec2(0, 0), Vec2(d, 0), p);
      const bool crossed = d - 0.25 <= p.r0 && d > p.r0;
      if (crossed) {
        const double jump = (1.0 - p.w) * p.p0;
        CHECK(prev - cur >= jump - 1e-12);
      } else {
        CHECK(cur <= prev + 1e-15);
      }
      CHECK(cur == doctest::Approx(oracle_prob(d, p)).epsilon(1e-13));
      prev = cur;
    }
  }
}

TEST_CASE("parameter validation") {
  DetectionParams p;
  p.beta = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.p0 = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.w = -0.1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.density = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  MapRect m{0, 0, 0, 1};
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  CHECK(MapRect{0, 3, 0, 4}.area() == 12.0);
  CHECK(MapRect{0, 3, 0, 4}.diagonal() == doctest::Approx(5.0));
}

TEST_CASE("deploy") {
  SUBCASE("count is floor(density * area)") {
    DetectionParams p;
    p.density = 0.001;
    RandomStream rng(1);
    const auto field = deploy(MapRect{0, 1234.5, -10, 990}, p, rng);
    CHECK(field.size() == static_cast<std::size_t>(std::floor(0.001 * 1234.5 * 1000)));
  }
  SUBCASE("too sparse a map is rejected") {
    RandomStream rng(1);
    CHECK_THROWS_AS(deploy(MapRect{0, 10, 0, 10}, paper_detection(), rng), std::invalid_argument);
  }
  SUBCASE("uniform placement") {
    DetectionParams p;
    p.density = 1e5;
    RandomStream rng(2, "uniform");
    const MapRect unit{0, 1, 0, 1};
    const auto field = deploy(unit, p, rng);
    REQUIRE(field.size() == 100000);
    double sx = 0, sy = 0;
    for (const auto& s : field.positions()) {
      CHECK_FALSE(!unit.contains(s));
      sx += s.x();
      sy += s.y();
    }
    CHECK(std::abs(sx / 1e5 - 0.5) <= 0.01);
    CHECK(std::abs(sy / 1e5 - 0.5) <= 0.01);
  }
}

TEST_CASE("observe") {
  SUBCASE("empirical detection frequency at d = 50") {
    const SensorField field({Vec2(0, 0)}, paper_detection());
    RandomStream rng(3, "freq");
    int hits = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) hits += observe(field, Vec2(50, 0), rng).bits[0];
    CHECK(std::abs(static_cast<double>(hits) / n - detection_prob(Vec2(0, 0), Vec2(50, 0), field.params())) <= 0.01);
  }
  SUBCASE("schema") {
    test::Gen gen(4);
    const SensorField field(random_sensors(gen, 37, 0, 300), paper_detection());
    RandomStream rng(4);
    const auto obs = observe(field, Vec2(150, 150), rng, 12);
    CHECK(obs.bits.size() == 37);
    CHECK(obs.time_index == 12);
    for (auto b : obs.bits) CHECK(b <= 1);
  }
}

TEST_CASE("log_likelihood matches a product of Bernoulli pmfs") {
  const auto p = paper_detection();
  const std::vector<Vec2> sensors = {Vec2(0, 0), Vec2(30, 10), Vec2(-20, 45), Vec2(60, -5), Vec2(10, 100)};
  const SensorField field(sensors, p);
  const std::vector<std::uint8_t> bits = {1, 0, 1, 0, 0};
  const Observation obs{bits, 1};
  for (const Vec2& x : {Vec2(5, 5), Vec2(20, 20), Vec2(-3, 30)}) {
    const double want = std::log(oracle_likelihood(sensors, bits, x, p));
    CHECK(test::rel_close(log_likelihood(field, obs, x), want, 1e-12));
  }
}

TEST_CASE("log_likelihood edge cases") {
  DetectionParams p;
  p.w = 0.0;
  p.p0 = 1.0;
  const SensorField field({Vec2(0, 0), Vec2(500, 0)}, p);
  SUBCASE("impossible detection is log-zero") {
    CHECK(log_likelihood(field, Observation{{0, 1}, 0}, Vec2(0, 0)) == kLogZero);
  }
  SUBCASE("certain miss is log-zero") {
    CHECK(log_likelihood(field, Observation{{0, 0}, 0}, Vec2(0, 0)) == kLogZero);
  }
  SUBCASE("length mismatch throws") {
    CHECK_THROWS_AS(log_likelihood(field, Observation{{1}, 0}, Vec2(0, 0)), std::logic_error);
  }
}

TEST_CASE("property: likelihood sums to one over all observation vectors") {
  test::Gen gen(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = static_cast<std::size_t>(gen.integer(1, 8));
    const SensorField field(random_sensors(gen, n, -80, 80), paper_detection());
    const Vec2 x(gen.real(-60, 60), gen.real(-60, 60));
    double total = 0.0;
    Observation obs{std::vector<std::uint8_t>(n), 0};
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      for (std::size_t i = 0; i < n; ++i) obs.bits[i] = (mask >> i) & 1u;
      total += std::exp(log_likelihood(field, obs, x));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("property: empirical observation frequencies match the likelihood") {
  const std::vector<Vec2> sensors = {Vec2(0, 0), Vec2(40, 0), Vec2(0, 60)};
  const SensorField field(sensors, paper_detection());
  const Vec2 target(20, 20);
  RandomStream rng(7, "consistency");
  std::map<unsigned, int> counts;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto obs = observe(field, target, rng);
    counts[obs.bits[0] | (obs.bits[1] << 1) | (obs.bits[2] << 2)]++;
  }
  for (unsigned mask = 0; mask < 8; ++mask) {
    const Observation obs{{static_cast<std::uint8_t>(mask & 1), static_cast<std::uint8_t>((mask >> 1) & 1),
                           static_cast<std::uint8_t>((mask >> 2) & 1)},
                          0};
    const double prob = std::exp(log_likelihood(field, obs, target));
    const double freq = static_cast<double>(counts[mask]) / n;
    CHECK(std::abs(freq - prob) <= 4.0 * std::sqrt(prob * (1 - prob) / n) + 1e-4);
  }
}

TEST_CASE("SensorField::query returns exactly the sensors in range") {
  test::Gen gen(8);
  const auto sensors = random_sensors(gen, 500, 0, 1000);
  const SensorField field(sensors, paper_detection());
  std::vector<std::uint32_t> got;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec2 c(gen.real(-300, 1300), gen.real(-300, 1300));
    const double r = gen.real(0, 400);
    field.query(c, r, got);
    std::vector<std::uint32_t> want;
    for (std::uint32_t i = 0; i < sensors.size(); ++i)
      if ((sensors[i] - c).squaredNorm() <= r * r) want.push_back(i);
    CHECK(got == want);
  }
  field.query(Vec2(1e12, -1e12), 10.0, got);
  CHECK(got.empty());
}

TEST_CASE("ObservationLikelihood agrees with the exact sum") {
  test::Gen gen(9);
  DetectionParams p;
  RandomStream rng(9);
  const auto field = deploy(MapRect{0, 1000, 0, 800}, p, rng);
  const auto obs = observe(field, Vec2(500, 400), rng);
  const ObservationLikelihood lik(field, obs);
  CHECK(lik.truncation_radius() >= p.r0);
  CHECK(0.5 * std::exp(-p.beta * lik.truncation_radius() * lik.truncation_radius()) <= 1e-20 * (1 + 1e-9));
  for (int trial = 0; trial < 200; ++trial) {
    const Vec2 x(gen.real(-200, 1200), gen.real(-200, 1000));
    const double exact = log_likelihood(field, obs, x);
    const double fast = lik(x);
    if (exact == kLogZero) {
      CHECK(fast == kLogZero);
    } else {
      // Each skipped silent sensor contributes |log(1 - p)| <= ~p <= 1e-20.
      CHECK(std::abs(fast - exact) <= 1e-15 * std::max(1.0, std::abs(exact)) + field.size() * 2e-20);
    }
  }
}

TEST_CASE("sensor table round trip") {
  test::Gen gen(10);
  const SensorField field(random_sensors(gen, 25, -1000, 1000), paper_detection());
  const auto path = std::filesystem::temp_directory_path() / "acipf_sensor_table_test.txt";
  save_sensor_table(field, path);
  const auto back = load_sensor_table(path, paper_detection());
  REQUIRE(back.size() == field.size());
  for (std::size_t i = 0; i < field.size(); ++i) CHECK(back.positions()[i] == field.positions()[i]);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_sensor_table(path, paper_detection()), std::runtime_error);
}
