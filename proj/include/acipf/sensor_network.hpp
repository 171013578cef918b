#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "acipf/random.hpp"
#include "acipf/types.hpp"

namespace acipf {

struct MapRect {
  double xmin = 0.0;
  double xmax = 1.0;
  double ymin = 0.0;
  double ymax = 1.0;

  double area() const { return (xmax - xmin) * (ymax - ymin); }
  double diagonal() const;
  bool contains(const Vec2& p) const;
  void validate() const;
};

// P(y = 1) = w * exp(-beta d^2) + (1 - w) * p0 * 1(d <= r0)
struct DetectionParams {
  double beta = 0.001;
  double r0 = 50.0;
  double p0 = 1.0;
  double w = 0.5;
  double density = 0.001;

  void validate() const;
};

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double detection_prob(const Vec2& sensor, const Vec2& target, const DetectionParams& params);

struct Observation {
  std::vector<std::uint8_t> bits;
  std::int64_t time_index = 0;
};

// Immutable sensor layout plus a uniform grid over it for neighbourhood queries.
class SensorField {
 public:
  SensorField(std::vector<Vec2> positions, const DetectionParams& params);

  std::size_t size() const { return positions_.size(); }
  const std::vector<Vec2>& positions() const { return positions_; }
  const DetectionParams& params() const { return params_; }

  // Distance beyond which w * exp(-beta d^2) <= tolerance (never below r0).
  double truncation_radius(double tolerance) const;

  // Indices of sensors within `radius` of `p`, ascending.
  void query(const Vec2& p, double radius, std::vector<std::uint32_t>& out) const;

 private:
  void build_grid();
  std::int64_t cell_of(double v, double origin) const;

  std::vector<Vec2> positions_;
  DetectionParams params_;

  double cell_ = 1.0;
  double gx0_ = 0.0;
  double gy0_ = 0.0;
  std::int64_t nx_ = 1;
  std::int64_t ny_ = 1;
  std::vector<std::uint32_t> cell_start_;
  std::vector<std::uint32_t> cell_items_;
};

// n_s = floor(density * area) sensors, i.i.d. uniform over the rect.
SensorField deploy(const MapRect& map, const DetectionParams& params, RandomStream& rng);

Observation observe(const SensorField& field, const Vec2& target, RandomStream& rng,
                    std::int64_t time_index = 0);

// Exact log p(Y | x) summed over every sensor. kLogZero if any factor is 0.
double log_likelihood(const SensorField& field, const Observation& obs, const Vec2& candidate);

// Log-likelihood specialised to one observation, for evaluation at many
// candidates. Every detecting sensor contributes exactly; non-detecting
// sensors farther than the truncation radius contribute log(1 - p) with
// p <= tolerance, and are skipped.
class ObservationLikelihood {
 public:
  ObservationLikelihood(const SensorField& field, const Observation& obs,
                        double tolerance = 1e-20);

  double operator()(const Vec2& candidate) const;

  double truncation_radius() const { return radius_; }

 private:
  const SensorField* field_;
  const Observation* obs_;
  std::vector<std::uint32_t> detected_;
  double radius_;
};

void save_sensor_table(const SensorField& field, const std::filesystem::path& path);
SensorField load_sensor_table(const std::filesystem::path& path, const DetectionParams& params);

}  // namespace acipf
