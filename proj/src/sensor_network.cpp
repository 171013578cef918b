#include "acipf/sensor_network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace acipf {

double MapRect::diagonal() const { return std::hypot(xmax - xmin, ymax - ymin); }

bool MapRect::contains(const Vec2& p) const {
  return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
}

void MapRect::validate() const {
  if (!std::isfinite(xmin) || !std::isfinite(xmax) || !std::isfinite(ymin) ||
      !std::isfinite(ymax) || !(xmax > xmin) || !(ymax > ymin))
    throw std::invalid_argument("map: rectangle must be finite with xmax > xmin and ymax > ymin");
}

void DetectionParams::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("sensors: beta must be > 0");
  if (!(r0 >= 0.0)) throw std::invalid_argument("sensors: r0 must be >= 0");
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("sensors: p0 must lie in [0, 1]");
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("sensors: w must lie in [0, 1]");
  if (!(density > 0.0)) throw std::invalid_argument("sensors: density must be > 0");
}

namespace {

inline double prob_from_d2(double d2, const DetectionParams& p) {
  double v = p.w * std::exp(-p.beta * d2);
  if (d2 <= p.r0 * p.r0) v += (1.0 - p.w) * p.p0;
  return std::min(v, 1.0);
}

inline double log_factor(double prob, bool detected) {
  if (detected) return prob > 0.0 ? std::log(prob) : kLogZero;
  return prob < 1.0 ? std::log1p(-prob) : kLogZero;
}

}  // namespace

double detection_prob(const Vec2& sensor, const Vec2& target, const DetectionParams& params) {
  return prob_from_d2((sensor - target).squaredNorm(), params);
}

SensorField::SensorField(std::vector<Vec2> positions, const DetectionParams& params)
    : positions_(std::move(positions)), params_(params) {
  params_.validate();
  if (positions_.empty()) throw std::invalid_argument("sensors: field must contain at least one sensor");
  for (const auto& p : positions_)
    if (!p.allFinite()) throw std::invalid_argument("sensors: non-finite sensor position");
  build_grid();
}

double SensorField::truncation_radius(double tolerance) const {
  double r = params_.r0;
  if (params_.w > tolerance) r = std::max(r, std::sqrt(std::log(params_.w / tolerance) / params_.beta));
  return r;
}

std::int64_t SensorField::cell_of(double v, double origin) const {
  // Clamped in floating point so far-off candidates cannot overflow the cast.
  const double c = std::clamp(std::floor((v - origin) / cell_), -1.0, 1e15);
  return static_cast<std::int64_t>(c);
}

void SensorField::build_grid() {
  double xmin = positions_[0].x(), xmax = xmin, ymin = positions_[0].y(), ymax = ymin;
  for (const auto& p : positions_) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  // Roughly four sensors per cell.
  const double extent = std::max({xmax - xmin, ymax - ymin, 1e-9});
  const double per_cell = std::sqrt(4.0 * (xmax - xmin + 1e-9) * (ymax - ymin + 1e-9) /
                                    static_cast<double>(positions_.size()));
  cell_ = std::clamp(per_cell, extent / 4096.0, std::max(extent, 1e-9));
  gx0_ = xmin;
  gy0_ = ymin;
  nx_ = cell_of(xmax, gx0_) + 1;
  ny_ = cell_of(ymax, gy0_) + 1;

  const auto ncells = static_cast<std::size_t>(nx_ * ny_);
  std::vector<std::uint32_t> counts(ncells + 1, 0);
  std::vector<std::size_t> cell_index(positions_.size());
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const auto cx = cell_of(positions_[i].x(), gx0_);
    const auto cy = cell_of(positions_[i].y(), gy0_);
    cell_index[i] = static_cast<std::size_t>(cy * nx_ + cx);
    ++counts[cell_index[i] + 1];
  }
  for (std::size_t c = 0; c < ncells; ++c) counts[c + 1] += counts[c];
  cell_start_ = counts;
  cell_items_.assign(positions_.size(), 0);
  std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
  for (std::size_t i = 0; i < positions_.size(); ++i)
    cell_items_[fill[cell_index[i]]++] = static_cast<std::uint32_t>(i);
}

void SensorField::query(const Vec2& p, double radius, std::vector<std::uint32_t>& out) const {
  out.clear();
  const double r2 = radius * radius;
  const auto cx0 = std::max<std::int64_t>(0, cell_of(p.x() - radius, gx0_));
  const auto cx1 = std::min<std::int64_t>(nx_ - 1, cell_of(p.x() + radius, gx0_));
  const auto cy0 = std::max<std::int64_t>(0, cell_of(p.y() - radius, gy0_));
  const auto cy1 = std::min<std::int64_t>(ny_ - 1, cell_of(p.y() + radius, gy0_));
  for (auto cy = cy0; cy <= cy1; ++cy) {
    for (auto cx = cx0; cx <= cx1; ++cx) {
      const auto c = static_cast<std::size_t>(cy * nx_ + cx);
      for (auto k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
        const auto i = cell_items_[k];
        if ((positions_[i] - p).squaredNorm() <= r2) out.push_back(i);
      }
    }
  }
  std::sort(out.begin(), out.end());
}

SensorField deploy(const MapRect& map, const DetectionParams& params, RandomStream& rng) {
  map.validate();
  params.validate();
  const double expected = params.density * map.area();
  const auto count = static_cast<std::size_t>(std::floor(expected));
  if (count == 0)
    throw std::invalid_argument("sensors: density * map area = " + std::to_string(expected) +
                                " yields no sensors");
  std::vector<Vec2> positions;
  positions.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform();
    const double v = rng.uniform();
    positions.emplace_back(map.xmin + u * (map.xmax - map.xmin), map.ymin + v * (map.ymax - map.ymin));
  }
  return SensorField(std::move(positions), params);
}

Observation observe(const SensorField& field, const Vec2& target, RandomStream& rng,
                    std::int64_t time_index) {
  Observation obs;
  obs.time_index = time_index;
  obs.bits.resize(field.size());
  const auto& pos = field.positions();
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double prob = detection_prob(pos[i], target, field.params());
    obs.bits[i] = rng.uniform() < prob ? 1 : 0;
  }
  return obs;
}

double log_likelihood(const SensorField& field, const Observation& obs, const Vec2& candidate) {
  if (obs.bits.size() != field.size())
    throw std::logic_error("log_likelihood: observation length " + std::to_string(obs.bits.size()) +
                           " != sensor count " + std::to_string(field.size()));
  double total = 0.0;
  const auto& pos = field.positions();
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double f = log_factor(detection_prob(pos[i], candidate, field.params()), obs.bits[i] != 0);
    if (f == kLogZero) return kLogZero;
    total += f;
  }
  return total;
}

ObservationLikelihood::ObservationLikelihood(const SensorField& field, const Observation& obs,
                                             double tolerance)
    : field_(&field), obs_(&obs), radius_(field.truncation_radius(tolerance)) {
  if (obs.bits.size() != field.size())
    throw std::logic_error("likelihood: observation length " + std::to_string(obs.bits.size()) +
                           " != sensor count " + std::to_string(field.size()));
  for (std::size_t i = 0; i < obs.bits.size(); ++i)
    if (obs.bits[i]) detected_.push_back(static_cast<std::uint32_t>(i));
}

double ObservationLikelihood::operator()(const Vec2& candidate) const {
  const auto& pos = field_->positions();
  const auto& params = field_->params();
  double total = 0.0;
  for (auto i : detected_) {
    const double prob = prob_from_d2((pos[i] - candidate).squaredNorm(), params);
    if (!(prob > 0.0)) return kLogZero;
    total += std::log(prob);
  }
  thread_local std::vector<std::uint32_t> near;
  field_->query(candidate, radius_, near);
  for (auto i : near) {
    if (obs_->bits[i]) continue;
    const double prob = prob_from_d2((pos[i] - candidate).squaredNorm(), params);
    if (prob >= 1.0) return kLogZero;
    total += std::log1p(-prob);
  }
  return total;
}

void save_sensor_table(const SensorField& field, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open sensor table for writing: " + path.string());
  out.precision(17);
  for (const auto& p : field.positions()) out << p.x() << ' ' << p.y() << '\n';
  if (!out) throw std::runtime_error("failed writing sensor table: " + path.string());
}

SensorField load_sensor_table(const std::filesystem::path& path, const DetectionParams& params) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sensor table: " + path.string());
  std::vector<Vec2> positions;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ss(line);
    double x = 0.0, y = 0.0;
    if (!(ss >> x >> y))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 'x y'");
    positions.emplace_back(x, y);
  }
  return SensorField(std::move(positions), params);
}

}  // namespace acipf
