#include "acipf/record_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace acipf {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace {

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("records line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_int(std::string_view s, std::size_t line) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("records line " + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
  return v;
}

bool parse_flag(std::string_view s, std::size_t line) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw std::runtime_error("records line " + std::to_string(line) + ": expected 0/1, got '" + std::string(s) + "'");
}

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

double from_nullable(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json record_to_json(const StepRecord& r) {
  return json{{"time", r.time},
              {"horizon", r.horizon},
              {"pred_x", r.predicted_position.x()},
              {"pred_y", r.predicted_position.y()},
              {"radius", r.radius},
              {"alpha_used", r.alpha_used},
              {"lambda", nullable(r.realized_lambda)},
              {"covered", r.covered ? 1 : 0},
              {"true_x", r.true_position.x()},
              {"true_y", r.true_position.y()},
              {"ess", r.ess},
              {"degenerate", r.degenerate ? 1 : 0}};
}

StepRecord record_from_json(const json& j) {
  StepRecord r;
  r.time = j.at("time").get<std::int64_t>();
  r.horizon = j.at("horizon").get<int>();
  r.predicted_position = Vec2(j.at("pred_x").get<double>(), j.at("pred_y").get<double>());
  r.radius = j.at("radius").get<double>();
  r.alpha_used = j.at("alpha_used").get<double>();
  r.realized_lambda = from_nullable(j.at("lambda"));
  r.covered = j.at("covered").get<int>() != 0;
  r.true_position = Vec2(j.at("true_x").get<double>(), j.at("true_y").get<double>());
  r.ess = j.at("ess").get<double>();
  r.degenerate = j.at("degenerate").get<int>() != 0;
  return r;
}

}  // namespace

void write_records(std::ostream& out, std::span<const StepRecord> records, RecordFormat format) {
  if (format == RecordFormat::kJsonLines) {
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
    return;
  }
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.time << ',' << r.horizon << ',' << format_double(r.predicted_position.x()) << ','
        << format_double(r.predicted_position.y()) << ',' << format_double(r.radius) << ','
        << format_double(r.alpha_used) << ',' << format_double(r.realized_lambda) << ','
        << (r.covered ? 1 : 0) << ',' << format_double(r.true_position.x()) << ','
        << format_double(r.true_position.y()) << ',' << format_double(r.ess) << ','
        << (r.degenerate ? 1 : 0) << '\n';
  }
}

std::vector<StepRecord> read_records(std::istream& in, RecordFormat format) {
  std::vector<StepRecord> out;
  std::string line;
  std::size_t lineno = 0;
  if (format == RecordFormat::kJsonLines) {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        out.push_back(record_from_json(json::parse(line)));
      } catch (const json::exception& e) {
        throw std::runtime_error("records line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    return out;
  }

  if (!std::getline(in, line)) return out;
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw std::runtime_error("records: unexpected CSV header '" + line + "'");
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fields.clear();
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 12)
      throw std::runtime_error("records line " + std::to_string(lineno) + ": expected 12 fields, got " +
                               std::to_string(fields.size()));
    StepRecord r;
    r.time = parse_int(fields[0], lineno);
    r.horizon = static_cast<int>(parse_int(fields[1], lineno));
    r.predicted_position = Vec2(parse_double(fields[2], lineno), parse_double(fields[3], lineno));
    r.radius = parse_double(fields[4], lineno);
    r.alpha_used = parse_double(fields[5], lineno);
    r.realized_lambda = parse_double(fields[6], lineno);
    r.covered = parse_flag(fields[7], lineno);
    r.true_position = Vec2(parse_double(fields[8], lineno), parse_double(fields[9], lineno));
    r.ess = parse_double(fields[10], lineno);
    r.degenerate = parse_flag(fields[11], lineno);
    out.push_back(r);
  }
  return out;
}

void export_records(std::span<const StepRecord> records, RecordFormat format,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open records file for writing: " + path.string());
  write_records(out, records, format);
  if (!out) throw std::runtime_error("failed writing records file: " + path.string());
}

std::vector<StepRecord> import_records(const std::filesystem::path& path, RecordFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open records file: " + path.string());
  try {
    return read_records(in, format);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

RecordFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".ndjson") ? RecordFormat::kJsonLines : RecordFormat::kCsv;
}

json to_json(const MetricStats& s) {
  return json{{"n", s.n}, {"mean", s.mean}, {"stddev", s.stddev}, {"ci_low", s.ci_low}, {"ci_high", s.ci_high}};
}

json to_json(const HorizonSummary& s) {
  return json{{"count", s.count},   {"warmup_records", s.warmup_records},
              {"racr", to_json(s.racr)}, {"acr", to_json(s.acr)},
              {"aps", to_json(s.aps)},   {"radius", to_json(s.radius)},
              {"lambda", to_json(s.lambda)},
              {"median_radius", s.median_radius},
              {"saturated", s.saturated}};
}

std::string variant_key(const std::string& predictor, bool adaptive) {
  return predictor + (adaptive ? "/adaptive" : "/fixed");
}

json summaries_to_json(std::span<const RunSummary> summaries) {
  json doc = json::object();
  for (const auto& s : summaries) {
    json horizons = json::object();
    for (const auto& h : s.horizons) horizons[std::to_string(h.horizon)] = to_json(h);
    doc[variant_key(s.predictor, s.adaptive)] = json{{"predictor", s.predictor},
                                                     {"adaptive", s.adaptive},
                                                     {"horizons", horizons},
                                                     {"degenerate_records", s.degenerate_records},
                                                     {"notes", s.notes}};
  }
  return doc;
}

json config_to_json(const ExperimentConfig& c) {
  json j{{"seed", c.seed},
         {"T", c.T},
         {"T0", c.T0},
         {"M", c.M},
         {"b", c.b},
         {"gamma", c.gamma},
         {"alpha", c.alpha},
         {"H", c.H},
         {"dt", c.motion.dt},
         {"sigma1_sq", c.motion.sigma1_sq},
         {"sigma2_sq", c.motion.sigma2_sq},
         {"beta", c.detection.beta},
         {"r0", c.detection.r0},
         {"p0", c.detection.p0},
         {"w", c.detection.w},
         {"density", c.detection.density},
         {"margin", c.map_margin},
         {"x0", {c.initial_state(0), c.initial_state(1), c.initial_state(2), c.initial_state(3)}},
         {"predictor", to_string(c.predictor)},
         {"adaptive", c.adaptive},
         {"resampling", to_string(c.filter.resampling)},
         {"resample_every_step", c.filter.resample_every_step},
         {"ess_fraction", c.filter.ess_fraction},
         {"apf_max_log_ratio", c.filter.apf_max_log_ratio},
         {"likelihood_tolerance", c.filter.likelihood_tolerance},
         {"prior_pos_std", c.prior_position_std},
         {"prior_vel_std", c.prior_velocity_std},
         {"c_star_factor", c.c_star_factor}};
  if (c.c_star) j["c_star"] = *c.c_star;
  if (!c.sensor_table.empty()) j["sensor_table"] = c.sensor_table;
  return j;
}

void export_summaries(std::span<const RunSummary> summaries, const std::filesystem::path& path,
                      const json& extra) {
  json doc = summaries_to_json(summaries);
  for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = it.value();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open summary file for writing: " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing summary file: " + path.string());
}

}  // namespace acipf
