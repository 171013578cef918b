#include "acipf/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "acipf/record_io.hpp"
#include "acipf/sweep.hpp"

namespace acipf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw std::invalid_argument("invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& value) {
  Int v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) bad_value(key, value, "an integer");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "adaptive") return true;
  if (value == "false" || value == "0" || value == "no" || value == "fixed") return false;
  bad_value(key, value, "true/false");
}

using Setter = void (*)(ExperimentConfig&, const std::string&, const std::string&);

struct SettingDef {
  const char* key;
  const char* help;
  Setter set;
};

const std::vector<SettingDef>& setting_defs() {
  static const std::vector<SettingDef> defs = {
      {"seed", "64-bit master seed",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = to_int<std::uint64_t>(k, v); }},
      {"T", "total number of steps",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.T = to_int<int>(k, v); }},
      {"T0", "training steps before inference starts",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.T0 = to_int<int>(k, v); }},
      {"M", "number of particles",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.M = to_int<std::size_t>(k, v); }},
      {"b", "calibration look-back (entries per window)",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.b = to_int<std::size_t>(k, v); }},
      {"gamma", "adaptive step size",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.gamma = to_double(k, v); }},
      {"alpha", "target aggregated miscoverage",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.alpha = to_double(k, v); }},
      {"H", "maximum prediction horizon",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.H = to_int<int>(k, v); }},
      {"dt", "sampling period",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.motion.dt = to_double(k, v); }},
      {"sigma1-sq", "acceleration variance, axis 1",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.motion.sigma1_sq = to_double(k, v); }},
      {"sigma2-sq", "acceleration variance, axis 2",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.motion.sigma2_sq = to_double(k, v); }},
      {"beta", "detection decay",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.detection.beta = to_double(k, v); }},
      {"r0", "strong-signal range",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.detection.r0 = to_double(k, v); }},
      {"p0", "basic detection probability inside r0",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.detection.p0 = to_double(k, v); }},
      {"w", "weight of the distance-decay term",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.detection.w = to_double(k, v); }},
      {"density", "sensors per unit area",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.detection.density = to_double(k, v); }},
      {"margin", "deployment margin around the trajectory bounding box",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.map_margin = to_double(k, v); }},
      {"x0", "initial state as x1,x2,v1,v2",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         std::istringstream ss(v);
         std::string part;
         int i = 0;
         while (std::getline(ss, part, ',')) {
           if (i >= 4) bad_value(k, v, "four comma-separated numbers");
           c.initial_state(i++) = to_double(k, trim(part));
         }
         if (i != 4) bad_value(k, v, "four comma-separated numbers");
       }},
      {"predictor", "pf or apf",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "pf") {
           c.predictor = FilterKind::kPF;
         } else if (v == "apf") {
           c.predictor = FilterKind::kAPF;
         } else {
           bad_value(k, v, "pf or apf");
         }
       }},
      {"adaptive", "true for the adaptive alpha update, false for a constant alpha",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.adaptive = to_bool(k, v); }},
      {"resampling", "multinomial or systematic",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "multinomial") {
           c.filter.resampling = ResamplingScheme::kMultinomial;
         } else if (v == "systematic") {
           c.filter.resampling = ResamplingScheme::kSystematic;
         } else {
           bad_value(k, v, "multinomial or systematic");
         }
       }},
      {"resample", "PF resampling trigger: always or ess",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "always") {
           c.filter.resample_every_step = true;
         } else if (v == "ess") {
           c.filter.resample_every_step = false;
         } else {
           bad_value(k, v, "always or ess");
         }
       }},
      {"ess-fraction", "ESS threshold as a fraction of M (with --resample ess)",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.filter.ess_fraction = to_double(k, v); }},
      {"apf-max-log-ratio", "log bound on APF weight ratios with a zero look-ahead likelihood",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.filter.apf_max_log_ratio = to_double(k, v);
       }},
      {"likelihood-tolerance", "detection probability below which silent sensors are skipped",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.filter.likelihood_tolerance = to_double(k, v);
       }},
      {"threads", "worker threads for per-particle work",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.filter.threads = to_int<unsigned>(k, v); }},
      {"prior-pos-std", "prior standard deviation of position",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.prior_position_std = to_double(k, v); }},
      {"prior-vel-std", "prior standard deviation of velocity",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.prior_velocity_std = to_double(k, v); }},
      {"c-star-factor", "C* as a multiple of the map diagonal",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.c_star_factor = to_double(k, v); }},
      {"c-star", "explicit C* (overrides c-star-factor)",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.c_star = to_double(k, v); }},
      {"sensor-table", "load sensor positions from an 'x y' table instead of deploying",
       [](ExperimentConfig& c, const std::string&, const std::string& v) { c.sensor_table = v; }},
      {"out", "records output path (CSV, or JSON-lines for .jsonl)",
       [](ExperimentConfig& c, const std::string&, const std::string& v) { c.records_path = v; }},
      {"summary", "summary JSON output path",
       [](ExperimentConfig& c, const std::string&, const std::string& v) { c.summary_path = v; }},
  };
  return defs;
}

using Overrides = std::map<std::string, std::string>;

// Registers every setting as a flag plus --preset and --config.
struct ConfigFlags {
  std::string preset = "paper";
  std::string config_file;
  Overrides values;

  void attach(CLI::App* app) {
    app->add_option("--preset", preset, "base parameter set: paper or smoke")->capture_default_str();
    app->add_option("--config", config_file, "key = value file applied on top of the preset");
    for (const auto& d : setting_defs()) app->add_option(std::string("--") + d.key, values[d.key], d.help);
  }

  ExperimentConfig build(const CLI::App* app) const {
    ExperimentConfig c = preset_by_name(preset);
    if (!config_file.empty()) apply_config_file(c, config_file);
    for (const auto& d : setting_defs()) {
      if (app->count(std::string("--") + d.key) == 0) continue;
      apply_setting(c, d.key, values.at(d.key));
    }
    c.validate();
    return c;
  }
};

void print_summary(std::ostream& out, const RunSummary& s) {
  out << variant_key(s.predictor, s.adaptive) << '\n';
  out << "  h      n      RACR       ACR        APS    radius  med. r   sat.\n";
  for (const auto& h : s.horizons) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-2d %6zu  %8.4f  %8.4f  %9.3f  %8.3f  %6.3f  %5zu\n", h.horizon, h.count,
                  h.racr.mean, h.acr.mean, h.aps.mean, h.radius.mean, h.median_radius, h.saturated);
    out << line;
  }
  for (const auto& n : s.notes) out << "  note: " << n << '\n';
}

std::vector<std::int64_t> parse_times(const std::string& text) {
  std::vector<std::int64_t> out;
  std::istringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(to_int<std::int64_t>("--at", trim(part)));
  return out;
}

}  // namespace

const std::vector<SettingInfo>& setting_table() {
  static const std::vector<SettingInfo> table = [] {
    std::vector<SettingInfo> t;
    for (const auto& d : setting_defs()) t.push_back({d.key, d.help});
    return t;
  }();
  return table;
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  for (const auto& d : setting_defs()) {
    if (key == d.key) {
      d.set(config, key, trim(value));
      return;
    }
  }
  throw std::invalid_argument("unknown setting '" + key + "'");
}

void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    try {
      apply_setting(config, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

ExperimentConfig preset_by_name(const std::string& name) {
  if (name == "paper") return ExperimentConfig::paper_preset();
  if (name == "smoke") return ExperimentConfig::smoke_preset();
  throw std::invalid_argument("unknown preset '" + name + "' (expected paper or smoke)");
}

std::filesystem::path resolve_output_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* dir = std::getenv("ACIPF_OUTPUT_DIR"); dir && *dir) return std::filesystem::path(dir) / p;
  return p;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive conformal prediction sets for particle-filter target tracking"};
  app.require_subcommand(1);

  ConfigFlags run_flags, sweep_flags, snap_flags;

  auto* run = app.add_subcommand("run", "simulate one configuration and export its step records");
  run_flags.attach(run);

  auto* sweep = app.add_subcommand("sweep", "seed sweep over a predictor x adaptive grid");
  sweep_flags.attach(sweep);
  std::size_t n_seeds = 20;
  std::string grid_text = "pf,apf x adaptive,fixed";
  std::string table_path, cells_path;
  sweep->add_option("--seeds", n_seeds, "number of seeds, starting at --seed")->capture_default_str();
  sweep->add_option("--grid", grid_text, "predictor x mode grid")->capture_default_str();
  sweep->add_option("--table", table_path, "write the text table here as well as stdout");
  sweep->add_option("--cells-csv", cells_path, "long-format CSV of per-horizon across-seed statistics");

  auto* replay = app.add_subcommand("replay", "re-summarize exported step records");
  std::string replay_input, replay_summary, replay_format = "auto";
  replay->add_option("--input", replay_input, "records file")->required();
  replay->add_option("--format", replay_format, "csv, jsonl or auto")->capture_default_str();
  replay->add_option("--summary", replay_summary, "summary JSON output path");

  auto* snapshot = app.add_subcommand("snapshot", "dump particle clouds and prediction sets at chosen times");
  snap_flags.attach(snapshot);
  std::string snap_times, snap_dir = "snapshot";
  snapshot->add_option("--at", snap_times, "comma-separated times (default: T - H)");
  snapshot->add_option("--dir", snap_dir, "output directory")->capture_default_str();

  std::vector<std::string> argv_store{"acipf"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*run) {
      const auto cfg = run_flags.build(run);
      const auto result = run_experiment(cfg);
      print_summary(out, result.summary);
      out << "  degenerate steps: " << result.diagnostics.degenerate_steps
          << ", min ESS: " << result.diagnostics.min_ess << '\n';
      if (!cfg.records_path.empty()) {
        const auto path = resolve_output_path(cfg.records_path);
        export_records(result.records, format_for_path(path), path);
      }
      if (!cfg.summary_path.empty()) {
        const RunSummary summaries[] = {result.summary};
        export_summaries(summaries, resolve_output_path(cfg.summary_path), {{"config", config_to_json(cfg)}});
      }
      return 0;
    }

    if (*sweep) {
      const auto cfg = sweep_flags.build(sweep);
      const auto grid = parse_grid(grid_text);
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(cfg.seed + i);
      const auto result = run_sweep(cfg, seeds, grid, [&](const SweepRun& r) {
        err << "seed " << r.seed << ' ' << variant_key(to_string(r.predictor), r.adaptive) << " RACR(h=1) "
            << (r.summary.horizons.empty() ? 0.0 : r.summary.horizons.front().racr.mean) << '\n';
      });
      const auto table = format_table(result);
      out << table;
      if (!table_path.empty()) {
        std::ofstream f(resolve_output_path(table_path));
        if (!f) throw std::runtime_error("cannot write " + table_path);
        f << table;
      }
      if (!cells_path.empty()) {
        std::ofstream f(resolve_output_path(cells_path));
        if (!f) throw std::runtime_error("cannot write " + cells_path);
        f << cells_to_csv(result.cells);
      }
      if (!cfg.summary_path.empty()) {
        auto doc = sweep_to_json(result);
        doc["config"] = config_to_json(cfg);
        doc["seeds"] = seeds;
        std::ofstream f(resolve_output_path(cfg.summary_path));
        if (!f) throw std::runtime_error("cannot write " + cfg.summary_path);
        f << doc.dump(2) << '\n';
      }
      return 0;
    }

    if (*replay) {
      RecordFormat fmt = format_for_path(replay_input);
      if (replay_format == "csv") {
        fmt = RecordFormat::kCsv;
      } else if (replay_format == "jsonl") {
        fmt = RecordFormat::kJsonLines;
      } else if (replay_format != "auto") {
        throw std::invalid_argument("unknown --format '" + replay_format + "'");
      }
      const auto records = import_records(replay_input, fmt);
      auto summary = summarize(records);
      summary.predictor = "replay";
      print_summary(out, summary);
      if (!replay_summary.empty()) {
        const RunSummary summaries[] = {summary};
        export_summaries(summaries, resolve_output_path(replay_summary));
      }
      return 0;
    }

    if (*snapshot) {
      const auto cfg = snap_flags.build(snapshot);
      auto times = snap_times.empty() ? std::vector<std::int64_t>{cfg.T - cfg.H} : parse_times(snap_times);
      const auto dir = resolve_output_path(snap_dir);
      std::filesystem::create_directories(dir);
      const auto scenario = build_scenario(cfg);
      save_sensor_table(scenario.field, dir / "sensors.txt");
      {
        std::ofstream f(dir / "trajectory.txt");
        f.precision(17);
        for (std::size_t i = 0; i < scenario.trajectory.size(); ++i) {
          const auto& x = scenario.trajectory[i];
          f << (i + 1) << ' ' << x(0) << ' ' << x(1) << ' ' << x(2) << ' ' << x(3) << '\n';
        }
      }
      auto results = run_variants(cfg, scenario, {cfg.adaptive},
                                  [&](std::int64_t t, const FilterStep& step, const std::vector<MultiStepCloud>& clouds) {
                                    if (std::find(times.begin(), times.end(), t) == times.end()) return;
                                    const auto tag = std::to_string(t);
                                    write_particle_snapshot(step.posterior, dir / ("particles_t" + tag + ".txt"));
                                    std::ofstream f(dir / ("clouds_t" + tag + ".txt"));
                                    f.precision(17);
                                    for (const auto& c : clouds)
                                      for (const auto& p : c.positions) f << c.horizon << ' ' << p.x() << ' ' << p.y() << '\n';
                                  });
      export_records(results.front().records, RecordFormat::kCsv, dir / "records.csv");
      print_summary(out, results.front().summary);
      out << "snapshot written to " << dir.string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace acipf
