#include "acipf/sweep.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "acipf/record_io.hpp"

namespace acipf {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string{} : cur.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

SweepGrid parse_grid(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) throw std::invalid_argument("grid: expected '<predictors> x <modes>', got '" + text + "'");
  SweepGrid grid;
  grid.predictors.clear();
  grid.adaptive_modes.clear();
  for (const auto& p : split(text.substr(0, x), ',')) {
    if (p == "pf") {
      grid.predictors.push_back(FilterKind::kPF);
    } else if (p == "apf") {
      grid.predictors.push_back(FilterKind::kAPF);
    } else {
      throw std::invalid_argument("grid: unknown predictor '" + p + "'");
    }
  }
  for (const auto& m : split(text.substr(x + 1), ',')) {
    if (m == "adaptive") {
      grid.adaptive_modes.push_back(true);
    } else if (m == "fixed" || m == "non-adaptive") {
      grid.adaptive_modes.push_back(false);
    } else {
      throw std::invalid_argument("grid: unknown mode '" + m + "'");
    }
  }
  if (grid.predictors.empty() || grid.adaptive_modes.empty())
    throw std::invalid_argument("grid: both sides must list at least one value");
  return grid;
}

std::size_t count_alpha_violations(const std::vector<StepRecord>& records, double gamma) {
  constexpr double kSlack = 1e-12;
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const StepRecord& r) {
    return !(r.alpha_used >= -gamma - kSlack && r.alpha_used <= 1.0 + gamma + kSlack);
  }));
}

std::size_t count_coverage_mismatches(const std::vector<StepRecord>& records) {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const StepRecord& r) {
    const bool expect = r.has_set() && conformity_score(r.true_position, r.predicted_position) <= r.radius;
    return expect != r.covered;
  }));
}

SweepResult run_sweep(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds,
                      const SweepGrid& grid, const SweepProgress& progress) {
  SweepResult result;
  for (auto seed : seeds) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    const auto scenario = build_scenario(cfg);
    for (auto predictor : grid.predictors) {
      cfg.predictor = predictor;
      auto variants = run_variants(cfg, scenario, grid.adaptive_modes);
      for (auto& v : variants) {
        SweepRun run;
        run.seed = seed;
        run.predictor = predictor;
        run.adaptive = v.adaptive;
        run.summary = std::move(v.summary);
        run.diagnostics = v.diagnostics;
        run.alpha_bound_violations = count_alpha_violations(v.records, cfg.gamma);
        run.coverage_flag_mismatches = count_coverage_mismatches(v.records);
        if (progress) progress(run);
        result.runs.push_back(std::move(run));
      }
    }
  }
  result.cells = aggregate_runs(result.runs);
  return result;
}

std::vector<SweepCell> aggregate_runs(const std::vector<SweepRun>& runs) {
  struct Columns {
    std::vector<double> racr, acr, aps, radius, median_radius, saturated;
  };
  std::map<std::tuple<std::string, bool, int>, Columns> groups;
  for (const auto& run : runs) {
    for (const auto& h : run.summary.horizons) {
      // Adaptive before fixed within a predictor, matching the table layout.
      auto& g = groups[{to_string(run.predictor), !run.adaptive, h.horizon}];
      g.racr.push_back(h.racr.mean);
      g.acr.push_back(h.acr.mean);
      g.aps.push_back(h.aps.mean);
      g.radius.push_back(h.radius.mean);
      g.median_radius.push_back(h.median_radius);
      g.saturated.push_back(static_cast<double>(h.saturated) / static_cast<double>(h.count));
    }
  }
  std::vector<SweepCell> cells;
  for (const auto& [key, g] : groups) {
    SweepCell c;
    c.predictor = std::get<0>(key);
    c.adaptive = !std::get<1>(key);
    c.horizon = std::get<2>(key);
    c.racr = describe(g.racr);
    c.acr = describe(g.acr);
    c.aps = describe(g.aps);
    c.radius = describe(g.radius);
    c.median_radius = describe(g.median_radius);
    c.saturated_fraction = describe(g.saturated);
    cells.push_back(c);
  }
  return cells;
}

const SweepCell& SweepResult::cell(FilterKind predictor, bool adaptive, int horizon) const {
  for (const auto& c : cells)
    if (c.predictor == to_string(predictor) && c.adaptive == adaptive && c.horizon == horizon) return c;
  throw std::out_of_range("sweep: no cell for " + variant_key(to_string(predictor), adaptive) + " h=" +
                          std::to_string(horizon));
}

nlohmann::json sweep_to_json(const SweepResult& result) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& c : result.cells) {
    auto& v = doc[variant_key(c.predictor, c.adaptive)];
    v["predictor"] = c.predictor;
    v["adaptive"] = c.adaptive;
    v["horizons"][std::to_string(c.horizon)] = {{"racr", to_json(c.racr)},
                                                {"acr", to_json(c.acr)},
                                                {"aps", to_json(c.aps)},
                                                {"radius", to_json(c.radius)},
                                                {"median_radius", to_json(c.median_radius)},
                                                {"saturated_fraction", to_json(c.saturated_fraction)}};
  }
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : result.runs) {
    nlohmann::json horizons = nlohmann::json::object();
    for (const auto& h : r.summary.horizons) horizons[std::to_string(h.horizon)] = to_json(h);
    runs.push_back({{"seed", r.seed},
                    {"predictor", to_string(r.predictor)},
                    {"adaptive", r.adaptive},
                    {"alpha_bound_violations", r.alpha_bound_violations},
                    {"coverage_flag_mismatches", r.coverage_flag_mismatches},
                    {"degenerate_steps", r.diagnostics.degenerate_steps},
                    {"c_star_exceedances", r.diagnostics.c_star_exceedances},
                    {"horizons", horizons}});
  }
  return nlohmann::json{{"cells", doc}, {"runs", runs}};
}

std::string format_table(const SweepResult& result) {
  std::map<int, std::vector<const SweepCell*>> by_h;
  for (const auto& c : result.cells) by_h[c.horizon].push_back(&c);

  std::ostringstream out;
  out << std::fixed;
  for (const auto& [h, cells] : by_h) {
    // Columns ordered as (N-A) PF, (N-A) APF, (A) PF, (A) APF.
    auto ordered = cells;
    std::sort(ordered.begin(), ordered.end(), [](const SweepCell* a, const SweepCell* b) {
      if (a->adaptive != b->adaptive) return !a->adaptive;
      return a->predictor == "pf" && b->predictor != "pf";
    });
    out << "horizon " << h << " (n seeds = " << (ordered.empty() ? 0 : ordered.front()->racr.n) << ")\n";
    out << std::left << std::setw(8) << "Metric";
    for (const auto* c : ordered)
      out << std::right << std::setw(14) << ((c->adaptive ? "(A) " : "(N-A) ") + std::string(c->predictor == "pf" ? "PF" : "APF"));
    out << '\n';
    auto row = [&](const char* name, auto pick, int precision) {
      out << std::left << std::setw(8) << name << std::setprecision(precision);
      for (const auto* c : ordered) out << std::right << std::setw(14) << pick(*c).mean;
      out << '\n';
    };
    row("RACR", [](const SweepCell& c) { return c.racr; }, 4);
    row("ACR", [](const SweepCell& c) { return c.acr; }, 4);
    row("APS", [](const SweepCell& c) { return c.aps; }, 2);
    row("radius", [](const SweepCell& c) { return c.radius; }, 3);
    row("med. r", [](const SweepCell& c) { return c.median_radius; }, 3);
    row("sat.", [](const SweepCell& c) { return c.saturated_fraction; }, 4);
    out << '\n';
  }
  return out.str();
}

std::string cells_to_csv(const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  out << "predictor,adaptive,horizon,metric,mean,ci_low,ci_high,n\n";
  for (const auto& c : cells) {
    const std::pair<const char*, const MetricStats*> metrics[] = {
        {"racr", &c.racr},   {"acr", &c.acr}, {"aps", &c.aps}, {"radius", &c.radius}, {"median_radius", &c.median_radius},
        {"saturated_fraction", &c.saturated_fraction}};
    for (const auto& [name, s] : metrics)
      out << c.predictor << ',' << (c.adaptive ? 1 : 0) << ',' << c.horizon << ',' << name << ','
          << format_double(s->mean) << ',' << format_double(s->ci_low) << ',' << format_double(s->ci_high) << ','
          << s->n << '\n';
  }
  return out.str();
}

}  // namespace acipf
