#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "acipf/experiment.hpp"
#include "acipf/summary.hpp"

namespace acipf {

enum class RecordFormat { kCsv, kJsonLines };

inline constexpr const char* kCsvHeader =
    "time,horizon,pred_x,pred_y,radius,alpha_used,lambda,covered,true_x,true_y,ess,degenerate";

// Shortest round-trip decimal form; "nan" for NaN.
std::string format_double(double v);

void write_records(std::ostream& out, std::span<const StepRecord> records, RecordFormat format);
std::vector<StepRecord> read_records(std::istream& in, RecordFormat format);

void export_records(std::span<const StepRecord> records, RecordFormat format,
                    const std::filesystem::path& path);
std::vector<StepRecord> import_records(const std::filesystem::path& path, RecordFormat format);

// Picks JSON-lines for .jsonl/.ndjson extensions, CSV otherwise.
RecordFormat format_for_path(const std::filesystem::path& path);

nlohmann::json to_json(const MetricStats& s);
nlohmann::json to_json(const HorizonSummary& s);
// {"<predictor>/<adaptive|fixed>": {"horizons": {"1": {...}, ...}, ...}, ...}
nlohmann::json summaries_to_json(std::span<const RunSummary> summaries);
nlohmann::json config_to_json(const ExperimentConfig& config);

void export_summaries(std::span<const RunSummary> summaries, const std::filesystem::path& path,
                      const nlohmann::json& extra = nlohmann::json::object());

std::string variant_key(const std::string& predictor, bool adaptive);

}  // namespace acipf
