#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "acipf/experiment.hpp"

namespace acipf {

struct SettingInfo {
  std::string key;
  std::string help;
};

// Keys accepted both as `--key value` flags and as `key = value` lines in a
// config file.
const std::vector<SettingInfo>& setting_table();

// Throws std::invalid_argument on an unknown key or malformed value.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

// `key = value` per line; blank lines and lines starting with '#' are ignored.
void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path);

ExperimentConfig preset_by_name(const std::string& name);

// Relative output paths are resolved under $ACIPF_OUTPUT_DIR when it is set.
std::filesystem::path resolve_output_path(const std::string& path);

int cli_main(int argc, char** argv);
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace acipf
