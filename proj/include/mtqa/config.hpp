#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtqa/datamodel.hpp"
#include "mtqa/roi.hpp"
#include "mtqa/trainer.hpp"

namespace mtqa {

/// Every tunable of every subcommand, resolved as
/// CLI flag > config file > preset > built-in default.
struct RunConfig {
  std::string preset = "desk";
  SynthConfig synth;
  SplitSizes sizes;
  long n_labeled = -1;  // -1: every training slice keeps its label
  std::uint64_t data_seed = 0;
  double area_min_frac = 0.01;
  float seg_threshold = kDefaultSegThreshold;
  RoiWeighting roi_weighting = RoiWeighting::Normalized;
  TrainConfig train;
  std::vector<double> q_list{0.1, 0.2, 0.3, 0.4, 0.5};
  int trials = 100;
  std::uint64_t reacq_seed = 0;

  /// Checks cross-field constraints of the sections a subcommand uses.
  void validate() const;
  RoiConfig roi_config() const { return RoiConfig::from_fraction(area_min_frac, synth.image_size); }
};

struct ConfigKey {
  std::string name;  // underscore form; the CLI flag is --name with '-' for '_'
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<ConfigKey>& config_keys();
const ConfigKey* find_config_key(const std::string& name);

/// Applies the named preset (desk, paper, tiny) to training and image size.
void apply_preset(RunConfig& cfg, const std::string& preset);

/// Flat text: one `key = value` per line, '#' starts a comment. Unknown keys
/// are rejected with the key and line number.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

/// Resolution order: defaults, preset (flag over file), file keys, flag keys.
RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_entries,
                         const std::map<std::string, std::string>& flag_entries);

/// Serializes every key in config-file syntax.
std::string dump_config(const RunConfig& cfg);

}  // namespace mtqa
