#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vrh/dataset.hpp"
#include "vrh/probes.hpp"

namespace vrh {

inline constexpr std::array<std::string_view, 5> kAxes = {"discriminability", "corruption", "pretend", "occlusion",
                                                          "temporal"};
bool is_axis(std::string_view name);

struct DatasetConfig {
  std::string manifest;
  std::string labels;
  // Directory relative clip paths resolve against; defaults to the manifest's directory.
  std::string root;
  std::string decoder = "raw";
  int frames = kDefaultFrameBudget;
  // Directory holding class_tiers.tsv, pretend_categories.tsv, antonyms.tsv.
  std::string taxonomy_dir;
};

struct EncoderEntry {
  // Registry name ("toy", "external", or a plugin's).
  std::string type;
  nlohmann::json options = nlohmann::json::object();
};

// Which clips an axis evaluates on.
//   classes: "all", "tiers", "pretend", or a list of ids/labels.
//   per_class / total: stratified sampling; neither takes every matching clip.
struct SubsetConfig {
  nlohmann::json classes = "all";
  int per_class = 0;
  std::optional<int> total;
  std::string split = "test";
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<EncoderEntry> encoders;
  std::vector<std::string> axes;
  std::map<std::string, SubsetConfig> subsets;
  // Per-axis grid overrides, see default_config().
  nlohmann::json grids = nlohmann::json::object();
  ProbeConfig probe;
  bool sweep = false;
  std::uint64_t seed = 42;
  std::string output_dir = "vrh_out";
  // Empty means <output_dir>.
  std::string cache_root;
  int workers = 1;
  // Fraction of cache hits re-encoded and compared byte for byte.
  double audit_fraction = 0.0;
  double alpha = 0.01;
  std::vector<std::string> plugins;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  // SHA-256 of the canonical resolved JSON.
  std::string hash() const;
  std::filesystem::path cache_dir() const;
};

// The fully defaulted configuration as JSON.
nlohmann::json default_config();

// Precedence, lowest first: defaults, config file, VRH_CACHE_ROOT /
// VRH_WORKERS, then `key.path=value` overrides. Unknown keys are ConfigErrors.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides = {});
// Applies one `a.b.c=value` override; the value is parsed as JSON when it
// parses, otherwise taken as a string.
void apply_override(nlohmann::json& config, std::string_view assignment);

void write_resolved_config(const std::filesystem::path& dir, const ExperimentConfig& config);

}  // namespace vrh
