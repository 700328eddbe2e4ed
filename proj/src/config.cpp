#include "vrh/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "vrh/common.hpp"
#include "vrh/hashing.hpp"
#include "vrh/perturb.hpp"

namespace vrh {

using nlohmann::json;

bool is_axis(std::string_view name) { return std::find(kAxes.begin(), kAxes.end(), name) != kAxes.end(); }

namespace {

json subset_json(json classes, int per_class, std::optional<int> total) {
  return {{"classes", std::move(classes)},
          {"per_class", per_class},
          {"total", total ? json(*total) : json(nullptr)},
          {"split", "test"}};
}

json default_grids() {
  json corr_types = json::array();
  for (auto c : kAllCorruptions) corr_types.push_back(to_string(c));
  json temporal = json::array();
  for (auto c : kAllTemporalConditions) temporal.push_back(to_string(c));
  return {{"corruption", {{"types", corr_types}, {"severities", kCorruptionSeverities}}},
          {"occlusion",
           {{"moving_block", kMovingBlockAlphas},
            {"temporal_dropout", kTemporalDropoutBetas},
            {"patch_dropout", kPatchDropoutGammas},
            {"tau", 2},
            {"patch", 16},
            {"pad", false}}},
          {"temporal", {{"conditions", temporal}, {"segments", 4}, {"interleave_depth", 2}}}};
}

// Objects merge key by key; anything else in `patch` replaces.
void deep_merge(json& base, const json& patch) {
  if (!base.is_object() || !patch.is_object()) {
    base = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) deep_merge(base[it.key()], it.value());
}

void check_keys(const json& defaults, const json& user, const std::string& path) {
  if (!defaults.is_object() || !user.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string p = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError(fmt::format("unknown config key '{}'", p));
    // The probe block is checked by ProbeConfig itself.
    if (p != "probe") check_keys(defaults.at(it.key()), it.value(), p);
  }
}

template <typename T>
T get_as(const json& j, std::string_view key) {
  try {
    return j.at(std::string(key)).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
  }
}

}  // namespace

json default_config() {
  const ExperimentConfig c;
  json axes = json::array();
  for (auto a : kAxes) axes.push_back(a);
  return {{"dataset",
           {{"manifest", ""},
            {"labels", ""},
            {"root", ""},
            {"decoder", "raw"},
            {"frames", kDefaultFrameBudget},
            {"taxonomy_dir", ""}}},
          {"encoders", json::array({{{"type", "toy"}, {"options", json::object()}}})},
          {"axes", axes},
          {"subsets",
           {{"discriminability", subset_json("tiers", 20, std::nullopt)},
            {"corruption", subset_json("all", 0, 500)},
            {"pretend", subset_json("pretend", 0, std::nullopt)},
            {"occlusion", subset_json("all", 10, std::nullopt)},
            {"temporal", subset_json("all", 0, 1000)}}},
          {"grids", default_grids()},
          {"probe", c.probe.to_json()},
          {"sweep", c.sweep},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"cache_root", c.cache_root},
          {"workers", c.workers},
          {"audit_fraction", c.audit_fraction},
          {"alpha", c.alpha},
          {"plugins", json::array()}};
}

json ExperimentConfig::to_json() const {
  json j = default_config();
  j["dataset"] = {{"manifest", dataset.manifest}, {"labels", dataset.labels},   {"root", dataset.root},
                  {"decoder", dataset.decoder},   {"frames", dataset.frames},   {"taxonomy_dir", dataset.taxonomy_dir}};
  j["encoders"] = json::array();
  for (const auto& e : encoders) j["encoders"].push_back({{"type", e.type}, {"options", e.options}});
  j["axes"] = axes;
  j["subsets"] = json::object();
  for (const auto& [axis, s] : subsets) {
    j["subsets"][axis] = {{"classes", s.classes},
                          {"per_class", s.per_class},
                          {"total", s.total ? json(*s.total) : json(nullptr)},
                          {"split", s.split}};
  }
  j["grids"] = grids;
  j["probe"] = probe.to_json();
  j["sweep"] = sweep;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["cache_root"] = cache_root;
  j["workers"] = workers;
  j["audit_fraction"] = audit_fraction;
  j["alpha"] = alpha;
  j["plugins"] = plugins;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& user) {
  json j = default_config();
  check_keys(j, user, "");
  deep_merge(j, user);

  ExperimentConfig c;
  const auto& d = j.at("dataset");
  c.dataset.manifest = get_as<std::string>(d, "manifest");
  c.dataset.labels = get_as<std::string>(d, "labels");
  c.dataset.root = get_as<std::string>(d, "root");
  c.dataset.decoder = get_as<std::string>(d, "decoder");
  c.dataset.frames = get_as<int>(d, "frames");
  c.dataset.taxonomy_dir = get_as<std::string>(d, "taxonomy_dir");
  if (c.dataset.frames < 1) throw ConfigError("dataset.frames must be >= 1");

  if (!j.at("encoders").is_array()) throw ConfigError("encoders must be a list");
  for (const auto& e : j.at("encoders")) {
    if (!e.is_object()) throw ConfigError("each encoder entry must be an object with 'type'");
    for (auto it = e.begin(); it != e.end(); ++it) {
      if (it.key() != "type" && it.key() != "options") {
        throw ConfigError(fmt::format("unknown encoder entry key '{}'", it.key()));
      }
    }
    EncoderEntry entry;
    entry.type = get_as<std::string>(e, "type");
    entry.options = e.value("options", json::object());
    c.encoders.push_back(std::move(entry));
  }

  c.axes = get_as<std::vector<std::string>>(j, "axes");
  for (const auto& a : c.axes) {
    if (!is_axis(a)) throw ConfigError(fmt::format("unknown axis '{}'", a));
  }
  for (auto it = j.at("subsets").begin(); it != j.at("subsets").end(); ++it) {
    SubsetConfig s;
    const auto& v = it.value();
    s.classes = v.at("classes");
    if (!(s.classes.is_string() || s.classes.is_array())) {
      throw ConfigError(fmt::format("subsets.{}.classes must be a keyword or a list", it.key()));
    }
    s.per_class = get_as<int>(v, "per_class");
    if (!v.at("total").is_null()) s.total = get_as<int>(v, "total");
    s.split = get_as<std::string>(v, "split");
    parse_split(s.split);
    if (s.per_class < 0 || (s.total && *s.total < 0)) throw ConfigError("subset counts must be >= 0");
    if (s.per_class > 0 && s.total) {
      throw ConfigError(fmt::format("subsets.{}: per_class and total are mutually exclusive", it.key()));
    }
    c.subsets[it.key()] = std::move(s);
  }
  c.grids = j.at("grids");
  c.probe = ProbeConfig::from_json(j.at("probe"));
  c.probe.validate();
  c.sweep = get_as<bool>(j, "sweep");
  c.seed = get_as<std::uint64_t>(j, "seed");
  c.output_dir = get_as<std::string>(j, "output_dir");
  c.cache_root = get_as<std::string>(j, "cache_root");
  c.workers = get_as<int>(j, "workers");
  c.audit_fraction = get_as<double>(j, "audit_fraction");
  c.alpha = get_as<double>(j, "alpha");
  c.plugins = get_as<std::vector<std::string>>(j, "plugins");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (!(c.audit_fraction >= 0.0 && c.audit_fraction <= 1.0)) throw ConfigError("audit_fraction must be in [0, 1]");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
  return c;
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  // Settings that cannot change any result value.
  for (const char* k : {"output_dir", "cache_root", "workers", "audit_fraction"}) j.erase(k);
  return sha256_hex(j.dump());
}

std::filesystem::path ExperimentConfig::cache_dir() const {
  return cache_root.empty() ? std::filesystem::path(output_dir) : std::filesystem::path(cache_root);
}

void apply_override(json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(fmt::format("override '{}' is not of the form key=value", assignment));
  }
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &config;
  const auto parts = split(assignment.substr(0, eq), '.');
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].empty()) throw ConfigError(fmt::format("override '{}' has an empty key", assignment));
    if (!node->is_object()) *node = json::object();
    node = &(*node)[parts[i]];
  }
  *node = std::move(value);
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  json user = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError(fmt::format("cannot open config file {}", file->string()));
    try {
      user = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError(fmt::format("{}: {}", file->string(), e.what()));
    }
    if (!user.is_object()) throw ConfigError(fmt::format("{}: top level must be an object", file->string()));
  }
  if (const char* env = std::getenv("VRH_CACHE_ROOT"); env && *env) user["cache_root"] = env;
  if (const char* env = std::getenv("VRH_WORKERS"); env && *env) {
    char* end = nullptr;
    const long w = std::strtol(env, &end, 10);
    if (*end != '\0' || w < 1) throw ConfigError(fmt::format("VRH_WORKERS='{}' is not a positive integer", env));
    user["workers"] = w;
  }
  for (const auto& o : overrides) apply_override(user, o);
  return ExperimentConfig::from_json(user);
}

void write_resolved_config(const std::filesystem::path& dir, const ExperimentConfig& config) {
  json j = config.to_json();
  j["config_hash"] = config.hash();
  j["harness_version"] = kHarnessVersion;
  atomic_write(dir / "config.resolved.json", j.dump(2) + "\n");
}

}  // namespace vrh
