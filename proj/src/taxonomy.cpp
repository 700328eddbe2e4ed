#include "vrh/taxonomy.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <sstream>

#include "vrh/common.hpp"

namespace vrh {

std::string_view to_string(SemanticTier t) {
  switch (t) {
    case SemanticTier::DifferentVerb: return "different_verb";
    case SemanticTier::SameVerb: return "same_verb";
    case SemanticTier::PretendVsReal: return "pretend_vs_real";
  }
  return "";
}

std::string_view to_string(ObjectSize s) {
  switch (s) {
    case ObjectSize::Small: return "small";
    case ObjectSize::Medium: return "medium";
    case ObjectSize::Large: return "large";
  }
  return "";
}

std::string_view to_string(DetailSensitivity d) { return d == DetailSensitivity::High ? "high" : "low"; }

SemanticTier parse_tier(std::string_view s) {
  if (s == "different_verb") return SemanticTier::DifferentVerb;
  if (s == "same_verb") return SemanticTier::SameVerb;
  if (s == "pretend_vs_real") return SemanticTier::PretendVsReal;
  throw DataError(fmt::format("unknown semantic tier '{}'", s));
}

ObjectSize parse_object_size(std::string_view s) {
  if (s == "small") return ObjectSize::Small;
  if (s == "medium") return ObjectSize::Medium;
  if (s == "large") return ObjectSize::Large;
  throw DataError(fmt::format("unknown object size '{}'", s));
}

DetailSensitivity parse_sensitivity(std::string_view s) {
  if (s == "high") return DetailSensitivity::High;
  if (s == "low") return DetailSensitivity::Low;
  throw DataError(fmt::format("unknown detail sensitivity '{}'", s));
}

void ClassTaxonomy::add_antonym(int a, int b) {
  if (a == b) throw DataError(fmt::format("class {} cannot be its own antonym", a));
  for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
    auto it = antonym_.find(x);
    if (it != antonym_.end() && it->second != y) {
      throw DataError(fmt::format("class {} already paired with {}, cannot pair with {}", x, it->second, y));
    }
  }
  antonym_[a] = b;
  antonym_[b] = a;
}

std::optional<int> ClassTaxonomy::antonym_of(int class_id) const {
  auto it = antonym_.find(class_id);
  if (it == antonym_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> ClassTaxonomy::pretend_classes() const {
  std::vector<int> out;
  for (const auto& [c, s] : object_size) out.push_back(c);
  return out;
}

std::vector<int> ClassTaxonomy::tier_classes() const {
  std::vector<int> out;
  for (const auto& [c, t] : semantic_tier) out.push_back(c);
  return out;
}

std::vector<int> ClassTaxonomy::classes_in(SemanticTier tier) const {
  std::vector<int> out;
  for (const auto& [c, t] : semantic_tier) {
    if (t == tier) out.push_back(c);
  }
  return out;
}

void ClassTaxonomy::validate_reference_counts() const {
  if (static_cast<int>(semantic_tier.size()) != kTierClassCount) {
    throw DataError(fmt::format("tier map has {} classes, expected {}", semantic_tier.size(), kTierClassCount));
  }
  if (static_cast<int>(object_size.size()) != kPretendClassCount) {
    throw DataError(fmt::format("pretend map has {} classes, expected {}", object_size.size(), kPretendClassCount));
  }
  for (const auto& [c, s] : object_size) {
    if (!detail_sensitivity.count(c)) throw DataError(fmt::format("pretend class {} lacks a sensitivity", c));
  }
}

namespace {

struct Row {
  int lineno;
  std::vector<std::string> cols;
};

std::vector<Row> read_rows(const std::filesystem::path& path, std::size_t ncols) {
  std::ifstream is(path);
  if (!is) throw DataError(fmt::format("cannot open taxonomy file {}", path.string()));
  std::vector<Row> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cols = split(t, '\t');
    for (auto& c : cols) c = trim(c);
    if (cols.size() != ncols) {
      throw DataError(fmt::format("{}:{}: expected {} tab-separated fields, got {}", path.string(), lineno, ncols,
                                  cols.size()));
    }
    rows.push_back({lineno, std::move(cols)});
  }
  return rows;
}

int resolve_or_throw(const LabelTable& labels, const std::string& ref, const std::filesystem::path& path, int lineno) {
  auto id = labels.resolve(ref);
  if (!id) throw DataError(fmt::format("{}:{}: unknown class '{}'", path.string(), lineno, ref));
  return *id;
}

}  // namespace

ClassTaxonomy load_taxonomy(const std::filesystem::path& tiers, const std::filesystem::path& pretend,
                            const std::filesystem::path& antonyms, const LabelTable& labels) {
  ClassTaxonomy tax;
  for (const auto& row : read_rows(tiers, 2)) {
    const int id = resolve_or_throw(labels, row.cols[0], tiers, row.lineno);
    if (!tax.semantic_tier.emplace(id, parse_tier(row.cols[1])).second) {
      throw DataError(fmt::format("{}:{}: class {} listed twice", tiers.string(), row.lineno, id));
    }
  }
  for (const auto& row : read_rows(pretend, 3)) {
    const int id = resolve_or_throw(labels, row.cols[0], pretend, row.lineno);
    if (!tax.object_size.emplace(id, parse_object_size(row.cols[1])).second) {
      throw DataError(fmt::format("{}:{}: class {} listed twice", pretend.string(), row.lineno, id));
    }
    tax.detail_sensitivity.emplace(id, parse_sensitivity(row.cols[2]));
  }
  for (const auto& row : read_rows(antonyms, 2)) {
    auto a = labels.resolve(row.cols[0]);
    auto b = labels.resolve(row.cols[1]);
    if (!a || !b) {
      tax.warnings.push_back(fmt::format("{}:{}: skipped antonym pair with unknown class '{}'", antonyms.string(),
                                         row.lineno, a ? row.cols[1] : row.cols[0]));
      continue;
    }
    tax.add_antonym(*a, *b);
  }
  return tax;
}

std::filesystem::path default_taxonomy_dir() {
  if (const char* env = std::getenv("VRH_DATA_DIR")) return std::filesystem::path(env) / "taxonomy";
  return std::filesystem::path(VRH_DATA_DIR) / "taxonomy";
}

ClassTaxonomy load_default_taxonomy(const LabelTable& labels) {
  const auto dir = default_taxonomy_dir();
  return load_taxonomy(dir / "class_tiers.tsv", dir / "pretend_categories.tsv", dir / "antonyms.tsv", labels);
}

std::vector<std::string> default_taxonomy_labels() {
  const auto dir = default_taxonomy_dir();
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& s) {
    if (seen.insert(s).second) out.push_back(s);
  };
  for (const auto& row : read_rows(dir / "class_tiers.tsv", 2)) add(row.cols[0]);
  for (const auto& row : read_rows(dir / "pretend_categories.tsv", 3)) add(row.cols[0]);
  for (const auto& row : read_rows(dir / "antonyms.tsv", 2)) {
    add(row.cols[0]);
    add(row.cols[1]);
  }
  return out;
}

}  // namespace vrh
