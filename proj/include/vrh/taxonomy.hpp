#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vrh/dataset.hpp"

namespace vrh {

enum class SemanticTier { DifferentVerb, SameVerb, PretendVsReal };
enum class ObjectSize { Small, Medium, Large };
enum class DetailSensitivity { High, Low };

std::string_view to_string(SemanticTier t);
std::string_view to_string(ObjectSize s);
std::string_view to_string(DetailSensitivity d);
SemanticTier parse_tier(std::string_view s);
ObjectSize parse_object_size(std::string_view s);
DetailSensitivity parse_sensitivity(std::string_view s);

// Reference sizes of the shipped class lists.
inline constexpr int kTierClassCount = 30;
inline constexpr int kPretendClassCount = 22;

class ClassTaxonomy {
 public:
  std::map<int, SemanticTier> semantic_tier;
  std::map<int, ObjectSize> object_size;
  std::map<int, DetailSensitivity> detail_sensitivity;
  // Non-fatal issues found while loading (unresolved antonym labels).
  std::vector<std::string> warnings;

  // Adds a symmetric pair. Rejects a == b and re-pairing a class to a
  // different partner.
  void add_antonym(int a, int b);
  std::optional<int> antonym_of(int class_id) const;
  const std::map<int, int>& antonyms() const { return antonym_; }

  // Classes carrying a pretend categorisation, ascending.
  std::vector<int> pretend_classes() const;
  std::vector<int> tier_classes() const;
  std::vector<int> classes_in(SemanticTier tier) const;

  // Throws DataError unless the tier map has 30 classes and the pretend maps
  // cover the same 22 classes.
  void validate_reference_counts() const;

 private:
  std::map<int, int> antonym_;
};

// Files: tiers `class<TAB>tier`; pretend `class<TAB>size<TAB>sensitivity`;
// antonyms `class_a<TAB>class_b`. A class column is either a numeric id or a
// label resolved through `labels`. Unknown tier/pretend classes are errors;
// unknown antonym classes are skipped with a warning.
ClassTaxonomy load_taxonomy(const std::filesystem::path& tiers, const std::filesystem::path& pretend,
                            const std::filesystem::path& antonyms, const LabelTable& labels);

// The taxonomy files shipped under data/taxonomy.
std::filesystem::path default_taxonomy_dir();
ClassTaxonomy load_default_taxonomy(const LabelTable& labels);

// Every label text referenced by the shipped taxonomy files.
std::vector<std::string> default_taxonomy_labels();

}  // namespace vrh
