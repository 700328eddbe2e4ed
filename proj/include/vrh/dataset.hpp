#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vrh/video.hpp"

namespace vrh {

inline constexpr int kDefaultClassCount = 174;
inline constexpr int kDefaultFrameBudget = 16;

enum class Split { Train, Val, Test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

// class_id -> label text. Loaded from `class_id<TAB>label` lines.
class LabelTable {
 public:
  LabelTable() = default;
  explicit LabelTable(std::map<int, std::string> labels) : labels_(std::move(labels)) {}

  // 0..n-1 labelled "class_<id>".
  static LabelTable numbered(int n);
  static LabelTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool contains(int id) const { return labels_.count(id) != 0; }
  const std::string& label(int id) const;
  int size() const { return static_cast<int>(labels_.size()); }
  // Number of logits a classifier over this table needs (max id + 1).
  int class_count() const { return labels_.empty() ? 0 : labels_.rbegin()->first + 1; }
  const std::map<int, std::string>& entries() const { return labels_; }

  // Resolves a class reference: a decimal id, an exact label, a
  // case-insensitive label, or an unambiguous prefix (a trailing "..." is
  // stripped first). Returns nullopt when nothing or several labels match.
  std::optional<int> resolve(std::string_view ref) const;

 private:
  std::map<int, std::string> labels_;
};

struct ManifestEntry {
  std::string clip_id;
  std::string path;
  int class_id = 0;
  Split split = Split::Test;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

// Provenance of a materialised subset.
struct SubsetInfo {
  std::uint64_t seed = 0;
  std::map<int, int> per_class_counts;

  friend bool operator==(const SubsetInfo&, const SubsetInfo&) = default;
};

struct ClipManifest {
  std::vector<ManifestEntry> entries;
  std::optional<SubsetInfo> subset;
  // Directory relative paths are resolved against.
  std::filesystem::path root;

  std::size_t size() const { return entries.size(); }
  std::vector<int> classes() const;
  std::map<int, int> class_counts() const;
  ClipManifest filter_split(Split s) const;

  friend bool operator==(const ClipManifest& a, const ClipManifest& b) {
    return a.entries == b.entries && a.subset == b.subset;
  }
};

// Parses `clip_id<TAB>relative_path<TAB>class_id<TAB>split` lines. Lines
// starting with '#' are comments, except `#@seed` / `#@counts` which restore
// subset provenance. Every class id must be present in `labels`.
ClipManifest load_manifest(const std::filesystem::path& path, const LabelTable& labels);
ClipManifest load_manifest(const std::filesystem::path& path);
ClipManifest parse_manifest(std::string_view text, const LabelTable& labels, std::string_view source = "<memory>");
void write_manifest(const std::filesystem::path& path, const ClipManifest& manifest);
std::string format_manifest(const ClipManifest& manifest);

// Uniform temporal sampling: output frame i is raw frame floor(i * L / T).
// When L < T this repeats frames by nearest lower index.
std::vector<int> uniform_frame_indices(int raw_length, int frames);
VideoClip sample_frames(const VideoClip& raw, int frames = kDefaultFrameBudget);

struct SubsetSpec {
  std::vector<int> classes;
  // Exactly one of per_class / total is used. With `total`, every class gets
  // floor(total / C) clips and a seeded choice of total % C classes gets one more.
  int per_class = 0;
  std::optional<int> total;
  std::uint64_t seed = 42;
  std::optional<Split> split;
};

ClipManifest stratified_subset(const ClipManifest& manifest, const SubsetSpec& spec);

class ClassTaxonomy;
// All and only the clips whose class is one of the taxonomy's pretend classes.
ClipManifest pretend_subset(const ClipManifest& manifest, const ClassTaxonomy& taxonomy);

// Decoders turn a payload path into a full-length clip.
using DecoderFn = std::function<VideoClip(const std::filesystem::path&)>;

class DecoderRegistry {
 public:
  static DecoderRegistry& instance();
  void add(std::string name, DecoderFn fn);
  const DecoderFn& get(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  DecoderRegistry();
  std::map<std::string, DecoderFn, std::less<>> decoders_;
};

// Decode an entry and sample it to `frames` frames.
VideoClip load_clip(const ManifestEntry& entry, const std::filesystem::path& root, std::string_view decoder,
                    int frames = kDefaultFrameBudget);

}  // namespace vrh
