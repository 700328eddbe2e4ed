#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vrh/common.hpp"
#include "vrh/encoders.hpp"

namespace vrh {

struct CacheKey {
  std::string dataset_hash;
  std::string clip_id;
  std::string encoder_id;
  std::string perturbation;
  std::string harness_version = std::string(kHarnessVersion);

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

// Percent-encodes every byte outside [A-Za-z0-9._-]; injective.
std::string encode_path_component(std::string_view s);

// .emb layout: one JSON header line, then little-endian float32 payload
// (gap vector, then tokens row-major). The header carries the payload SHA-256.
std::string serialize_embedding(const EmbeddingRecord& rec, const nlohmann::json& extra_header = {});
struct EmbeddingFile {
  nlohmann::json header;
  EmbeddingRecord record;
};
// Throws DataError on malformed input or checksum mismatch.
EmbeddingFile parse_embedding(std::string_view bytes, std::string_view source = "<memory>");
void write_embedding_file(const std::filesystem::path& path, const EmbeddingRecord& rec,
                          const nlohmann::json& extra_header = {});
EmbeddingFile read_embedding_file(const std::filesystem::path& path);

// Content-addressed embedding cache rooted at `root`:
//   <root>/cache/<encoder>/<perturbation>/<clip_id>.emb
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path_for(const CacheKey& key) const;

  // Atomic; an existing entry is replaced by a complete new file, never edited.
  void put(const CacheKey& key, const EmbeddingRecord& rec) const;
  // nullopt when absent. Throws DataError on checksum failure, and when the
  // stored dataset hash or harness version differs from the key.
  std::optional<EmbeddingRecord> get(const CacheKey& key) const;
  bool contains(const CacheKey& key) const;

 private:
  std::filesystem::path root_;
};

inline constexpr std::string_view kResultsSchema = "vrh.results/1";

// Line-delimited JSON log. The first line is a header object with "schema",
// "harness_version", "config_hash" and "axis"; every later line is a record.
class ResultsLog {
 public:
  // Starts a new log at `path` (truncating) with the given header fields.
  static ResultsLog create(const std::filesystem::path& path, const nlohmann::json& header);
  // Opens an existing log for appending; checks the schema.
  static ResultsLog open(const std::filesystem::path& path);

  void append(const nlohmann::json& record);
  void append(const std::vector<nlohmann::json>& records);
  const std::filesystem::path& path() const { return path_; }

  struct Contents {
    nlohmann::json header;
    std::vector<nlohmann::json> records;
    // True when a partial trailing line was dropped.
    bool truncated = false;
  };
  // Reads up to the last complete record. Schema mismatch throws DataError.
  static Contents read(const std::filesystem::path& path);
  // Records whose fields (top level or under "group") equal every filter value.
  static std::vector<nlohmann::json> query(const std::filesystem::path& path,
                                           const std::map<std::string, std::string>& filter = {});

 private:
  explicit ResultsLog(std::filesystem::path path) : path_(std::move(path)) {}
  std::filesystem::path path_;
};

bool record_matches(const nlohmann::json& record, const std::map<std::string, std::string>& filter);

}  // namespace vrh
