#include "vrh/store.hpp"

#include <fmt/format.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "vrh/hashing.hpp"

namespace vrh {

static_assert(std::endian::native == std::endian::little, "embedding payloads assume a little-endian host");

std::string encode_path_component(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                      c == '_' || c == '-';
    if (keep) {
      out.push_back(static_cast<char>(c));
    } else {
      out += fmt::format("%{:02X}", c);
    }
  }
  if (out.empty() || out == "." || out == "..") out = "%" + out;
  return out;
}

std::string serialize_embedding(const EmbeddingRecord& rec, const nlohmann::json& extra_header) {
  rec.validate();
  std::string payload;
  payload.resize((rec.gap.size() + rec.tokens.size()) * sizeof(float));
  std::memcpy(payload.data(), rec.gap.data(), rec.gap.size() * sizeof(float));
  if (!rec.tokens.empty()) {
    std::memcpy(payload.data() + rec.gap.size() * sizeof(float), rec.tokens.data(), rec.tokens.size() * sizeof(float));
  }
  nlohmann::json h = nlohmann::json::object();
  if (extra_header.is_object()) h = extra_header;
  h["clip_id"] = rec.clip_id;
  h["encoder_id"] = rec.encoder_id;
  h["perturbation"] = rec.perturbation;
  h["dim"] = rec.dim();
  h["n_tokens"] = rec.n_tokens;
  h["dtype"] = "f32le";
  h["sha256"] = sha256_hex(payload);
  return h.dump() + "\n" + payload;
}

EmbeddingFile parse_embedding(std::string_view bytes, std::string_view source) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw DataError(fmt::format("{}: missing embedding header", source));
  EmbeddingFile f;
  try {
    f.header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: bad embedding header: {}", source, e.what()));
  }
  const auto& h = f.header;
  if (!h.is_object() || h.value("dtype", "") != "f32le") {
    throw DataError(fmt::format("{}: unsupported embedding dtype", source));
  }
  const int dim = h.value("dim", -1);
  const int n_tokens = h.value("n_tokens", -1);
  if (dim < 1 || n_tokens < 0) throw DataError(fmt::format("{}: bad embedding shape", source));
  const auto payload = bytes.substr(nl + 1);
  const std::size_t count = static_cast<std::size_t>(dim) * (1 + static_cast<std::size_t>(n_tokens));
  if (payload.size() != count * sizeof(float)) {
    throw DataError(fmt::format("{}: payload is {} bytes, header implies {}", source, payload.size(),
                                count * sizeof(float)));
  }
  if (sha256_hex(payload) != h.value("sha256", "")) throw DataError(fmt::format("{}: checksum mismatch", source));
  auto& r = f.record;
  r.clip_id = h.value("clip_id", "");
  r.encoder_id = h.value("encoder_id", "");
  r.perturbation = h.value("perturbation", "");
  r.n_tokens = n_tokens;
  r.gap.resize(static_cast<std::size_t>(dim));
  std::memcpy(r.gap.data(), payload.data(), r.gap.size() * sizeof(float));
  r.tokens.resize(static_cast<std::size_t>(dim) * n_tokens);
  if (!r.tokens.empty()) {
    std::memcpy(r.tokens.data(), payload.data() + r.gap.size() * sizeof(float), r.tokens.size() * sizeof(float));
  }
  return f;
}

void write_embedding_file(const std::filesystem::path& path, const EmbeddingRecord& rec,
                          const nlohmann::json& extra_header) {
  atomic_write(path, serialize_embedding(rec, extra_header));
}

EmbeddingFile read_embedding_file(const std::filesystem::path& path) {
  return parse_embedding(read_file(path), path.string());
}

std::filesystem::path EmbeddingStore::path_for(const CacheKey& key) const {
  return root_ / "cache" / encode_path_component(key.encoder_id) / encode_path_component(key.perturbation) /
         (encode_path_component(key.clip_id) + ".emb");
}

void EmbeddingStore::put(const CacheKey& key, const EmbeddingRecord& rec) const {
  if (rec.clip_id != key.clip_id || rec.encoder_id != key.encoder_id || rec.perturbation != key.perturbation) {
    throw DataError(fmt::format("record {}/{}/{} does not match its cache key", rec.encoder_id, rec.perturbation,
                                rec.clip_id));
  }
  nlohmann::json extra = {{"dataset_hash", key.dataset_hash}, {"harness_version", key.harness_version}};
  write_embedding_file(path_for(key), rec, extra);
}

std::optional<EmbeddingRecord> EmbeddingStore::get(const CacheKey& key) const {
  const auto p = path_for(key);
  std::ifstream probe(p, std::ios::binary);
  if (!probe) return std::nullopt;
  probe.close();
  auto f = read_embedding_file(p);
  const auto& h = f.header;
  if (h.value("harness_version", "") != key.harness_version) {
    throw DataError(fmt::format("{}: written by harness {}, expected {}", p.string(), h.value("harness_version", "?"),
                                key.harness_version));
  }
  if (h.value("dataset_hash", "") != key.dataset_hash) {
    throw DataError(fmt::format("{}: dataset hash mismatch", p.string()));
  }
  if (f.record.clip_id != key.clip_id || f.record.encoder_id != key.encoder_id ||
      f.record.perturbation != key.perturbation) {
    throw DataError(fmt::format("{}: header does not match the requested key", p.string()));
  }
  return std::move(f.record);
}

bool EmbeddingStore::contains(const CacheKey& key) const { return std::filesystem::exists(path_for(key)); }

namespace {

void write_line(const std::filesystem::path& path, const nlohmann::json& j, std::ios::openmode mode) {
  std::ofstream os(path, mode | std::ios::binary);
  if (!os) throw DataError(fmt::format("cannot open results log {}", path.string()));
  os << j.dump() << '\n';
  os.flush();
  if (!os) throw DataError(fmt::format("write to {} failed", path.string()));
}

void check_header(const nlohmann::json& h, const std::filesystem::path& path) {
  if (!h.is_object() || h.value("schema", "") != kResultsSchema) {
    throw DataError(fmt::format("{}: results schema {} not supported (expected {})", path.string(),
                                h.is_object() ? h.value("schema", "?") : "?", kResultsSchema));
  }
}

}  // namespace

ResultsLog ResultsLog::create(const std::filesystem::path& path, const nlohmann::json& header) {
  nlohmann::json h = header.is_object() ? header : nlohmann::json::object();
  h["schema"] = kResultsSchema;
  if (!h.contains("harness_version")) h["harness_version"] = kHarnessVersion;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_line(path, h, std::ios::out | std::ios::trunc);
  return ResultsLog(path);
}

ResultsLog ResultsLog::open(const std::filesystem::path& path) {
  check_header(read(path).header, path);
  return ResultsLog(path);
}

void ResultsLog::append(const nlohmann::json& record) { write_line(path_, record, std::ios::app); }

void ResultsLog::append(const std::vector<nlohmann::json>& records) {
  std::ofstream os(path_, std::ios::app | std::ios::binary);
  if (!os) throw DataError(fmt::format("cannot open results log {}", path_.string()));
  for (const auto& r : records) os << r.dump() << '\n';
  os.flush();
  if (!os) throw DataError(fmt::format("write to {} failed", path_.string()));
}

ResultsLog::Contents ResultsLog::read(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  Contents c;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    ++lineno;
    if (nl == std::string::npos) {
      // Interrupted append: the last line never got its newline.
      c.truncated = true;
      break;
    }
    const std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}:{}: malformed record: {}", path.string(), lineno, e.what()));
    }
    if (lineno == 1) {
      check_header(j, path);
      c.header = std::move(j);
    } else {
      c.records.push_back(std::move(j));
    }
  }
  if (c.header.is_null()) throw DataError(fmt::format("{}: empty results log", path.string()));
  return c;
}

bool record_matches(const nlohmann::json& record, const std::map<std::string, std::string>& filter) {
  for (const auto& [k, v] : filter) {
    const nlohmann::json* field = nullptr;
    if (record.contains(k)) {
      field = &record.at(k);
    } else if (record.contains("group") && record.at("group").contains(k)) {
      field = &record.at("group").at(k);
    }
    if (!field) return false;
    if (field->is_string() ? field->get<std::string>() != v : field->dump() != v) return false;
  }
  return true;
}

std::vector<nlohmann::json> ResultsLog::query(const std::filesystem::path& path,
                                              const std::map<std::string, std::string>& filter) {
  std::vector<nlohmann::json> out;
  for (auto& r : read(path).records) {
    if (record_matches(r, filter)) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace vrh
