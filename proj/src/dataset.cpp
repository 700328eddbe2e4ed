#include "vrh/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "vrh/common.hpp"
#include "vrh/rng.hpp"
#include "vrh/taxonomy.hpp"

namespace vrh {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "test";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val" || s == "validation") return Split::Val;
  if (s == "test") return Split::Test;
  throw DataError(fmt::format("unknown split '{}'", s));
}

namespace {

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

LabelTable LabelTable::numbered(int n) {
  std::map<int, std::string> m;
  for (int i = 0; i < n; ++i) m.emplace(i, fmt::format("class_{}", i));
  return LabelTable(std::move(m));
}

LabelTable LabelTable::load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::map<int, std::string> m;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cols = split(t, '\t');
    auto id = cols.size() == 2 ? parse_int(trim(cols[0])) : std::nullopt;
    if (!id || *id < 0) {
      throw DataError(fmt::format("{}:{}: expected 'class_id<TAB>label'", path.string(), lineno));
    }
    std::string label = trim(cols[1]);
    if (!m.emplace(*id, label).second) {
      throw DataError(fmt::format("{}:{}: duplicate class id {}", path.string(), lineno, *id));
    }
    if (!seen.insert(label).second) {
      throw DataError(fmt::format("{}:{}: duplicate label '{}'", path.string(), lineno, label));
    }
  }
  return LabelTable(std::move(m));
}

void LabelTable::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError(fmt::format("cannot write {}", path.string()));
  os << "# class_id\tlabel\n";
  for (const auto& [id, label] : labels_) os << id << '\t' << label << '\n';
}

const std::string& LabelTable::label(int id) const {
  auto it = labels_.find(id);
  if (it == labels_.end()) throw DataError(fmt::format("unknown class id {}", id));
  return it->second;
}

std::optional<int> LabelTable::resolve(std::string_view ref) const {
  std::string r = trim(ref);
  if (auto id = parse_int(r)) {
    if (contains(*id)) return id;
    return std::nullopt;
  }
  for (const auto& [id, label] : labels_) {
    if (label == r) return id;
  }
  const std::string lr = lower(r);
  for (const auto& [id, label] : labels_) {
    if (lower(label) == lr) return id;
  }
  std::string prefix = lr;
  for (std::string_view ell : {"...", "\xE2\x80\xA6"}) {
    if (prefix.size() >= ell.size() && prefix.compare(prefix.size() - ell.size(), ell.size(), ell) == 0) {
      prefix = trim(prefix.substr(0, prefix.size() - ell.size()));
    }
  }
  std::optional<int> found;
  for (const auto& [id, label] : labels_) {
    if (lower(label).rfind(prefix, 0) == 0) {
      if (found) return std::nullopt;
      found = id;
    }
  }
  return found;
}

std::vector<int> ClipManifest::classes() const {
  std::set<int> s;
  for (const auto& e : entries) s.insert(e.class_id);
  return {s.begin(), s.end()};
}

std::map<int, int> ClipManifest::class_counts() const {
  std::map<int, int> m;
  for (const auto& e : entries) ++m[e.class_id];
  return m;
}

ClipManifest ClipManifest::filter_split(Split s) const {
  ClipManifest out;
  out.root = root;
  for (const auto& e : entries) {
    if (e.split == s) out.entries.push_back(e);
  }
  return out;
}

ClipManifest parse_manifest(std::string_view text, const LabelTable& labels, std::string_view source) {
  ClipManifest m;
  std::unordered_set<std::string> ids;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  SubsetInfo info;
  bool has_info = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line.front() == '#') {
      auto cols = split(line, '\t');
      if (cols[0] == "#@seed" && cols.size() == 2) {
        info.seed = std::stoull(cols[1]);
        has_info = true;
      } else if (cols[0] == "#@counts" && cols.size() == 2) {
        for (const auto& kv : split(cols[1], ',')) {
          if (kv.empty()) continue;
          auto p = split(kv, ':');
          auto k = p.size() == 2 ? parse_int(p[0]) : std::nullopt;
          auto v = p.size() == 2 ? parse_int(p[1]) : std::nullopt;
          if (!k || !v) throw DataError(fmt::format("{}:{}: malformed #@counts", source, lineno));
          info.per_class_counts[*k] = *v;
        }
        has_info = true;
      }
      continue;
    }
    auto cols = split(line, '\t');
    if (cols.size() != 4) {
      throw DataError(fmt::format("{}:{}: malformed row, expected 4 tab-separated fields, got {}", source, lineno,
                                  cols.size()));
    }
    ManifestEntry e;
    e.clip_id = trim(cols[0]);
    e.path = trim(cols[1]);
    auto cid = parse_int(trim(cols[2]));
    if (e.clip_id.empty() || e.path.empty() || !cid) {
      throw DataError(fmt::format("{}:{}: malformed row", source, lineno));
    }
    if (!is_safe_identifier(e.clip_id)) {
      throw DataError(fmt::format("{}:{}: clip id '{}' contains unsupported characters", source, lineno, e.clip_id));
    }
    e.class_id = *cid;
    try {
      e.split = parse_split(trim(cols[3]));
    } catch (const DataError&) {
      throw DataError(fmt::format("{}:{}: malformed row, unknown split '{}'", source, lineno, trim(cols[3])));
    }
    if (!labels.contains(e.class_id)) {
      throw DataError(fmt::format("{}:{}: unknown class label for class id {}", source, lineno, e.class_id));
    }
    if (!ids.insert(e.clip_id).second) {
      throw DataError(fmt::format("{}:{}: duplicate clip id '{}'", source, lineno, e.clip_id));
    }
    m.entries.push_back(std::move(e));
  }
  if (has_info) m.subset = info;
  return m;
}

ClipManifest load_manifest(const std::filesystem::path& path, const LabelTable& labels) {
  if (!std::filesystem::exists(path)) throw DataError(fmt::format("manifest not found: {}", path.string()));
  ClipManifest m = parse_manifest(read_file(path), labels, path.string());
  m.root = path.parent_path();
  return m;
}

ClipManifest load_manifest(const std::filesystem::path& path) {
  return load_manifest(path, LabelTable::numbered(kDefaultClassCount));
}

std::string format_manifest(const ClipManifest& manifest) {
  std::string out = "# clip_id\tpath\tclass_id\tsplit\n";
  if (manifest.subset) {
    out += fmt::format("#@seed\t{}\n", manifest.subset->seed);
    out += "#@counts\t";
    bool first = true;
    for (const auto& [k, v] : manifest.subset->per_class_counts) {
      out += fmt::format("{}{}:{}", first ? "" : ",", k, v);
      first = false;
    }
    out += '\n';
  }
  for (const auto& e : manifest.entries) {
    out += fmt::format("{}\t{}\t{}\t{}\n", e.clip_id, e.path, e.class_id, to_string(e.split));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const ClipManifest& manifest) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw DataError(fmt::format("cannot write {}", path.string()));
  os << format_manifest(manifest);
}

std::vector<int> uniform_frame_indices(int raw_length, int frames) {
  if (raw_length < 1) throw DataError("cannot sample frames from an empty video");
  if (frames < 1) throw DataError("frame budget must be >= 1");
  std::vector<int> idx(frames);
  for (int i = 0; i < frames; ++i) {
    idx[i] = static_cast<int>((static_cast<long long>(i) * raw_length) / frames);
  }
  return idx;
}

VideoClip sample_frames(const VideoClip& raw, int frames) {
  if (raw.frames < 1 || raw.data.empty()) {
    throw DataError(fmt::format("clip '{}': empty video", raw.clip_id));
  }
  raw.validate();
  const auto idx = uniform_frame_indices(raw.frames, frames);
  VideoClip out(raw.clip_id, raw.label, frames, raw.height, raw.width);
  for (int i = 0; i < frames; ++i) copy_frame(raw, idx[i], out, i);
  return out;
}

ClipManifest stratified_subset(const ClipManifest& manifest, const SubsetSpec& spec) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (spec.split && e.split != *spec.split) continue;
    by_class[e.class_id].push_back(i);
  }

  std::vector<int> classes = spec.classes;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::map<int, int> want;
  if (spec.total) {
    if (*spec.total < 0) throw DataError("subset total must be >= 0");
    if (classes.empty() && *spec.total > 0) throw DataError("subset total requested over zero classes");
    if (!classes.empty()) {
      const int base = *spec.total / static_cast<int>(classes.size());
      const int rem = *spec.total % static_cast<int>(classes.size());
      for (int c : classes) want[c] = base;
      Rng rng(mix_seed(spec.seed, fnv1a("subset-remainder")));
      auto order = rng.permutation(classes.size());
      for (int r = 0; r < rem; ++r) ++want[classes[order[r]]];
    }
  } else {
    if (spec.per_class < 0) throw DataError("per_class must be >= 0");
    for (int c : classes) want[c] = spec.per_class;
  }

  std::vector<std::string> shortfalls;
  for (const auto& [c, n] : want) {
    const int have = by_class.count(c) ? static_cast<int>(by_class[c].size()) : 0;
    if (have < n) shortfalls.push_back(fmt::format("class {} has {} clips, needs {} (short by {})", c, have, n, n - have));
  }
  if (!shortfalls.empty()) {
    std::string msg = "stratified subset: too few clips:";
    for (const auto& s : shortfalls) msg += "\n  " + s;
    throw DataError(msg);
  }

  ClipManifest out;
  out.root = manifest.root;
  SubsetInfo info;
  info.seed = spec.seed;
  for (const auto& [c, n] : want) {
    info.per_class_counts[c] = n;
    if (n == 0) continue;
    auto pool = by_class[c];
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(pool);
    pool.resize(static_cast<std::size_t>(n));
    std::sort(pool.begin(), pool.end());
    for (auto i : pool) out.entries.push_back(manifest.entries[i]);
  }
  out.subset = std::move(info);
  return out;
}

ClipManifest pretend_subset(const ClipManifest& manifest, const ClassTaxonomy& taxonomy) {
  const auto pretend = taxonomy.pretend_classes();
  if (pretend.empty()) throw DataError("taxonomy has no pretend-class assignments");
  if (static_cast<int>(pretend.size()) != kPretendClassCount) {
    throw DataError(fmt::format("taxonomy defines {} pretend classes, expected {}", pretend.size(), kPretendClassCount));
  }
  const std::set<int> keep(pretend.begin(), pretend.end());
  ClipManifest out;
  out.root = manifest.root;
  for (const auto& e : manifest.entries) {
    if (keep.count(e.class_id)) out.entries.push_back(e);
  }
  return out;
}

DecoderRegistry::DecoderRegistry() {
  decoders_.emplace("raw", [](const std::filesystem::path& p) { return read_raw_clip(p); });
}

DecoderRegistry& DecoderRegistry::instance() {
  static DecoderRegistry registry;
  return registry;
}

void DecoderRegistry::add(std::string name, DecoderFn fn) { decoders_[std::move(name)] = std::move(fn); }

const DecoderFn& DecoderRegistry::get(std::string_view name) const {
  auto it = decoders_.find(name);
  if (it == decoders_.end()) {
    std::string known;
    for (const auto& [k, v] : decoders_) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError(fmt::format("unknown decoder '{}' (available: {})", name, known));
  }
  return it->second;
}

std::vector<std::string> DecoderRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : decoders_) out.push_back(k);
  return out;
}

VideoClip load_clip(const ManifestEntry& entry, const std::filesystem::path& root, std::string_view decoder,
                    int frames) {
  const std::filesystem::path p = std::filesystem::path(entry.path).is_absolute() ? std::filesystem::path(entry.path)
                                                                                  : root / entry.path;
  if (!std::filesystem::exists(p)) throw DataError(fmt::format("clip '{}': payload not found at {}", entry.clip_id, p.string()));
  VideoClip raw = DecoderRegistry::instance().get(decoder)(p);
  raw.clip_id = entry.clip_id;
  raw.label = entry.class_id;
  return sample_frames(raw, frames);
}

}  // namespace vrh
