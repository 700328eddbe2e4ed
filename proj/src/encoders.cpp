#include "vrh/encoders.hpp"

#include <dlfcn.h>
#include <fmt/format.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <nlohmann/json.hpp>

#include "vrh/common.hpp"
#include "vrh/dataset.hpp"
#include "vrh/rng.hpp"
#include "vrh/store.hpp"

namespace vrh {

void EmbeddingRecord::validate() const {
  if (gap.empty()) throw DataError(fmt::format("embedding for {} is empty", clip_id));
  for (float v : gap) {
    if (!std::isfinite(v)) throw DataError(fmt::format("embedding for {} has non-finite values", clip_id));
  }
  if (n_tokens < 0 || tokens.size() != static_cast<std::size_t>(n_tokens) * gap.size()) {
    throw DataError(fmt::format("embedding for {}: {} token values for {} tokens of dim {}", clip_id, tokens.size(),
                                n_tokens, gap.size()));
  }
  if (n_tokens == 0) return;
  const std::size_t d = gap.size();
  for (std::size_t j = 0; j < d; ++j) {
    CompensatedSum s;
    for (int t = 0; t < n_tokens; ++t) {
      const float v = tokens[t * d + j];
      if (!std::isfinite(v)) throw DataError(fmt::format("embedding for {} has non-finite tokens", clip_id));
      s.add(v);
    }
    if (std::abs(s.value() / n_tokens - gap[j]) > 1e-5) {
      throw DataError(fmt::format("embedding for {}: gap[{}] is not the token mean", clip_id, j));
    }
  }
}

void pool_tokens(EmbeddingRecord& rec) {
  if (rec.n_tokens <= 0) return;
  const std::size_t d = rec.tokens.size() / rec.n_tokens;
  rec.gap.assign(d, 0.f);
  for (std::size_t j = 0; j < d; ++j) {
    CompensatedSum s;
    for (int t = 0; t < rec.n_tokens; ++t) s.add(rec.tokens[t * d + j]);
    rec.gap[j] = static_cast<float>(s.value() / rec.n_tokens);
  }
}

VideoClip Encoder::preprocess(const VideoClip& clip) const {
  const auto& s = spec();
  VideoClip out = clip.frames == s.input_frames ? clip : sample_frames(clip, s.input_frames);
  if (s.input_resolution > 0 && (out.height != s.input_resolution || out.width != s.input_resolution)) {
    out = resize_frames(out, s.input_resolution, s.input_resolution);
  }
  return out;
}

void Encoder::check_contract(const VideoClip& clip) const {
  const auto& s = spec();
  clip.validate();
  if (clip.frames != s.input_frames) {
    throw DataError(fmt::format("encoder {} expects {} frames, clip {} has {}", s.encoder_id, s.input_frames,
                                clip.clip_id, clip.frames));
  }
  if (s.input_resolution > 0 && (clip.height != s.input_resolution || clip.width != s.input_resolution)) {
    throw DataError(fmt::format("encoder {} expects {}x{} frames, clip {} is {}x{}", s.encoder_id,
                                s.input_resolution, s.input_resolution, clip.clip_id, clip.height, clip.width));
  }
}

EmbeddingRecord Encoder::encode(const VideoClip& clip, std::string_view perturbation) const {
  const VideoClip input = preprocess(clip);
  check_contract(input);
  EmbeddingRecord rec = forward(input);
  rec.clip_id = clip.clip_id;
  rec.encoder_id = spec().encoder_id;
  rec.perturbation = std::string(perturbation);
  if (rec.dim() != spec().embed_dim) {
    throw DataError(fmt::format("encoder {} produced dim {}, declared {}", spec().encoder_id, rec.dim(),
                                spec().embed_dim));
  }
  rec.validate();
  return rec;
}

// ---------------------------------------------------------------- toy

ToyEncoder::ToyEncoder(ToyEncoderOptions options) : opt_(std::move(options)) {
  if (opt_.dim < 1 || opt_.grid < 1 || opt_.frames < 1) throw ConfigError("toy encoder: dim, grid and frames must be >= 1");
  spec_.encoder_id = opt_.id;
  spec_.embed_dim = opt_.dim;
  spec_.input_frames = opt_.frames;
  spec_.input_resolution = opt_.resolution;
  spec_.n_time = opt_.frames;
  spec_.n_space = 0;
  spec_.provenance = fmt::format("toy random projection, grid {}, mixing {}, seed {}", opt_.grid,
                                 format_number(opt_.temporal_mixing), opt_.seed);
  const std::size_t f = static_cast<std::size_t>(opt_.grid) * opt_.grid * VideoClip::kChannels;
  const double scale = 1.0 / std::sqrt(static_cast<double>(f));
  Rng rng(mix_seed(opt_.seed, fnv1a("toy-encoder")));
  w_.resize(opt_.dim * f);
  m_.resize(opt_.dim * f);
  for (auto& v : w_) v = rng.normal() * scale;
  for (auto& v : m_) v = rng.normal() * scale;
}

std::vector<double> ToyEncoder::frame_features(const VideoClip& clip, int t) const {
  const int g = opt_.grid;
  std::vector<double> sum(static_cast<std::size_t>(g) * g * 3, 0.0);
  std::vector<int> count(static_cast<std::size_t>(g) * g, 0);
  for (int y = 0; y < clip.height; ++y) {
    const int cy = static_cast<int>(static_cast<long long>(y) * g / clip.height);
    for (int x = 0; x < clip.width; ++x) {
      const int cx = static_cast<int>(static_cast<long long>(x) * g / clip.width);
      const std::size_t cell = static_cast<std::size_t>(cy) * g + cx;
      ++count[cell];
      for (int c = 0; c < 3; ++c) sum[cell * 3 + c] += clip.at(t, y, x, c);
    }
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    const int n = count[i / 3];
    sum[i] = n > 0 ? sum[i] / n / 127.5 - 1.0 : 0.0;
  }
  return sum;
}

EmbeddingRecord ToyEncoder::forward(const VideoClip& clip) const {
  const int d = opt_.dim;
  const std::size_t f = static_cast<std::size_t>(opt_.grid) * opt_.grid * 3;
  EmbeddingRecord rec;
  rec.n_tokens = clip.frames;
  rec.tokens.resize(static_cast<std::size_t>(clip.frames) * d);
  std::vector<double> prev = frame_features(clip, 0);
  for (int t = 0; t < clip.frames; ++t) {
    const std::vector<double> cur = t == 0 ? prev : frame_features(clip, t);
    for (int j = 0; j < d; ++j) {
      const double* wr = w_.data() + j * f;
      const double* mr = m_.data() + j * f;
      double a = 0.0;
      double b = 0.0;
      for (std::size_t i = 0; i < f; ++i) {
        a += wr[i] * cur[i];
        b += mr[i] * (cur[i] - prev[i]);
      }
      rec.tokens[static_cast<std::size_t>(t) * d + j] = static_cast<float>(std::tanh(a + opt_.temporal_mixing * b));
    }
    prev = cur;
  }
  pool_tokens(rec);
  return rec;
}

// ---------------------------------------------------------------- external

ExternalEncoder::ExternalEncoder(ExternalEncoderOptions options) : opt_(std::move(options)) {
  if (opt_.id.empty() || opt_.command.empty() || opt_.dim < 1) {
    throw ConfigError("external encoder needs id, command and dim");
  }
  if (!is_safe_identifier(opt_.id)) throw ConfigError(fmt::format("unsafe encoder id '{}'", opt_.id));
  spec_.encoder_id = opt_.id;
  spec_.embed_dim = opt_.dim;
  spec_.input_frames = opt_.frames;
  spec_.input_resolution = opt_.resolution;
  spec_.n_time = 0;
  spec_.provenance = opt_.provenance.empty() ? "external: " + opt_.command : opt_.provenance;
}

namespace {

std::string replace_all(std::string s, std::string_view from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::string shell_quote(const std::string& s) { return "'" + replace_all(s, "'", "'\\''") + "'"; }

}  // namespace

EmbeddingRecord ExternalEncoder::forward(const VideoClip& clip) const {
  static std::atomic<unsigned> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   fmt::format("vrh-ext-{}-{}", ::getpid(), counter++);
  std::filesystem::create_directories(dir);
  const auto in = dir / "clip.raw";
  const auto out = dir / "out.emb";
  write_raw_clip(in, clip);
  std::string cmd = opt_.command;
  cmd = replace_all(cmd, "{input}", shell_quote(in.string()));
  cmd = replace_all(cmd, "{output}", shell_quote(out.string()));
  cmd = replace_all(cmd, "{frames}", std::to_string(opt_.frames));
  cmd = replace_all(cmd, "{resolution}", std::to_string(opt_.resolution));
  const int rc = std::system(cmd.c_str());
  if (rc != 0 || !std::filesystem::exists(out)) {
    std::filesystem::remove_all(dir);
    throw ConfigError(fmt::format("encoder backend for {} unavailable or failed (exit status {})", opt_.id, rc));
  }
  EmbeddingFile f = read_embedding_file(out);
  std::filesystem::remove_all(dir);
  return std::move(f.record);
}

// ---------------------------------------------------------------- registry

EncoderRegistry& EncoderRegistry::instance() {
  static EncoderRegistry reg;
  return reg;
}

EncoderRegistry::EncoderRegistry() {
  add(
      "toy",
      [](const nlohmann::json& o) {
        ToyEncoderOptions opt;
        opt.dim = o.value("dim", opt.dim);
        opt.grid = o.value("grid", opt.grid);
        opt.frames = o.value("frames", opt.frames);
        opt.resolution = o.value("resolution", opt.resolution);
        opt.temporal_mixing = o.value("temporal_mixing", opt.temporal_mixing);
        opt.seed = o.value("seed", opt.seed);
        opt.id = o.value("id", opt.id);
        return std::make_shared<ToyEncoder>(opt);
      },
      "seeded random-projection encoder for desk-scale runs");
  add(
      "external",
      [](const nlohmann::json& o) {
        ExternalEncoderOptions opt;
        opt.id = o.value("id", "");
        opt.command = o.value("command", "");
        opt.dim = o.value("dim", 0);
        opt.frames = o.value("frames", opt.frames);
        opt.resolution = o.value("resolution", opt.resolution);
        opt.provenance = o.value("provenance", "");
        return std::make_shared<ExternalEncoder>(opt);
      },
      "runs a command per clip and reads back a .emb file");
}

void EncoderRegistry::add(std::string name, EncoderFactory factory, std::string description) {
  entries_[std::move(name)] = Entry{std::move(factory), std::move(description)};
}

std::shared_ptr<Encoder> EncoderRegistry::create(std::string_view name, const nlohmann::json& options) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    std::string known;
    for (const auto& [n, e] : entries_) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError(fmt::format("unknown encoder '{}' (registered: {})", name, known));
  }
  try {
    return it->second.factory(options.is_null() ? nlohmann::json::object() : options);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("encoder '{}': bad options: {}", name, e.what()));
  }
}

bool EncoderRegistry::contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

std::map<std::string, std::string> EncoderRegistry::list() const {
  std::map<std::string, std::string> out;
  for (const auto& [n, e] : entries_) out[n] = e.description;
  return out;
}

void EncoderRegistry::load_plugin(const std::filesystem::path& path) {
  void* handle = ::dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!handle) throw ConfigError(fmt::format("cannot load encoder plugin {}: {}", path.string(), ::dlerror()));
  using RegisterFn = void (*)(EncoderRegistry&);
  auto fn = reinterpret_cast<RegisterFn>(::dlsym(handle, "vrh_register_encoders"));
  if (!fn) throw ConfigError(fmt::format("{} does not export vrh_register_encoders", path.string()));
  fn(*this);
}

}  // namespace vrh
