#pragma once

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vrh/video.hpp"

namespace vrh {

struct EncoderSpec {
  std::string encoder_id;
  int embed_dim = 0;
  int input_frames = 16;
  // Square side the adapter resizes to; 0 keeps the clip's resolution.
  int input_resolution = 0;
  // Token grid; n_space == 0 marks a flat token list of n_time entries.
  int n_time = 0;
  int n_space = 0;
  std::string provenance;

  int n_tokens() const { return n_space > 0 ? n_time * n_space : n_time; }
};

struct EmbeddingRecord {
  std::string clip_id;
  std::string encoder_id;
  std::string perturbation;
  std::vector<float> gap;
  // n_tokens x dim, row-major. Empty when the backbone only exposes pooled output.
  std::vector<float> tokens;
  int n_tokens = 0;

  int dim() const { return static_cast<int>(gap.size()); }
  bool has_tokens() const { return n_tokens > 0; }
  const float* token(int i) const { return tokens.data() + static_cast<std::size_t>(i) * gap.size(); }

  // Finite values, consistent shapes, gap == mean(tokens) within 1e-5.
  void validate() const;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

// Sets `gap` to the per-dimension mean of `tokens`.
void pool_tokens(EmbeddingRecord& rec);

class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual const EncoderSpec& spec() const = 0;

  // Brings a clip to the input contract (frame count, resolution). The
  // default samples frames uniformly and resizes bilinearly.
  virtual VideoClip preprocess(const VideoClip& clip) const;

  // Encodes a clip that already satisfies the contract.
  virtual EmbeddingRecord forward(const VideoClip& clip) const = 0;

  // False when concurrent forward() calls on one instance are unsafe.
  virtual bool reentrant() const { return true; }

  // preprocess + contract check + forward. Never modifies `clip`.
  EmbeddingRecord encode(const VideoClip& clip, std::string_view perturbation = "clean") const;

  void check_contract(const VideoClip& clip) const;
};

struct ToyEncoderOptions {
  int dim = 64;
  int grid = 8;
  int frames = 16;
  int resolution = 64;
  // Weight of the frame-difference term; 0 gives a purely frame-averaging encoder.
  double temporal_mixing = 1.0;
  std::uint64_t seed = 7;
  std::string id = "toy";
};

// Seeded random projection of an area-downsampled frame, plus a projection of
// the difference to the previous frame:
//   token_t = tanh(W x_t + m * M (x_t - x_{t-1})),  x_{-1} = x_0.
// Identical frames give identical tokens; frame order changes the tokens
// whenever consecutive frames differ.
class ToyEncoder final : public Encoder {
 public:
  explicit ToyEncoder(ToyEncoderOptions options = {});

  const EncoderSpec& spec() const override { return spec_; }
  EmbeddingRecord forward(const VideoClip& clip) const override;

  // Downsampled frame in [-1, 1], length grid*grid*3.
  std::vector<double> frame_features(const VideoClip& clip, int t) const;

 private:
  ToyEncoderOptions opt_;
  EncoderSpec spec_;
  std::vector<double> w_;  // dim x F
  std::vector<double> m_;  // dim x F
};

// Runs an external program per clip. `command` may contain {input} (raw clip
// written by the harness), {output} (.emb file the program must write) and
// {frames}/{resolution}.
struct ExternalEncoderOptions {
  std::string id;
  std::string command;
  int dim = 0;
  int frames = 16;
  int resolution = 224;
  std::string provenance;
};

class ExternalEncoder final : public Encoder {
 public:
  explicit ExternalEncoder(ExternalEncoderOptions options);

  const EncoderSpec& spec() const override { return spec_; }
  EmbeddingRecord forward(const VideoClip& clip) const override;

 private:
  ExternalEncoderOptions opt_;
  EncoderSpec spec_;
};

using EncoderFactory = std::function<std::shared_ptr<Encoder>(const nlohmann::json& options)>;

class EncoderRegistry {
 public:
  static EncoderRegistry& instance();

  void add(std::string name, EncoderFactory factory, std::string description = {});
  std::shared_ptr<Encoder> create(std::string_view name, const nlohmann::json& options) const;
  bool contains(std::string_view name) const;
  // name -> description
  std::map<std::string, std::string> list() const;

  // dlopen()s a shared object and calls its
  //   extern "C" void vrh_register_encoders(vrh::EncoderRegistry&);
  void load_plugin(const std::filesystem::path& path);

 private:
  EncoderRegistry();
  struct Entry {
    EncoderFactory factory;
    std::string description;
  };
  std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace vrh
