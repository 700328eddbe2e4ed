#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vrh/config.hpp"
#include "vrh/encoders.hpp"
#include "vrh/rng.hpp"
#include "vrh/video.hpp"

namespace fixtures {

// Random pixels in [1, 254] excluding the moving-block grey, so zeroed, grey
// and saturated pixels can only come from a perturbation.
vrh::VideoClip random_clip(const std::string& id, std::uint64_t seed, int frames = 16, int height = 64,
                           int width = 64);

std::vector<float> random_vector(vrh::Rng& rng, int dim, double scale = 1.0);

// Clusters of gap-only records around random centres.
struct GapSet {
  std::vector<vrh::EmbeddingRecord> records;
  std::vector<int> labels;
};
GapSet clustered_gaps(std::uint64_t seed, int n, int dim, int classes, double spread);

// Token records whose class is encoded by a per-class offset added to every token.
GapSet separable_tokens(std::uint64_t seed, int n, int tokens, int dim, int classes, double margin);

std::string frame_digest(const vrh::VideoClip& clip, int t);

// Unique scratch directory under the system temp dir; removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Writes the 8-clip synthetic dataset (4 classes x 2 test clips, plus training
// clips) under `dir`/data and returns a config with two toy encoders over all
// five axes and outputs under `dir`/out.
vrh::ExperimentConfig smoke_config(const std::filesystem::path& dir);

// Every regular file under `dir` (relative path -> bytes).
std::vector<std::pair<std::string, std::string>> snapshot(const std::filesystem::path& dir);

}  // namespace fixtures
