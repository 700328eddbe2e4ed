#include "fixtures.hpp"

#include <fmt/format.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>

#include "vrh/common.hpp"
#include "vrh/hashing.hpp"
#include "vrh/perturb.hpp"
#include "vrh/synthetic.hpp"

namespace fixtures {

vrh::VideoClip random_clip(const std::string& id, std::uint64_t seed, int frames, int height, int width) {
  vrh::VideoClip clip(id, 0, frames, height, width);
  vrh::Rng rng(seed);
  for (auto& v : clip.data) {
    int x = 1 + static_cast<int>(rng.below(253));
    if (x == vrh::kGrey) x = vrh::kGrey + 1;
    v = static_cast<std::uint8_t>(x);
  }
  return clip;
}

std::vector<float> random_vector(vrh::Rng& rng, int dim, double scale) {
  std::vector<float> v(static_cast<std::size_t>(dim));
  for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
  return v;
}

GapSet clustered_gaps(std::uint64_t seed, int n, int dim, int classes, double spread) {
  vrh::Rng rng(seed);
  std::vector<std::vector<float>> centres;
  for (int c = 0; c < classes; ++c) centres.push_back(random_vector(rng, dim, 1.0));
  GapSet s;
  for (int i = 0; i < n; ++i) {
    const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    vrh::EmbeddingRecord r;
    r.clip_id = fmt::format("g{:04d}", i);
    r.encoder_id = "fixture";
    r.perturbation = "clean";
    r.gap = centres[c];
    for (auto& x : r.gap) x += static_cast<float>(rng.normal() * spread);
    s.records.push_back(std::move(r));
    s.labels.push_back(c);
  }
  return s;
}

GapSet separable_tokens(std::uint64_t seed, int n, int tokens, int dim, int classes, double margin) {
  vrh::Rng rng(seed);
  std::vector<std::vector<float>> offsets;
  for (int c = 0; c < classes; ++c) offsets.push_back(random_vector(rng, dim, margin));
  GapSet s;
  for (int i = 0; i < n; ++i) {
    const int c = i % classes;
    vrh::EmbeddingRecord r;
    r.clip_id = fmt::format("t{:04d}", i);
    r.encoder_id = "fixture";
    r.perturbation = "clean";
    r.n_tokens = tokens;
    r.tokens.resize(static_cast<std::size_t>(tokens) * dim);
    for (int t = 0; t < tokens; ++t) {
      for (int j = 0; j < dim; ++j) r.tokens[static_cast<std::size_t>(t) * dim + j] = offsets[c][j] + static_cast<float>(rng.normal() * 0.1);
    }
    vrh::pool_tokens(r);
    s.records.push_back(std::move(r));
    s.labels.push_back(c);
  }
  return s;
}

std::string frame_digest(const vrh::VideoClip& clip, int t) { return vrh::sha256_hex(clip.frame(t)); }

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() / fmt::format("vrh-{}-{}-{}", tag, ::getpid(), counter++);
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

vrh::ExperimentConfig smoke_config(const std::filesystem::path& dir) {
  vrh::SyntheticOptions opt;
  opt.test_per_class = 2;
  opt.train_per_class = 4;
  const auto ds = vrh::write_synthetic_dataset(dir / "data", opt);
  nlohmann::json j = vrh::default_config();
  j["dataset"]["manifest"] = ds.manifest_path.string();
  j["dataset"]["labels"] = ds.labels_path.string();
  j["encoders"] = nlohmann::json::array(
      {{{"type", "toy"}, {"options", {{"id", "toy_mix"}, {"temporal_mixing", 1.0}, {"seed", 7}}}},
       {{"type", "toy"}, {"options", {{"id", "toy_avg"}, {"temporal_mixing", 0.0}, {"seed", 11}}}}});
  for (const auto& axis : vrh::kAxes) {
    auto& s = j["subsets"][std::string(axis)];
    s["per_class"] = 0;
    s["total"] = nullptr;
  }
  j["probe"]["epochs"] = 30;
  j["probe"]["lr"] = 0.003;
  j["probe"]["batch"] = 0;
  j["output_dir"] = (dir / "out").string();
  j["workers"] = 1;
  return vrh::ExperimentConfig::from_json(j);
}

std::vector<std::pair<std::string, std::string>> snapshot(const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  if (!std::filesystem::exists(dir)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.emplace_back(std::filesystem::relative(e.path(), dir).string(), vrh::read_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fixtures
