#include "vrh/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "vrh/common.hpp"
#include "vrh/rng.hpp"

namespace vrh {

std::vector<std::string> default_synthetic_classes() {
  return {"Pushing something from left to right", "Pulling something from right to left",
          "Pretending to throw something", "Pretending to turn something upside down"};
}

LabelTable synthetic_labels() {
  std::map<int, std::string> m;
  int id = 0;
  for (const auto& l : default_taxonomy_labels()) {
    if (id == kDefaultClassCount) break;
    m[id++] = l;
  }
  while (id < kDefaultClassCount) {
    m[id] = fmt::format("Synthetic filler class {}", id);
    ++id;
  }
  return LabelTable(std::move(m));
}

namespace {

struct Motion {
  double angle = 0.0;
  std::array<int, 3> colour{};
};

Motion class_motion(int class_id, const ClassTaxonomy& taxonomy) {
  int base = class_id;
  bool flipped = false;
  if (auto a = taxonomy.antonym_of(class_id); a && *a < class_id) {
    base = *a;
    flipped = true;
  }
  Rng rng(mix_seed(fnv1a("synthetic-class"), static_cast<std::uint64_t>(base)));
  Motion m;
  m.angle = rng.uniform(0.0, 2.0 * M_PI);
  if (flipped) m.angle += M_PI;
  for (auto& c : m.colour) c = 40 + static_cast<int>(rng.below(176));
  return m;
}

}  // namespace

VideoClip synthetic_clip(std::string clip_id, int class_id, const ClassTaxonomy& taxonomy, int frames, int height,
                         int width, std::uint64_t seed) {
  if (frames < 1 || height < 1 || width < 1) throw ConfigError("synthetic clip dimensions must be >= 1");
  const Motion m = class_motion(class_id, taxonomy);
  Rng rng(mix_seed(seed, fnv1a(clip_id)));
  VideoClip clip(std::move(clip_id), class_id, frames, height, width);

  const double side = std::max(2.0, 0.25 * std::min(height, width));
  const double travel = 0.45 * std::min(height, width);
  const double cx = 0.5 * width + rng.uniform(-0.06, 0.06) * width;
  const double cy = 0.5 * height + rng.uniform(-0.06, 0.06) * height;
  const double dx = std::cos(m.angle), dy = std::sin(m.angle);
  std::array<int, 3> colour = m.colour;
  for (auto& c : colour) c = std::clamp(c + static_cast<int>(rng.below(21)) - 10, 0, 255);

  const int bg = 20 + static_cast<int>(rng.below(30));
  for (auto& v : clip.data) v = static_cast<std::uint8_t>(bg + rng.below(12));

  for (int t = 0; t < frames; ++t) {
    const double u = frames > 1 ? static_cast<double>(t) / (frames - 1) - 0.5 : 0.0;
    const double px = cx + u * travel * dx - side / 2;
    const double py = cy + u * travel * dy - side / 2;
    const int x0 = std::max(0, static_cast<int>(std::floor(px)));
    const int y0 = std::max(0, static_cast<int>(std::floor(py)));
    const int x1 = std::min(width, static_cast<int>(std::floor(px + side)));
    const int y1 = std::min(height, static_cast<int>(std::floor(py + side)));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        for (int c = 0; c < 3; ++c) clip.at(t, y, x, c) = static_cast<std::uint8_t>(colour[c]);
      }
    }
  }
  return clip;
}

SyntheticDataset write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticOptions& opt) {
  if (opt.test_per_class < 0 || opt.train_per_class < 0 || opt.val_per_class < 0) {
    throw ConfigError("synthetic clip counts must be >= 0");
  }
  SyntheticDataset ds;
  ds.labels = synthetic_labels();
  const ClassTaxonomy taxonomy = load_default_taxonomy(ds.labels);

  std::vector<int> classes;
  for (const auto& ref : opt.classes.empty() ? default_synthetic_classes() : opt.classes) {
    auto id = ds.labels.resolve(ref);
    if (!id) throw ConfigError(fmt::format("synthetic class '{}' does not resolve to a label", ref));
    if (std::find(classes.begin(), classes.end(), *id) == classes.end()) classes.push_back(*id);
  }

  ds.manifest.root = dir;
  std::filesystem::create_directories(dir / "clips");
  const std::array<std::pair<Split, int>, 3> splits = {
      {{Split::Train, opt.train_per_class}, {Split::Val, opt.val_per_class}, {Split::Test, opt.test_per_class}}};
  for (const auto& [split, count] : splits) {
    int n = 0;
    for (int i = 0; i < count; ++i) {
      for (int c : classes) {
        ManifestEntry e;
        e.clip_id = fmt::format("{}_{:04d}", to_string(split), n++);
        e.path = "clips/" + e.clip_id + ".vrhclip";
        e.class_id = c;
        e.split = split;
        write_raw_clip(dir / e.path,
                       synthetic_clip(e.clip_id, c, taxonomy, opt.frames, opt.height, opt.width, opt.seed));
        ds.manifest.entries.push_back(std::move(e));
      }
    }
  }
  ds.labels_path = dir / "labels.tsv";
  ds.manifest_path = dir / "manifest.tsv";
  ds.labels.save(ds.labels_path);
  write_manifest(ds.manifest_path, ds.manifest);
  return ds;
}

}  // namespace vrh
