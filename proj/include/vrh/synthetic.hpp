#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vrh/dataset.hpp"
#include "vrh/taxonomy.hpp"

namespace vrh {

// Moving-square clips. Each class has a colour and a direction of motion;
// antonym classes share the colour and move in opposite directions, so a
// reversed clip of one looks like a clip of the other.
struct SyntheticOptions {
  // Label texts or ids; empty selects a small default mix of pretend, tier and
  // antonym classes.
  std::vector<std::string> classes;
  int test_per_class = 2;
  int train_per_class = 4;
  int val_per_class = 0;
  int frames = 24;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 42;
};

// 174 labels: every taxonomy label first, then numbered fillers.
LabelTable synthetic_labels();

VideoClip synthetic_clip(std::string clip_id, int class_id, const ClassTaxonomy& taxonomy, int frames, int height,
                         int width, std::uint64_t seed);

struct SyntheticDataset {
  std::filesystem::path manifest_path;
  std::filesystem::path labels_path;
  ClipManifest manifest;
  LabelTable labels;
};

// Writes labels.tsv, manifest.tsv and clips/<id>.vrhclip under `dir`.
SyntheticDataset write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticOptions& options);

std::vector<std::string> default_synthetic_classes();

}  // namespace vrh
