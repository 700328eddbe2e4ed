#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vrh/video.hpp"

namespace vrh {

enum class Family { Clean, Corruption, Occlusion, Temporal };

std::string_view to_string(Family f);
Family parse_family(std::string_view s);

enum class Corruption { MotionBlur, Snow, Pixelate, ImpulseNoise, Brightness, ElasticTransform };

inline constexpr std::array<Corruption, 6> kAllCorruptions = {
    Corruption::MotionBlur,   Corruption::Snow,       Corruption::Pixelate,
    Corruption::ImpulseNoise, Corruption::Brightness, Corruption::ElasticTransform};
inline constexpr std::array<int, 3> kCorruptionSeverities = {1, 3, 5};

std::string_view to_string(Corruption c);
Corruption parse_corruption(std::string_view s);

enum class TemporalCondition {
  RandomShuffle,
  SegmentShuffle,
  Interleave,
  StaticFirst,
  StaticMiddle,
  StaticLast,
  GaussianNoise,
  UniformNoise,
  StaticGaussianNoise,
  Reversal,
};

inline constexpr std::array<TemporalCondition, 10> kAllTemporalConditions = {
    TemporalCondition::RandomShuffle, TemporalCondition::SegmentShuffle,      TemporalCondition::Interleave,
    TemporalCondition::StaticFirst,   TemporalCondition::StaticMiddle,        TemporalCondition::StaticLast,
    TemporalCondition::GaussianNoise, TemporalCondition::UniformNoise,        TemporalCondition::StaticGaussianNoise,
    TemporalCondition::Reversal};

std::string_view to_string(TemporalCondition c);
TemporalCondition parse_temporal_condition(std::string_view s);
// "permutation", "static", "noise" or "reversal".
std::string_view temporal_family(TemporalCondition c);

inline constexpr std::array<double, 3> kMovingBlockAlphas = {0.10, 0.30, 0.50};
inline constexpr std::array<double, 3> kTemporalDropoutBetas = {0.125, 0.375, 0.625};
inline constexpr std::array<double, 3> kPatchDropoutGammas = {0.10, 0.30, 0.50};

struct CuboidSize {
  int tau = 2;
  int patch = 16;
};

// Mid-grey used for the moving block.
inline constexpr std::uint8_t kGrey = 128;

// A fully parameterised perturbation. Randomness is derived from `seed` and
// the clip id, so one spec gives different (but reproducible) masks per clip.
struct PerturbationSpec {
  Family family = Family::Clean;
  std::string condition = "none";
  double severity = 0.0;
  // Non-default knobs: "tau", "patch", "pad" (patch dropout), "segments",
  // "depth" (temporal). Empty for the default grids.
  std::map<std::string, double> params;
  std::uint64_t seed = 0;

  static PerturbationSpec clean();
  static PerturbationSpec corruption(Corruption c, int severity, std::uint64_t seed);
  static PerturbationSpec moving_block(double alpha, std::uint64_t seed);
  static PerturbationSpec temporal_dropout(double beta, std::uint64_t seed);
  static PerturbationSpec patch_dropout(double gamma, std::uint64_t seed, CuboidSize cuboid = {}, bool pad = false);
  static PerturbationSpec temporal(TemporalCondition c, std::uint64_t seed);

  // Canonical `family:condition:severity:seed`; non-default params are folded
  // into the condition field as `condition+k=v,...`.
  std::string key() const;
  static PerturbationSpec parse_key(std::string_view key);

  friend bool operator==(const PerturbationSpec&, const PerturbationSpec&) = default;
};

VideoClip apply_perturbation(const VideoClip& clip, const PerturbationSpec& spec);

// Corruptions follow the ImageNet-C reference parameterisation. Spatial
// constants (blur radii, elastic displacement) are defined for 224 px frames
// and scaled by min(H, W) / 224. Per-pixel randomness (impulse noise, snow)
// is redrawn every frame; per-image random parameters (blur angle, elastic
// field) are drawn once per clip so they stay temporally consistent.
VideoClip apply_corruption(const VideoClip& clip, Corruption type, int severity, std::uint64_t seed);

// Reference constants, severity in 1..5.
double impulse_noise_amount(int severity);
double pixelate_factor(int severity);
double brightness_shift(int severity);
// Number of pixelation cells along an axis of `extent` pixels.
int pixelate_cells(int extent, int severity);
// Cell index of pixel `i` along an axis.
int pixelate_cell_of(int i, int extent, int cells);

// Side of the moving block: round(alpha * min(H, W)).
int moving_block_side(int height, int width, double alpha);
// Top-left corner of the block in frame t; linear along the main diagonal.
std::pair<int, int> moving_block_origin(int t, int frames, int height, int width, int side);
VideoClip apply_moving_block(const VideoClip& clip, double alpha);

struct DropoutBlock {
  int start = 0;
  int length = 0;
};
// floor(beta * T) frames starting at a seeded index >= 1; the start is chosen
// so that a recovery frame follows the block whenever T allows it.
DropoutBlock temporal_dropout_block(int frames, double beta, std::uint64_t seed);
VideoClip apply_temporal_dropout(const VideoClip& clip, double beta, std::uint64_t seed);

struct CuboidGrid {
  int nt = 0;
  int ny = 0;
  int nx = 0;
  int count() const { return nt * ny * nx; }
};
CuboidGrid cuboid_grid(const VideoClip& clip, CuboidSize cuboid, bool pad);
// Indices (t-major) of the cuboids zeroed for this clip.
std::vector<int> patch_dropout_selection(const CuboidGrid& grid, double gamma, std::uint64_t seed);
VideoClip apply_patch_dropout(const VideoClip& clip, double gamma, CuboidSize cuboid, std::uint64_t seed,
                              bool pad = false);

struct TemporalOptions {
  int segments = 4;
  int interleave_depth = 2;
};

// Frame order used by the permutation conditions: output frame i = input frame order[i].
std::vector<int> segment_shuffle_order(int frames, int segments, std::uint64_t seed);
std::vector<int> interleave_order(int frames, int depth);
std::vector<int> random_shuffle_order(int frames, std::uint64_t seed);

VideoClip apply_temporal_condition(const VideoClip& clip, TemporalCondition condition, std::uint64_t seed,
                                   TemporalOptions options = {});

// Per-clip seed used by every stochastic transform.
std::uint64_t clip_seed(std::uint64_t seed, std::string_view clip_id);

// Default evaluation grids.
std::vector<PerturbationSpec> corruption_grid(std::uint64_t seed);
std::vector<PerturbationSpec> occlusion_grid(std::uint64_t seed);
std::vector<PerturbationSpec> temporal_grid(std::uint64_t seed);

}  // namespace vrh
