#include "perturb_checks.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "vrh/perturb.hpp"

namespace checks {

using namespace vrh;

namespace {

bool same_shape(const VideoClip& a, const VideoClip& b) {
  return a.frames == b.frames && a.height == b.height && a.width == b.width && a.data.size() == b.data.size();
}

bool pixel_equals(const VideoClip& a, const VideoClip& b, int t, int y, int x) {
  for (int c = 0; c < 3; ++c) {
    if (a.at(t, y, x, c) != b.at(t, y, x, c)) return false;
  }
  return true;
}

bool pixel_is(const VideoClip& a, int t, int y, int x, std::uint8_t v) {
  for (int c = 0; c < 3; ++c) {
    if (a.at(t, y, x, c) != v) return false;
  }
  return true;
}

std::vector<std::string> sorted_digests(const VideoClip& c) {
  std::vector<std::string> d;
  for (int t = 0; t < c.frames; ++t) d.push_back(fixtures::frame_digest(c, t));
  std::sort(d.begin(), d.end());
  return d;
}

struct Box {
  int y0, x0, y1, x1;  // inclusive
};

void moving_block(const VideoClip& clip, double alpha, std::vector<std::string>& err) {
  const auto out = apply_moving_block(clip, alpha);
  const int side = static_cast<int>(std::lround(alpha * std::min(clip.height, clip.width)));
  long long changed = 0;
  std::vector<Box> boxes;
  for (int t = 0; t < clip.frames; ++t) {
    Box b{clip.height, clip.width, -1, -1};
    long long grey = 0;
    for (int y = 0; y < clip.height; ++y) {
      for (int x = 0; x < clip.width; ++x) {
        if (!pixel_equals(out, clip, t, y, x)) ++changed;
        if (pixel_is(out, t, y, x, kGrey)) {
          ++grey;
          b = {std::min(b.y0, y), std::min(b.x0, x), std::max(b.y1, y), std::max(b.x1, x)};
        } else if (!pixel_equals(out, clip, t, y, x)) {
          err.push_back(fmt::format("moving_block {}: frame {} pixel ({},{}) altered but not grey", alpha, t, y, x));
          return;
        }
      }
    }
    if (grey != static_cast<long long>(side) * side) {
      err.push_back(fmt::format("moving_block {}: frame {} has {} grey pixels, expected {}", alpha, t, grey, side * side));
      return;
    }
    if (side > 0 && (b.y1 - b.y0 + 1 != side || b.x1 - b.x0 + 1 != side)) {
      err.push_back(fmt::format("moving_block {}: frame {} grey region is not a {}x{} square", alpha, t, side, side));
      return;
    }
    boxes.push_back(b);
  }
  if (changed > static_cast<long long>(side) * side * clip.frames) {
    err.push_back(fmt::format("moving_block {}: {} pixels changed, budget {}", alpha, changed,
                              static_cast<long long>(side) * side * clip.frames));
  }
  if (side == 0) return;
  const Box& f = boxes.front();
  const Box& l = boxes.back();
  if (f.y0 != 0 || f.x0 != 0) err.push_back(fmt::format("moving_block {}: first frame block not at top-left", alpha));
  if (l.y1 != clip.height - 1 || l.x1 != clip.width - 1) {
    err.push_back(fmt::format("moving_block {}: last frame block not at bottom-right", alpha));
  }
  const bool overlap = f.y0 <= l.y1 && l.y0 <= f.y1 && f.x0 <= l.x1 && l.x0 <= f.x1;
  if (alpha <= 0.5 && overlap) err.push_back(fmt::format("moving_block {}: first and last blocks overlap", alpha));
}

void temporal_dropout(const VideoClip& clip, double beta, std::uint64_t seed, std::vector<std::string>& err) {
  const auto out = apply_temporal_dropout(clip, beta, seed);
  const int expected = static_cast<int>(std::floor(beta * clip.frames));
  std::vector<int> changed;
  for (int t = 0; t < clip.frames; ++t) {
    if (fixtures::frame_digest(out, t) != fixtures::frame_digest(clip, t)) changed.push_back(t);
  }
  if (static_cast<int>(changed.size()) != expected) {
    err.push_back(fmt::format("temporal_dropout {}: {} frames replaced, expected {}", beta, changed.size(), expected));
    return;
  }
  if (changed.empty()) return;
  const int start = changed.front();
  if (start < 1) err.push_back(fmt::format("temporal_dropout {}: block starts at frame 0", beta));
  if (changed.back() - start + 1 != expected) err.push_back(fmt::format("temporal_dropout {}: block not contiguous", beta));
  for (int t : changed) {
    if (start >= 1 && fixtures::frame_digest(out, t) != fixtures::frame_digest(clip, start - 1)) {
      err.push_back(fmt::format("temporal_dropout {}: frame {} is not the last visible frame", beta, t));
      return;
    }
  }
}

void patch_dropout(const VideoClip& clip, double gamma, std::uint64_t seed, std::vector<std::string>& err) {
  const CuboidSize cub{2, 16};
  const auto out = apply_patch_dropout(clip, gamma, cub, seed);
  const int nt = clip.frames / cub.tau, ny = clip.height / cub.patch, nx = clip.width / cub.patch;
  const int count = nt * ny * nx;
  const int expected = static_cast<int>(std::lround(gamma * count));
  int zeroed = 0;
  for (int ct = 0; ct < nt; ++ct) {
    for (int cy = 0; cy < ny; ++cy) {
      for (int cx = 0; cx < nx; ++cx) {
        int zeros = 0, kept = 0, total = 0;
        for (int t = ct * cub.tau; t < (ct + 1) * cub.tau; ++t) {
          for (int y = cy * cub.patch; y < (cy + 1) * cub.patch; ++y) {
            for (int x = cx * cub.patch; x < (cx + 1) * cub.patch; ++x) {
              ++total;
              zeros += pixel_is(out, t, y, x, 0);
              kept += pixel_equals(out, clip, t, y, x);
            }
          }
        }
        if (zeros == total) {
          ++zeroed;
        } else if (kept != total) {
          err.push_back(fmt::format("patch_dropout {}: cuboid ({},{},{}) partially altered", gamma, ct, cy, cx));
          return;
        }
      }
    }
  }
  if (zeroed != expected) {
    err.push_back(fmt::format("patch_dropout {}: {} of {} cuboids zeroed, expected {}", gamma, zeroed, count, expected));
  }
}

void temporal(const VideoClip& clip, std::uint64_t seed, std::vector<std::string>& err) {
  const auto digests = sorted_digests(clip);
  for (auto c : {TemporalCondition::RandomShuffle, TemporalCondition::SegmentShuffle, TemporalCondition::Interleave,
                 TemporalCondition::Reversal}) {
    const auto out = apply_temporal_condition(clip, c, seed);
    if (sorted_digests(out) != digests) {
      err.push_back(fmt::format("{}: frame multiset changed", to_string(c)));
    }
  }
  const auto rev = apply_temporal_condition(clip, TemporalCondition::Reversal, seed);
  for (int t = 0; t < clip.frames; ++t) {
    if (fixtures::frame_digest(rev, t) != fixtures::frame_digest(clip, clip.frames - 1 - t)) {
      err.push_back(fmt::format("reversal: frame {} is not input frame {}", t, clip.frames - 1 - t));
      break;
    }
  }
  if (!(apply_temporal_condition(rev, TemporalCondition::Reversal, seed) == clip)) {
    err.push_back("reversal is not an involution");
  }
  const std::pair<TemporalCondition, int> anchors[] = {{TemporalCondition::StaticFirst, 0},
                                                       {TemporalCondition::StaticMiddle, clip.frames / 2},
                                                       {TemporalCondition::StaticLast, clip.frames - 1}};
  for (const auto& [c, src] : anchors) {
    const auto out = apply_temporal_condition(clip, c, seed);
    for (int t = 0; t < clip.frames; ++t) {
      if (fixtures::frame_digest(out, t) != fixtures::frame_digest(clip, src)) {
        err.push_back(fmt::format("{}: frame {} is not input frame {}", to_string(c), t, src));
        break;
      }
    }
  }
  const auto sg = apply_temporal_condition(clip, TemporalCondition::StaticGaussianNoise, seed);
  for (int t = 1; t < clip.frames; ++t) {
    if (fixtures::frame_digest(sg, t) != fixtures::frame_digest(sg, 0)) {
      err.push_back("static_gaussian_noise: frames differ");
      break;
    }
  }
}

}  // namespace

std::vector<std::string> perturbation_invariants(const VideoClip& clip) {
  std::vector<std::string> err;
  const std::uint64_t seed = 42;

  if (!(apply_perturbation(clip, PerturbationSpec::clean()) == clip)) err.push_back("clean spec is not the identity");
  if (!(apply_moving_block(clip, 0.0) == clip)) err.push_back("moving_block 0 is not the identity");
  if (!(apply_temporal_dropout(clip, 0.0, seed) == clip)) err.push_back("temporal_dropout 0 is not the identity");
  if (!(apply_patch_dropout(clip, 0.0, {}, seed) == clip)) err.push_back("patch_dropout 0 is not the identity");

  for (double a : kMovingBlockAlphas) moving_block(clip, a, err);
  for (double b : kTemporalDropoutBetas) temporal_dropout(clip, b, seed, err);
  for (double g : kPatchDropoutGammas) patch_dropout(clip, g, seed, err);
  temporal(clip, seed, err);

  std::vector<PerturbationSpec> all = corruption_grid(seed);
  for (const auto& s : occlusion_grid(seed)) all.push_back(s);
  for (const auto& s : temporal_grid(seed)) all.push_back(s);
  for (const auto& spec : all) {
    const auto a = apply_perturbation(clip, spec);
    const auto b = apply_perturbation(clip, spec);
    if (!same_shape(a, clip)) err.push_back(fmt::format("{}: shape changed", spec.key()));
    if (!(a == b)) err.push_back(fmt::format("{}: two runs differ", spec.key()));
  }
  return err;
}

}  // namespace checks
