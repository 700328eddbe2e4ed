#include "vrh/perturb.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vrh/common.hpp"
#include "vrh/rng.hpp"

namespace vrh {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Clean: return "clean";
    case Family::Corruption: return "corruption";
    case Family::Occlusion: return "occlusion";
    case Family::Temporal: return "temporal";
  }
  return "clean";
}

Family parse_family(std::string_view s) {
  if (s == "clean") return Family::Clean;
  if (s == "corruption") return Family::Corruption;
  if (s == "occlusion") return Family::Occlusion;
  if (s == "temporal") return Family::Temporal;
  throw ConfigError(fmt::format("unknown perturbation family '{}'", s));
}

std::string_view to_string(Corruption c) {
  switch (c) {
    case Corruption::MotionBlur: return "motion_blur";
    case Corruption::Snow: return "snow";
    case Corruption::Pixelate: return "pixelate";
    case Corruption::ImpulseNoise: return "impulse_noise";
    case Corruption::Brightness: return "brightness";
    case Corruption::ElasticTransform: return "elastic_transform";
  }
  return "";
}

Corruption parse_corruption(std::string_view s) {
  for (auto c : kAllCorruptions) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError(fmt::format("unknown corruption '{}'", s));
}

std::string_view to_string(TemporalCondition c) {
  switch (c) {
    case TemporalCondition::RandomShuffle: return "random_shuffle";
    case TemporalCondition::SegmentShuffle: return "segment_shuffle";
    case TemporalCondition::Interleave: return "interleave";
    case TemporalCondition::StaticFirst: return "static_first";
    case TemporalCondition::StaticMiddle: return "static_middle";
    case TemporalCondition::StaticLast: return "static_last";
    case TemporalCondition::GaussianNoise: return "gaussian_noise";
    case TemporalCondition::UniformNoise: return "uniform_noise";
    case TemporalCondition::StaticGaussianNoise: return "static_gaussian_noise";
    case TemporalCondition::Reversal: return "reversal";
  }
  return "";
}

TemporalCondition parse_temporal_condition(std::string_view s) {
  for (auto c : kAllTemporalConditions) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError(fmt::format("unknown temporal condition '{}'", s));
}

std::string_view temporal_family(TemporalCondition c) {
  switch (c) {
    case TemporalCondition::RandomShuffle:
    case TemporalCondition::SegmentShuffle:
    case TemporalCondition::Interleave: return "permutation";
    case TemporalCondition::StaticFirst:
    case TemporalCondition::StaticMiddle:
    case TemporalCondition::StaticLast: return "static";
    case TemporalCondition::GaussianNoise:
    case TemporalCondition::UniformNoise:
    case TemporalCondition::StaticGaussianNoise: return "noise";
    case TemporalCondition::Reversal: return "reversal";
  }
  return "";
}

PerturbationSpec PerturbationSpec::clean() { return {}; }

PerturbationSpec PerturbationSpec::corruption(Corruption c, int severity, std::uint64_t seed) {
  PerturbationSpec s;
  s.family = Family::Corruption;
  s.condition = std::string(to_string(c));
  s.severity = severity;
  s.seed = seed;
  return s;
}

PerturbationSpec PerturbationSpec::moving_block(double alpha, std::uint64_t seed) {
  PerturbationSpec s;
  s.family = Family::Occlusion;
  s.condition = "moving_block";
  s.severity = alpha;
  s.seed = seed;
  return s;
}

PerturbationSpec PerturbationSpec::temporal_dropout(double beta, std::uint64_t seed) {
  PerturbationSpec s;
  s.family = Family::Occlusion;
  s.condition = "temporal_dropout";
  s.severity = beta;
  s.seed = seed;
  return s;
}

PerturbationSpec PerturbationSpec::patch_dropout(double gamma, std::uint64_t seed, CuboidSize cuboid, bool pad) {
  PerturbationSpec s;
  s.family = Family::Occlusion;
  s.condition = "patch_dropout";
  s.severity = gamma;
  s.seed = seed;
  if (cuboid.tau != 2) s.params["tau"] = cuboid.tau;
  if (cuboid.patch != 16) s.params["patch"] = cuboid.patch;
  if (pad) s.params["pad"] = 1;
  return s;
}

PerturbationSpec PerturbationSpec::temporal(TemporalCondition c, std::uint64_t seed) {
  PerturbationSpec s;
  s.family = Family::Temporal;
  s.condition = std::string(to_string(c));
  s.seed = seed;
  return s;
}

std::string PerturbationSpec::key() const {
  std::string cond = condition;
  if (!params.empty()) {
    cond += '+';
    bool first = true;
    for (const auto& [k, v] : params) {
      cond += fmt::format("{}{}={}", first ? "" : ",", k, format_number(v));
      first = false;
    }
  }
  return fmt::format("{}:{}:{}:{}", to_string(family), cond, format_number(severity), seed);
}

PerturbationSpec PerturbationSpec::parse_key(std::string_view key) {
  auto parts = split(key, ':');
  if (parts.size() != 4) throw ConfigError(fmt::format("malformed perturbation key '{}'", key));
  PerturbationSpec s;
  s.family = parse_family(parts[0]);
  auto plus = parts[1].find('+');
  s.condition = parts[1].substr(0, plus);
  if (plus != std::string::npos) {
    for (const auto& kv : split(std::string_view(parts[1]).substr(plus + 1), ',')) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError(fmt::format("malformed perturbation key '{}'", key));
      s.params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    }
  }
  try {
    s.severity = std::stod(parts[2]);
    s.seed = std::stoull(parts[3]);
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("malformed perturbation key '{}'", key));
  }
  return s;
}

std::uint64_t clip_seed(std::uint64_t seed, std::string_view clip_id) { return mix_seed(seed, fnv1a(clip_id)); }

namespace {

double param_or(const PerturbationSpec& s, const std::string& k, double dflt) {
  auto it = s.params.find(k);
  return it == s.params.end() ? dflt : it->second;
}

void check_ratio(double r, const char* what, bool allow_one = true) {
  if (!(r >= 0.0) || (allow_one ? r > 1.0 : r >= 1.0)) {
    throw ConfigError(fmt::format("{} ratio {} out of range", what, r));
  }
}

}  // namespace

VideoClip apply_perturbation(const VideoClip& clip, const PerturbationSpec& spec) {
  clip.validate();
  switch (spec.family) {
    case Family::Clean: return clip;
    case Family::Corruption: {
      const double sev = spec.severity;
      if (sev != std::floor(sev)) throw ConfigError(fmt::format("corruption severity {} is not an integer", sev));
      return apply_corruption(clip, parse_corruption(spec.condition), static_cast<int>(sev), spec.seed);
    }
    case Family::Occlusion: {
      if (spec.condition == "moving_block") return apply_moving_block(clip, spec.severity);
      if (spec.condition == "temporal_dropout") return apply_temporal_dropout(clip, spec.severity, spec.seed);
      if (spec.condition == "patch_dropout") {
        CuboidSize cub{static_cast<int>(param_or(spec, "tau", 2)), static_cast<int>(param_or(spec, "patch", 16))};
        return apply_patch_dropout(clip, spec.severity, cub, spec.seed, param_or(spec, "pad", 0) != 0);
      }
      throw ConfigError(fmt::format("unknown occlusion condition '{}'", spec.condition));
    }
    case Family::Temporal: {
      TemporalOptions opt;
      opt.segments = static_cast<int>(param_or(spec, "segments", opt.segments));
      opt.interleave_depth = static_cast<int>(param_or(spec, "depth", opt.interleave_depth));
      return apply_temporal_condition(clip, parse_temporal_condition(spec.condition), spec.seed, opt);
    }
  }
  return clip;
}

// ---------------------------------------------------------------- occlusion

int moving_block_side(int height, int width, double alpha) {
  check_ratio(alpha, "moving block");
  return static_cast<int>(std::lround(alpha * std::min(height, width)));
}

std::pair<int, int> moving_block_origin(int t, int frames, int height, int width, int side) {
  const double f = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
  const int y = static_cast<int>(std::lround(f * (height - side)));
  const int x = static_cast<int>(std::lround(f * (width - side)));
  return {y, x};
}

VideoClip apply_moving_block(const VideoClip& clip, double alpha) {
  clip.validate();
  const int side = moving_block_side(clip.height, clip.width, alpha);
  VideoClip out = clip;
  if (side == 0) return out;
  for (int t = 0; t < clip.frames; ++t) {
    auto [y0, x0] = moving_block_origin(t, clip.frames, clip.height, clip.width, side);
    for (int y = y0; y < y0 + side; ++y) {
      for (int x = x0; x < x0 + side; ++x) {
        for (int c = 0; c < VideoClip::kChannels; ++c) out.at(t, y, x, c) = kGrey;
      }
    }
  }
  return out;
}

DropoutBlock temporal_dropout_block(int frames, double beta, std::uint64_t seed) {
  check_ratio(beta, "temporal dropout", false);
  DropoutBlock b;
  b.length = static_cast<int>(std::floor(beta * frames));
  if (b.length == 0) return b;
  // Valid starts are 1..frames-length; prefer those leaving a recovery frame.
  int hi = frames - b.length - 1;
  if (hi < 1) hi = frames - b.length;
  Rng rng(mix_seed(seed, fnv1a("temporal_dropout")));
  b.start = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi)));
  return b;
}

VideoClip apply_temporal_dropout(const VideoClip& clip, double beta, std::uint64_t seed) {
  clip.validate();
  const auto block = temporal_dropout_block(clip.frames, beta, clip_seed(seed, clip.clip_id));
  VideoClip out = clip;
  for (int t = block.start; t < block.start + block.length; ++t) copy_frame(clip, block.start - 1, out, t);
  return out;
}

CuboidGrid cuboid_grid(const VideoClip& clip, CuboidSize cuboid, bool pad) {
  if (cuboid.tau < 1 || cuboid.patch < 1) throw ConfigError("cuboid dims must be >= 1");
  const bool divisible =
      clip.frames % cuboid.tau == 0 && clip.height % cuboid.patch == 0 && clip.width % cuboid.patch == 0;
  if (!divisible && !pad) {
    throw DataError(fmt::format("clip {}x{}x{} is not divisible into ({},{},{}) cuboids and padding is disabled",
                                clip.frames, clip.height, clip.width, cuboid.tau, cuboid.patch, cuboid.patch));
  }
  auto ceil_div = [](int a, int b) { return (a + b - 1) / b; };
  return {ceil_div(clip.frames, cuboid.tau), ceil_div(clip.height, cuboid.patch), ceil_div(clip.width, cuboid.patch)};
}

std::vector<int> patch_dropout_selection(const CuboidGrid& grid, double gamma, std::uint64_t seed) {
  check_ratio(gamma, "patch dropout");
  const int n = grid.count();
  const int k = static_cast<int>(std::lround(gamma * n));
  Rng rng(mix_seed(seed, fnv1a("patch_dropout")));
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

VideoClip apply_patch_dropout(const VideoClip& clip, double gamma, CuboidSize cuboid, std::uint64_t seed, bool pad) {
  clip.validate();
  const auto grid = cuboid_grid(clip, cuboid, pad);
  const auto chosen = patch_dropout_selection(grid, gamma, clip_seed(seed, clip.clip_id));
  VideoClip out = clip;
  for (int id : chosen) {
    const int ct = id / (grid.ny * grid.nx);
    const int cy = (id / grid.nx) % grid.ny;
    const int cx = id % grid.nx;
    const int t1 = std::min((ct + 1) * cuboid.tau, clip.frames);
    const int y1 = std::min((cy + 1) * cuboid.patch, clip.height);
    const int x1 = std::min((cx + 1) * cuboid.patch, clip.width);
    for (int t = ct * cuboid.tau; t < t1; ++t) {
      for (int y = cy * cuboid.patch; y < y1; ++y) {
        auto* row = &out.at(t, y, cx * cuboid.patch, 0);
        std::fill(row, row + static_cast<std::size_t>(x1 - cx * cuboid.patch) * VideoClip::kChannels, 0);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- temporal

std::vector<int> random_shuffle_order(int frames, std::uint64_t seed) {
  Rng rng(mix_seed(seed, fnv1a("random_shuffle")));
  auto p = rng.permutation(static_cast<std::size_t>(frames));
  return {p.begin(), p.end()};
}

std::vector<int> segment_shuffle_order(int frames, int segments, std::uint64_t seed) {
  if (segments < 1) throw ConfigError("segment count must be >= 1");
  segments = std::min(segments, frames);
  Rng rng(mix_seed(seed, fnv1a("segment_shuffle")));
  auto perm = rng.permutation(static_cast<std::size_t>(segments));
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(frames));
  for (auto s : perm) {
    const int b = static_cast<int>((static_cast<long long>(s) * frames) / segments);
    const int e = static_cast<int>((static_cast<long long>(s + 1) * frames) / segments);
    for (int i = b; i < e; ++i) order.push_back(i);
  }
  return order;
}

namespace {

void interleave_into(const std::vector<int>& in, int depth, std::vector<int>& out) {
  if (depth <= 0 || in.size() < 2) {
    out.insert(out.end(), in.begin(), in.end());
    return;
  }
  std::vector<int> even;
  std::vector<int> odd;
  for (std::size_t i = 0; i < in.size(); ++i) (i % 2 == 0 ? even : odd).push_back(in[i]);
  interleave_into(even, depth - 1, out);
  interleave_into(odd, depth - 1, out);
}

}  // namespace

std::vector<int> interleave_order(int frames, int depth) {
  std::vector<int> in(static_cast<std::size_t>(frames));
  std::iota(in.begin(), in.end(), 0);
  std::vector<int> out;
  out.reserve(in.size());
  interleave_into(in, depth, out);
  return out;
}

VideoClip apply_temporal_condition(const VideoClip& clip, TemporalCondition condition, std::uint64_t seed,
                                   TemporalOptions options) {
  clip.validate();
  const int T = clip.frames;
  const std::uint64_t cs = clip_seed(seed, clip.clip_id);
  VideoClip out = clip;
  auto reorder = [&](const std::vector<int>& order) {
    for (int i = 0; i < T; ++i) copy_frame(clip, order[i], out, i);
  };
  auto repeat = [&](int src) {
    for (int i = 0; i < T; ++i) copy_frame(clip, src, out, i);
  };
  switch (condition) {
    case TemporalCondition::Reversal: {
      std::vector<int> order(static_cast<std::size_t>(T));
      for (int i = 0; i < T; ++i) order[i] = T - 1 - i;
      reorder(order);
      break;
    }
    case TemporalCondition::RandomShuffle: reorder(random_shuffle_order(T, cs)); break;
    case TemporalCondition::SegmentShuffle: reorder(segment_shuffle_order(T, options.segments, cs)); break;
    case TemporalCondition::Interleave: reorder(interleave_order(T, options.interleave_depth)); break;
    case TemporalCondition::StaticFirst: repeat(0); break;
    case TemporalCondition::StaticMiddle: repeat(T / 2); break;
    case TemporalCondition::StaticLast: repeat(T - 1); break;
    case TemporalCondition::GaussianNoise: {
      // Centred on mid-range, standard deviation half the value range, clipped.
      Rng rng(mix_seed(cs, fnv1a("gaussian_noise")));
      for (auto& v : out.data) v = static_cast<std::uint8_t>(std::clamp(std::lround(rng.normal(127.5, 127.5)), 0L, 255L));
      break;
    }
    case TemporalCondition::UniformNoise: {
      Rng rng(mix_seed(cs, fnv1a("uniform_noise")));
      for (auto& v : out.data) v = static_cast<std::uint8_t>(rng.below(256));
      break;
    }
    case TemporalCondition::StaticGaussianNoise: {
      Rng rng(mix_seed(cs, fnv1a("static_gaussian_noise")));
      auto f0 = out.frame(0);
      for (auto& v : f0) v = static_cast<std::uint8_t>(std::clamp(std::lround(rng.normal(127.5, 127.5)), 0L, 255L));
      for (int i = 1; i < T; ++i) copy_frame(out, 0, out, i);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------- grids

std::vector<PerturbationSpec> corruption_grid(std::uint64_t seed) {
  std::vector<PerturbationSpec> out;
  for (auto c : kAllCorruptions) {
    for (int s : kCorruptionSeverities) out.push_back(PerturbationSpec::corruption(c, s, seed));
  }
  return out;
}

std::vector<PerturbationSpec> occlusion_grid(std::uint64_t seed) {
  std::vector<PerturbationSpec> out;
  for (double a : kMovingBlockAlphas) out.push_back(PerturbationSpec::moving_block(a, seed));
  for (double b : kTemporalDropoutBetas) out.push_back(PerturbationSpec::temporal_dropout(b, seed));
  for (double g : kPatchDropoutGammas) out.push_back(PerturbationSpec::patch_dropout(g, seed));
  return out;
}

std::vector<PerturbationSpec> temporal_grid(std::uint64_t seed) {
  std::vector<PerturbationSpec> out;
  for (auto c : kAllTemporalConditions) out.push_back(PerturbationSpec::temporal(c, seed));
  return out;
}

}  // namespace vrh
