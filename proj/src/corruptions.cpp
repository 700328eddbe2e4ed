// ImageNet-C style corruptions applied frame by frame.

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "vrh/common.hpp"
#include "vrh/perturb.hpp"
#include "vrh/rng.hpp"

namespace vrh {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kReferenceSide = 224.0;

void check_severity(int severity) {
  if (severity < 1 || severity > 5) throw ConfigError(fmt::format("corruption severity {} not in 1..5", severity));
}

// Single-channel float plane.
struct Plane {
  int h = 0;
  int w = 0;
  std::vector<float> v;
  Plane() = default;
  Plane(int h_, int w_, float fill = 0.f) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}
  float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// RGB float image in [0, 1].
struct Image {
  int h = 0;
  int w = 0;
  std::vector<float> v;
  Image() = default;
  Image(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_ * 3, 0.f) {}
  float& at(int y, int x, int c) { return v[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
  float at(int y, int x, int c) const { return v[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
};

Image load_frame(const VideoClip& clip, int t) {
  Image img(clip.height, clip.width);
  auto f = clip.frame(t);
  for (std::size_t i = 0; i < f.size(); ++i) img.v[i] = static_cast<float>(f[i] / 255.0);
  return img;
}

void store_frame(const Image& img, VideoClip& clip, int t) {
  auto f = clip.frame(t);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double v = std::clamp(static_cast<double>(img.v[i]), 0.0, 1.0) * 255.0;
    f[i] = static_cast<std::uint8_t>(std::lround(v));
  }
}

// Half-sample symmetric reflection (d c b a | a b c d | d c b a).
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Whole-sample symmetric reflection (d c b | a b c d | c b a).
int reflect101_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_kernel(double sigma, double truncate = 3.0) {
  const int radius = static_cast<int>(truncate * sigma + 0.5);
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& x : k) x /= sum;
  return k;
}

// Separable Gaussian with reflect boundary.
Plane gaussian_filter(const Plane& in, double sigma) {
  if (sigma <= 0) return in;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Plane tmp(in.h, in.w);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * in.at(y, reflect_index(x + i, in.w));
      tmp.at(y, x) = static_cast<float>(acc);
    }
  }
  Plane out(in.h, in.w);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(reflect_index(y + i, in.h), x);
      out.at(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

// Line motion blur: a one-sided Gaussian-weighted sum of edge-replicated
// shifts along `angle_deg`.
template <typename Getter, typename Setter>
void motion_blur_generic(int h, int w, int channels, int radius, double sigma, double angle_deg, Getter get,
                         Setter set) {
  const int width = radius * 2 + 1;
  sigma = std::max(sigma, 1e-3);
  std::vector<double> kernel(static_cast<std::size_t>(width));
  double ksum = 0;
  for (int i = 0; i < width; ++i) {
    kernel[i] = std::exp(-(static_cast<double>(i) * i) / (2 * sigma * sigma));
    ksum += kernel[i];
  }
  for (auto& k : kernel) k /= ksum;
  const double py = width * std::sin(angle_deg * kPi / 180.0);
  const double px = width * std::cos(angle_deg * kPi / 180.0);
  const double hyp = std::hypot(py, px);
  std::vector<double> acc(static_cast<std::size_t>(h) * w * channels, 0.0);
  for (int i = 0; i < width; ++i) {
    const int dy = -static_cast<int>(std::ceil(i * py / hyp - 0.5));
    const int dx = -static_cast<int>(std::ceil(i * px / hyp - 0.5));
    if (std::abs(dy) >= h || std::abs(dx) >= w) break;
    for (int y = 0; y < h; ++y) {
      const int sy = std::clamp(y - dy, 0, h - 1);
      for (int x = 0; x < w; ++x) {
        const int sx = std::clamp(x - dx, 0, w - 1);
        for (int c = 0; c < channels; ++c) {
          acc[(static_cast<std::size_t>(y) * w + x) * channels + c] += kernel[i] * get(sy, sx, c);
        }
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) set(y, x, c, acc[(static_cast<std::size_t>(y) * w + x) * channels + c]);
    }
  }
}

Image motion_blur(const Image& img, int radius, double sigma, double angle) {
  Image out(img.h, img.w);
  motion_blur_generic(
      img.h, img.w, 3, radius, sigma, angle, [&](int y, int x, int c) { return img.at(y, x, c); },
      [&](int y, int x, int c, double v) { out.at(y, x, c) = static_cast<float>(v); });
  return out;
}

Plane motion_blur(const Plane& p, int radius, double sigma, double angle) {
  Plane out(p.h, p.w);
  motion_blur_generic(
      p.h, p.w, 1, radius, sigma, angle, [&](int y, int x, int) { return p.at(y, x); },
      [&](int y, int x, int, double v) { out.at(y, x) = static_cast<float>(v); });
  return out;
}

// Order-1 zoom with corner-aligned sampling (in = out * (n_in - 1) / (n_out - 1)).
Plane zoom_linear(const Plane& in, double factor) {
  const int oh = std::max(1, static_cast<int>(std::lround(in.h * factor)));
  const int ow = std::max(1, static_cast<int>(std::lround(in.w * factor)));
  Plane out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    const double fy = oh > 1 ? static_cast<double>(y) * (in.h - 1) / (oh - 1) : 0.0;
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, in.h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < ow; ++x) {
      const double fx = ow > 1 ? static_cast<double>(x) * (in.w - 1) / (ow - 1) : 0.0;
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, in.w - 1);
      const double wx = fx - x0;
      out.at(y, x) = static_cast<float>((1 - wy) * ((1 - wx) * in.at(y0, x0) + wx * in.at(y0, x1)) +
                                        wy * ((1 - wx) * in.at(y1, x0) + wx * in.at(y1, x1)));
    }
  }
  return out;
}

// Centre crop by 1/factor, zoom back up, trim to the original size.
Plane clipped_zoom(const Plane& in, double factor) {
  const int ch = static_cast<int>(std::ceil(in.h / factor));
  const int cw = static_cast<int>(std::ceil(in.w / factor));
  const int top = (in.h - ch) / 2;
  const int left = (in.w - cw) / 2;
  Plane crop(ch, cw);
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) crop.at(y, x) = in.at(std::clamp(top + y, 0, in.h - 1), std::clamp(left + x, 0, in.w - 1));
  }
  Plane z = zoom_linear(crop, factor);
  const int tt = std::max(0, (z.h - in.h) / 2);
  const int tl = std::max(0, (z.w - in.w) / 2);
  Plane out(in.h, in.w);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) out.at(y, x) = z.at(std::min(tt + y, z.h - 1), std::min(tl + x, z.w - 1));
  }
  return out;
}

double spatial_scale(const VideoClip& clip) { return std::min(clip.height, clip.width) / kReferenceSide; }

// ---------------------------------------------------------------- corruptions

void corrupt_impulse(VideoClip& clip, int severity, std::uint64_t seed) {
  const double amount = impulse_noise_amount(severity);
  for (int t = 0; t < clip.frames; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    for (auto& v : clip.frame(t)) {
      const bool flipped = rng.uniform() <= amount;
      const bool salted = rng.uniform() <= 0.5;
      if (flipped) v = salted ? 255 : 0;
    }
  }
}

void corrupt_brightness(VideoClip& clip, int severity) {
  const double shift = brightness_shift(severity);
  for (int t = 0; t < clip.frames; ++t) {
    auto f = clip.frame(t);
    for (std::size_t i = 0; i < f.size(); i += 3) {
      const double r = f[i] / 255.0;
      const double g = f[i + 1] / 255.0;
      const double b = f[i + 2] / 255.0;
      const double v = std::max({r, g, b});
      const double nv = std::clamp(v + shift, 0.0, 1.0);
      // HSV value shift with hue and saturation held fixed.
      std::array<double, 3> out{nv, nv, nv};
      if (v > 0) {
        const double s = nv / v;
        out = {r * s, g * s, b * s};
      }
      for (int c = 0; c < 3; ++c) f[i + c] = static_cast<std::uint8_t>(std::lround(std::clamp(out[c], 0.0, 1.0) * 255.0));
    }
  }
}

void corrupt_pixelate(VideoClip& clip, int severity) {
  const int cy = pixelate_cells(clip.height, severity);
  const int cx = pixelate_cells(clip.width, severity);
  std::vector<int> ycell(static_cast<std::size_t>(clip.height));
  std::vector<int> xcell(static_cast<std::size_t>(clip.width));
  for (int y = 0; y < clip.height; ++y) ycell[y] = pixelate_cell_of(y, clip.height, cy);
  for (int x = 0; x < clip.width; ++x) xcell[x] = pixelate_cell_of(x, clip.width, cx);
  for (int t = 0; t < clip.frames; ++t) {
    std::vector<double> sum(static_cast<std::size_t>(cy) * cx * 3, 0.0);
    std::vector<int> cnt(static_cast<std::size_t>(cy) * cx, 0);
    for (int y = 0; y < clip.height; ++y) {
      for (int x = 0; x < clip.width; ++x) {
        const std::size_t cell = static_cast<std::size_t>(ycell[y]) * cx + xcell[x];
        ++cnt[cell];
        for (int c = 0; c < 3; ++c) sum[cell * 3 + c] += clip.at(t, y, x, c);
      }
    }
    for (int y = 0; y < clip.height; ++y) {
      for (int x = 0; x < clip.width; ++x) {
        const std::size_t cell = static_cast<std::size_t>(ycell[y]) * cx + xcell[x];
        for (int c = 0; c < 3; ++c) {
          clip.at(t, y, x, c) = static_cast<std::uint8_t>(std::lround(sum[cell * 3 + c] / cnt[cell]));
        }
      }
    }
  }
}

void corrupt_motion_blur(VideoClip& clip, int severity, std::uint64_t seed) {
  static constexpr std::array<std::pair<double, double>, 5> kParams = {
      {{10, 3}, {15, 5}, {15, 8}, {15, 12}, {20, 15}}};
  const auto [radius, sigma] = kParams[severity - 1];
  const double scale = spatial_scale(clip);
  const int r = std::max(0, static_cast<int>(std::lround(radius * scale)));
  Rng rng(mix_seed(seed, fnv1a("motion_blur_angle")));
  const double angle = rng.uniform(-45.0, 45.0);
  for (int t = 0; t < clip.frames; ++t) store_frame(motion_blur(load_frame(clip, t), r, sigma * scale, angle), clip, t);
}

void corrupt_snow(VideoClip& clip, int severity, std::uint64_t seed) {
  struct SnowParams {
    double loc, scale, zoom, threshold, blur_radius, blur_sigma, blend;
  };
  static constexpr std::array<SnowParams, 5> kParams = {{{0.1, 0.3, 3, 0.5, 10, 4, 0.8},
                                                         {0.2, 0.3, 2, 0.5, 12, 4, 0.7},
                                                         {0.55, 0.3, 4, 0.9, 12, 8, 0.7},
                                                         {0.55, 0.3, 4.5, 0.85, 12, 8, 0.65},
                                                         {0.55, 0.3, 2.5, 0.85, 12, 12, 0.55}}};
  const auto p = kParams[severity - 1];
  const double scale = spatial_scale(clip);
  const int r = std::max(0, static_cast<int>(std::lround(p.blur_radius * scale)));
  for (int t = 0; t < clip.frames; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    Plane layer(clip.height, clip.width);
    for (auto& v : layer.v) v = static_cast<float>(rng.normal(p.loc, p.scale));
    layer = clipped_zoom(layer, p.zoom);
    for (auto& v : layer.v) {
      if (v < p.threshold) v = 0.f;
      // The reference round-trips the layer through 8-bit images.
      v = static_cast<float>(std::floor(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0));
    }
    const double angle = rng.uniform(-135.0, -45.0);
    layer = motion_blur(layer, r, p.blur_sigma * scale, angle);
    for (auto& v : layer.v) v = static_cast<float>(std::floor(std::clamp(static_cast<double>(v), 0.0, 255.0)) / 255.0);

    Image img = load_frame(clip, t);
    for (int y = 0; y < img.h; ++y) {
      for (int x = 0; x < img.w; ++x) {
        const double gray = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
        const double flake = layer.at(y, x) + layer.at(img.h - 1 - y, img.w - 1 - x);
        for (int c = 0; c < 3; ++c) {
          const double v = img.at(y, x, c);
          const double mixed = p.blend * v + (1 - p.blend) * std::max(v, gray * 1.5 + 0.5);
          img.at(y, x, c) = static_cast<float>(std::clamp(mixed + flake, 0.0, 1.0));
        }
      }
    }
    store_frame(img, clip, t);
  }
}

// 2x3 affine mapping three source points onto three destination points.
std::array<double, 6> affine_from_points(const std::array<std::array<double, 2>, 3>& src,
                                         const std::array<std::array<double, 2>, 3>& dst) {
  // Solve [x y 1] * [a b c]^T = x' and likewise for y' by Cramer's rule.
  const double det = src[0][0] * (src[1][1] - src[2][1]) - src[0][1] * (src[1][0] - src[2][0]) +
                     (src[1][0] * src[2][1] - src[2][0] * src[1][1]);
  if (std::abs(det) < 1e-12) throw NumericError("degenerate affine control points");
  auto solve = [&](int k) {
    const double d0 = dst[0][k], d1 = dst[1][k], d2 = dst[2][k];
    const double a = (d0 * (src[1][1] - src[2][1]) - src[0][1] * (d1 - d2) + (d1 * src[2][1] - d2 * src[1][1])) / det;
    const double b = (src[0][0] * (d1 - d2) - d0 * (src[1][0] - src[2][0]) + (src[1][0] * d2 - src[2][0] * d1)) / det;
    const double c = (src[0][0] * (src[1][1] * d2 - src[2][1] * d1) - src[0][1] * (src[1][0] * d2 - src[2][0] * d1) +
                      d0 * (src[1][0] * src[2][1] - src[2][0] * src[1][1])) /
                     det;
    return std::array<double, 3>{a, b, c};
  };
  auto r0 = solve(0);
  auto r1 = solve(1);
  return {r0[0], r0[1], r0[2], r1[0], r1[1], r1[2]};
}

std::array<double, 6> invert_affine(const std::array<double, 6>& m) {
  const double det = m[0] * m[4] - m[1] * m[3];
  if (std::abs(det) < 1e-12) throw NumericError("singular affine transform");
  const double a = m[4] / det, b = -m[1] / det, d = -m[3] / det, e = m[0] / det;
  return {a, b, -(a * m[2] + b * m[5]), d, e, -(d * m[2] + e * m[5])};
}

template <typename IndexFn>
float sample_bilinear(const Image& img, double y, double x, int c, IndexFn idx) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double wy = y - y0;
  const double wx = x - x0;
  const int ya = idx(y0, img.h), yb = idx(y0 + 1, img.h);
  const int xa = idx(x0, img.w), xb = idx(x0 + 1, img.w);
  return static_cast<float>((1 - wy) * ((1 - wx) * img.at(ya, xa, c) + wx * img.at(ya, xb, c)) +
                            wy * ((1 - wx) * img.at(yb, xa, c) + wx * img.at(yb, xb, c)));
}

void corrupt_elastic(VideoClip& clip, int severity, std::uint64_t seed) {
  static constexpr std::array<std::array<double, 3>, 5> kParams = {{{244 * 2.0, 244 * 0.7, 244 * 0.1},
                                                                    {244 * 2.0, 244 * 0.08, 244 * 0.2},
                                                                    {244 * 0.05, 244 * 0.01, 244 * 0.02},
                                                                    {244 * 0.07, 244 * 0.01, 244 * 0.02},
                                                                    {244 * 0.12, 244 * 0.01, 244 * 0.02}}};
  const double scale = spatial_scale(clip);
  const double alpha = kParams[severity - 1][0] * scale;
  const double sigma = kParams[severity - 1][1] * scale;
  const double jitter = kParams[severity - 1][2] * scale;
  const int h = clip.height;
  const int w = clip.width;

  // One random field per clip.
  Rng rng(mix_seed(seed, fnv1a("elastic")));
  const double cy = std::floor(h / 2.0);
  const double cx = std::floor(w / 2.0);
  const double sq = std::floor(std::min(h, w) / 3.0);
  std::array<std::array<double, 2>, 3> src = {{{cx + sq, cy + sq}, {cx + sq, cy - sq}, {cx - sq, cy - sq}}};
  auto dst = src;
  for (auto& p : dst) {
    for (auto& v : p) v += rng.uniform(-jitter, jitter);
  }
  const auto inv = invert_affine(affine_from_points(src, dst));

  Plane dx(h, w), dy(h, w);
  for (auto& v : dx.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : dy.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  dx = gaussian_filter(dx, sigma);
  dy = gaussian_filter(dy, sigma);

  for (int t = 0; t < clip.frames; ++t) {
    const Image img = load_frame(clip, t);
    Image warped(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double sx = inv[0] * x + inv[1] * y + inv[2];
        const double sy = inv[3] * x + inv[4] * y + inv[5];
        for (int c = 0; c < 3; ++c) warped.at(y, x, c) = sample_bilinear(img, sy, sx, c, reflect101_index);
      }
    }
    Image out(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double sy = y + dy.at(y, x) * alpha;
        const double sx = x + dx.at(y, x) * alpha;
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = sample_bilinear(warped, sy, sx, c, reflect_index);
      }
    }
    store_frame(out, clip, t);
  }
}

}  // namespace

double impulse_noise_amount(int severity) {
  check_severity(severity);
  static constexpr std::array<double, 5> k = {0.03, 0.06, 0.09, 0.17, 0.27};
  return k[severity - 1];
}

double pixelate_factor(int severity) {
  check_severity(severity);
  static constexpr std::array<double, 5> k = {0.6, 0.5, 0.4, 0.3, 0.25};
  return k[severity - 1];
}

double brightness_shift(int severity) {
  check_severity(severity);
  static constexpr std::array<double, 5> k = {0.1, 0.2, 0.3, 0.4, 0.5};
  return k[severity - 1];
}

int pixelate_cells(int extent, int severity) {
  return std::max(1, static_cast<int>(extent * pixelate_factor(severity)));
}

int pixelate_cell_of(int i, int extent, int cells) {
  return std::min(cells - 1, static_cast<int>(((2LL * i + 1) * cells) / (2LL * extent)));
}

VideoClip apply_corruption(const VideoClip& clip, Corruption type, int severity, std::uint64_t seed) {
  clip.validate();
  check_severity(severity);
  VideoClip out = clip;
  const std::uint64_t cs = clip_seed(seed, clip.clip_id);
  switch (type) {
    case Corruption::MotionBlur: corrupt_motion_blur(out, severity, cs); break;
    case Corruption::Snow: corrupt_snow(out, severity, cs); break;
    case Corruption::Pixelate: corrupt_pixelate(out, severity); break;
    case Corruption::ImpulseNoise: corrupt_impulse(out, severity, cs); break;
    case Corruption::Brightness: corrupt_brightness(out, severity); break;
    case Corruption::ElasticTransform: corrupt_elastic(out, severity, cs); break;
  }
  return out;
}

}  // namespace vrh
