#include "vrh/video.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "vrh/common.hpp"

namespace vrh {

VideoClip::VideoClip(std::string id, int label_, int t, int h, int w, std::uint8_t fill)
    : clip_id(std::move(id)), label(label_), frames(t), height(h), width(w) {
  data.assign(static_cast<std::size_t>(t) * h * w * kChannels, fill);
}

void VideoClip::validate() const {
  if (frames < 1 || height < 1 || width < 1) {
    throw DataError(fmt::format("clip '{}': invalid shape {}x{}x{}", clip_id, frames, height, width));
  }
  if (data.size() != static_cast<std::size_t>(frames) * frame_size()) {
    throw DataError(fmt::format("clip '{}': buffer holds {} bytes, shape needs {}", clip_id, data.size(),
                                static_cast<std::size_t>(frames) * frame_size()));
  }
}

void copy_frame(const VideoClip& src, int src_t, VideoClip& dst, int dst_t) {
  auto s = src.frame(src_t);
  auto d = dst.frame(dst_t);
  std::copy(s.begin(), s.end(), d.begin());
}

VideoClip resize_frames(const VideoClip& clip, int height, int width) {
  clip.validate();
  if (height < 1 || width < 1) throw DataError("resize: target dims must be >= 1");
  if (height == clip.height && width == clip.width) return clip;
  VideoClip out(clip.clip_id, clip.label, clip.frames, height, width);
  const double sy = static_cast<double>(clip.height) / height;
  const double sx = static_cast<double>(clip.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(clip.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, clip.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(clip.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, clip.width - 1);
      const double wx = fx - x0;
      for (int t = 0; t < clip.frames; ++t) {
        for (int c = 0; c < VideoClip::kChannels; ++c) {
          const double v = (1 - wy) * ((1 - wx) * clip.at(t, y0, x0, c) + wx * clip.at(t, y0, x1, c)) +
                           wy * ((1 - wx) * clip.at(t, y1, x0, c) + wx * clip.at(t, y1, x1, c));
          out.at(t, y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'V', 'R', 'H', 'C', 'L', 'I', 'P', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                        static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_raw_clip(const std::filesystem::path& path, const VideoClip& clip) {
  clip.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError(fmt::format("cannot write clip file {}", path.string()));
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, static_cast<std::uint32_t>(clip.frames));
  put_u32(os, static_cast<std::uint32_t>(clip.height));
  put_u32(os, static_cast<std::uint32_t>(clip.width));
  put_u32(os, VideoClip::kChannels);
  os.write(reinterpret_cast<const char*>(clip.data.data()), static_cast<std::streamsize>(clip.data.size()));
  if (!os) throw DataError(fmt::format("short write on {}", path.string()));
}

VideoClip read_raw_clip(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(fmt::format("cannot open clip file {}", path.string()));
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(fmt::format("{}: not a raw clip file", path.string()));
  }
  const auto t = get_u32(is);
  const auto h = get_u32(is);
  const auto w = get_u32(is);
  const auto c = get_u32(is);
  if (!is || c != VideoClip::kChannels || t == 0 || h == 0 || w == 0 || t > 100000 || h > 16384 || w > 16384) {
    throw DataError(fmt::format("{}: bad raw clip header", path.string()));
  }
  VideoClip clip(path.stem().string(), -1, static_cast<int>(t), static_cast<int>(h), static_cast<int>(w));
  is.read(reinterpret_cast<char*>(clip.data.data()), static_cast<std::streamsize>(clip.data.size()));
  if (is.gcount() != static_cast<std::streamsize>(clip.data.size())) {
    throw DataError(fmt::format("{}: truncated raw clip", path.string()));
  }
  return clip;
}

}  // namespace vrh
