#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vrh {

// A decoded clip: T frames of H x W RGB, 8 bits per channel, stored
// frame-major then row-major (t, y, x, c).
struct VideoClip {
  static constexpr int kChannels = 3;

  std::string clip_id;
  int label = -1;
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  VideoClip() = default;
  VideoClip(std::string id, int label_, int t, int h, int w, std::uint8_t fill = 0);

  std::size_t frame_size() const { return static_cast<std::size_t>(height) * width * kChannels; }
  std::size_t index(int t, int y, int x, int c = 0) const {
    return ((static_cast<std::size_t>(t) * height + y) * width + x) * kChannels + c;
  }
  std::uint8_t& at(int t, int y, int x, int c) { return data[index(t, y, x, c)]; }
  std::uint8_t at(int t, int y, int x, int c) const { return data[index(t, y, x, c)]; }

  std::span<std::uint8_t> frame(int t) {
    return {data.data() + static_cast<std::size_t>(t) * frame_size(), frame_size()};
  }
  std::span<const std::uint8_t> frame(int t) const {
    return {data.data() + static_cast<std::size_t>(t) * frame_size(), frame_size()};
  }

  // Throws DataError when shape fields and buffer disagree or a dim is < 1.
  void validate() const;

  friend bool operator==(const VideoClip&, const VideoClip&) = default;
};

// Copies frame `src_t` of `src` into frame `dst_t` of `dst` (same H, W).
void copy_frame(const VideoClip& src, int src_t, VideoClip& dst, int dst_t);

// Bilinear resize of every frame (half-pixel centres, edge clamped).
VideoClip resize_frames(const VideoClip& clip, int height, int width);

// Native clip container: 8-byte magic "VRHCLIP1", then little-endian u32
// T, H, W, C, then T*H*W*C bytes.
void write_raw_clip(const std::filesystem::path& path, const VideoClip& clip);
VideoClip read_raw_clip(const std::filesystem::path& path);

}  // namespace vrh
