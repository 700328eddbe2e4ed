#pragma once

#include <filesystem>
#include <vector>

#include "vrh/video.hpp"

namespace vrh {

// Adds the "opencv" (container files) and "frames" (directory of images in
// name order) decoders to the DecoderRegistry.
void register_media_decoders();

void write_frame_png(const std::filesystem::path& path, const VideoClip& clip, int t);

// Renders <report_dir>/plot_data.json into <report_dir>/plots/*.png. Charts
// that cannot be drawn are skipped; returns the files written.
std::vector<std::filesystem::path> render_plots(const std::filesystem::path& report_dir);

}  // namespace vrh
