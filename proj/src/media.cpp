#include "vrh/media.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vrh/common.hpp"
#include "vrh/dataset.hpp"

namespace vrh {

namespace {

void append_frame(VideoClip& clip, const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (clip.frames == 0) {
    clip.height = rgb.rows;
    clip.width = rgb.cols;
  } else if (rgb.rows != clip.height || rgb.cols != clip.width) {
    cv::resize(rgb, rgb, cv::Size(clip.width, clip.height), 0, 0, cv::INTER_AREA);
  }
  const std::size_t row = static_cast<std::size_t>(clip.width) * 3;
  for (int y = 0; y < rgb.rows; ++y) clip.data.insert(clip.data.end(), rgb.ptr<std::uint8_t>(y), rgb.ptr<std::uint8_t>(y) + row);
  ++clip.frames;
}

VideoClip decode_container(const std::filesystem::path& p) {
  cv::VideoCapture cap(p.string());
  if (!cap.isOpened()) throw DataError(fmt::format("cannot open video {}", p.string()));
  VideoClip clip;
  cv::Mat frame;
  while (cap.read(frame)) {
    if (frame.channels() == 1) cv::cvtColor(frame, frame, cv::COLOR_GRAY2BGR);
    append_frame(clip, frame);
  }
  if (clip.frames == 0) throw DataError(fmt::format("video {} has no frames", p.string()));
  return clip;
}

VideoClip decode_frame_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError(fmt::format("{} is not a frame directory", dir.string()));
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  VideoClip clip;
  for (const auto& f : files) {
    cv::Mat img = cv::imread(f.string(), cv::IMREAD_COLOR);
    if (img.empty()) continue;
    append_frame(clip, img);
  }
  if (clip.frames == 0) throw DataError(fmt::format("no readable images in {}", dir.string()));
  return clip;
}

const cv::Scalar kPalette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214},
                               {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127}};

void save(const std::filesystem::path& p, const cv::Mat& img, std::vector<std::filesystem::path>& out) {
  if (cv::imwrite(p.string(), img)) out.push_back(p);
}

void draw_series_chart(const nlohmann::json& chart, bool lines, const std::filesystem::path& path,
                       std::vector<std::filesystem::path>& out) {
  const int W = 640, H = 420, L = 60, R = 20, T = 30, B = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : chart["series"]) {
    for (const auto& p : s["points"]) {
      x0 = std::min(x0, p[0].get<double>());
      x1 = std::max(x1, p[0].get<double>());
      y0 = std::min(y0, p[1].get<double>());
      y1 = std::max(y1, p[1].get<double>());
    }
  }
  if (!std::isfinite(x0)) return;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
  auto px = [&](double x, double y) {
    return cv::Point(L + static_cast<int>((x - x0) / (x1 - x0) * (W - L - R)),
                     H - B - static_cast<int>((y - y0) / (y1 - y0) * (H - T - B)));
  };
  cv::rectangle(img, {L, T}, {W - R, H - B}, cv::Scalar(0, 0, 0));
  cv::putText(img, chart.value("name", ""), {L, 20}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0});
  cv::putText(img, chart.value("x_label", ""), {W / 2 - 30, H - 15}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0});
  cv::putText(img, fmt::format("{:.3g}", y1), {4, T + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0});
  cv::putText(img, fmt::format("{:.3g}", y0), {4, H - B}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0});
  int k = 0;
  for (const auto& s : chart["series"]) {
    const auto colour = kPalette[k++ % 8];
    std::vector<cv::Point> pts;
    for (const auto& p : s["points"]) pts.push_back(px(p[0].get<double>(), p[1].get<double>()));
    if (lines && pts.size() > 1) cv::polylines(img, pts, false, colour, 2);
    for (const auto& p : pts) cv::circle(img, p, 3, colour, cv::FILLED);
  }
  save(path, img, out);
}

void draw_heatmap(const nlohmann::json& h, const std::filesystem::path& path, std::vector<std::filesystem::path>& out) {
  const auto& values = h["values"];
  const int rows = static_cast<int>(values.size());
  if (rows == 0) return;
  const int cols = static_cast<int>(values[0].size());
  if (cols == 0) return;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : values) {
    for (const auto& v : r) {
      if (v.is_null()) continue;
      lo = std::min(lo, v.get<double>());
      hi = std::max(hi, v.get<double>());
    }
  }
  const int cell = 48, left = 160, top = 30;
  cv::Mat img(top + rows * cell + 10, left + cols * cell + 10, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::Mat grey(1, 1, CV_8UC1), colour;
  for (int r = 0; r < rows; ++r) {
    cv::putText(img, h["rows"][r].get<std::string>().substr(0, 22), {4, top + r * cell + cell / 2},
                cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0});
    for (int c = 0; c < cols; ++c) {
      const cv::Rect rect(left + c * cell, top + r * cell, cell - 2, cell - 2);
      const auto& v = values[r][c];
      if (v.is_null()) {
        cv::rectangle(img, rect, cv::Scalar(200, 200, 200), 1);
        continue;
      }
      const double t = hi > lo ? (v.get<double>() - lo) / (hi - lo) : 1.0;
      grey.at<std::uint8_t>(0, 0) = static_cast<std::uint8_t>(std::lround(255 * t));
      cv::applyColorMap(grey, colour, cv::COLORMAP_VIRIDIS);
      const auto bgr = colour.at<cv::Vec3b>(0, 0);
      cv::rectangle(img, rect, cv::Scalar(bgr[0], bgr[1], bgr[2]), cv::FILLED);
    }
  }
  save(path, img, out);
}

}  // namespace

void register_media_decoders() {
  DecoderRegistry::instance().add("opencv", decode_container);
  DecoderRegistry::instance().add("frames", decode_frame_dir);
}

void write_frame_png(const std::filesystem::path& path, const VideoClip& clip, int t) {
  clip.validate();
  if (t < 0 || t >= clip.frames) throw DataError(fmt::format("frame {} out of range", t));
  cv::Mat rgb(clip.height, clip.width, CV_8UC3);
  std::memcpy(rgb.data, clip.frame(t).data(), clip.frame_size());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw DataError(fmt::format("cannot write {}", path.string()));
}

std::vector<std::filesystem::path> render_plots(const std::filesystem::path& report_dir) {
  std::vector<std::filesystem::path> out;
  const auto data_path = report_dir / "plot_data.json";
  if (!std::filesystem::exists(data_path)) return out;
  const auto data = nlohmann::json::parse(read_file(data_path), nullptr, false);
  if (data.is_discarded()) return out;
  const auto dir = report_dir / "plots";
  std::filesystem::create_directories(dir);
  for (const auto& c : data.value("line_charts", nlohmann::json::array())) {
    draw_series_chart(c, true, dir / (c.value("name", "chart") + ".png"), out);
  }
  for (const auto& c : data.value("scatters", nlohmann::json::array())) {
    draw_series_chart(c, false, dir / (c.value("name", "scatter") + ".png"), out);
  }
  for (const auto& h : data.value("heatmaps", nlohmann::json::array())) {
    draw_heatmap(h, dir / (h.value("name", "heatmap") + ".png"), out);
  }
  return out;
}

}  // namespace vrh
