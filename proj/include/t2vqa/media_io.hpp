#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "t2vqa/csv.hpp"
#include "t2vqa/error.hpp"

namespace t2vqa {

// Row-major single-channel image.
template <typename T>
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;

  Plane() = default;
  Plane(int w, int h, T fill = T{}) : width(w), height(h), pixels(std::size_t(w) * h, fill) {
    if (w <= 0 || h <= 0) throw InvalidInput("plane dimensions must be positive");
  }

  std::size_t size() const { return pixels.size(); }
  T& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  const T& at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
  bool operator==(const Plane&) const = default;
};

using GrayFrame = Plane<std::uint8_t>;
using FloatPlane = Plane<double>;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

using RgbFrame = Plane<Rgb>;

struct Lab {
  double l = 0.0, a = 0.0, b = 0.0;
};

using LabImage = Plane<Lab>;

struct FrameSequence {
  std::vector<RgbFrame> frames;
  int width = 0;
  int height = 0;
  std::string source_id;

  std::size_t frame_count() const { return frames.size(); }
};

// Enforces the sequence invariants: at least one frame, uniform dimensions.
inline FrameSequence make_sequence(std::vector<RgbFrame> frames, std::string source_id) {
  if (frames.empty()) throw InvalidInput(source_id + ": no frames");
  const int w = frames.front().width;
  const int h = frames.front().height;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].width != w || frames[i].height != h) {
      throw InvalidInput(source_id + ": frame " + std::to_string(i) + " is " +
                         std::to_string(frames[i].width) + "x" + std::to_string(frames[i].height) +
                         ", expected " + std::to_string(w) + "x" + std::to_string(h));
    }
    if (frames[i].size() != std::size_t(w) * h) {
      throw InvalidInput(source_id + ": frame " + std::to_string(i) + " pixel count mismatch");
    }
  }
  return FrameSequence{std::move(frames), w, h, std::move(source_id)};
}

// ---------------------------------------------------------------------------
// Image files

namespace detail {

inline bool is_frame_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".ppm" || ext == ".pnm";
}

inline RgbFrame from_bgr_mat(const cv::Mat& bgr) {
  RgbFrame frame(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) frame.at(x, y) = Rgb{row[x][2], row[x][1], row[x][0]};
  }
  return frame;
}

inline cv::Mat to_bgr_mat(const RgbFrame& frame) {
  cv::Mat bgr(frame.height, frame.width, CV_8UC3);
  for (int y = 0; y < frame.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < frame.width; ++x) {
      const Rgb& p = frame.at(x, y);
      row[x] = cv::Vec3b(p.b, p.g, p.r);
    }
  }
  return bgr;
}

}  // namespace detail

inline RgbFrame read_frame(const std::filesystem::path& file) {
  cv::Mat bgr;
  try {
    bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception&) {
    bgr.release();
  }
  if (bgr.empty()) throw IoError(file.string() + ": cannot decode image");
  return detail::from_bgr_mat(bgr);
}

inline void write_frame(const std::filesystem::path& file, const RgbFrame& frame) {
  if (!cv::imwrite(file.string(), detail::to_bgr_mat(frame))) {
    throw IoError(file.string() + ": cannot write image");
  }
}

inline std::vector<std::uint8_t> encode_png(const RgbFrame& frame) {
  std::vector<std::uint8_t> bytes;
  if (!cv::imencode(".png", detail::to_bgr_mat(frame), bytes)) throw Error("PNG encoding failed");
  return bytes;
}

inline RgbFrame decode_image(const std::vector<std::uint8_t>& bytes) {
  cv::Mat bgr = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (bgr.empty()) throw InvalidInput("cannot decode image bytes");
  return detail::from_bgr_mat(bgr);
}

// Frames are the PNG/PPM files of `dir` in lexicographic filename order.
inline FrameSequence load_frames(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && detail::is_frame_file(entry.path())) files.push_back(entry.path());
  }
  if (files.empty()) throw InvalidInput(dir.string() + ": no frames");
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  std::vector<RgbFrame> frames;
  frames.reserve(files.size());
  for (const auto& f : files) {
    frames.push_back(read_frame(f));
    const auto& first = frames.front();
    const auto& last = frames.back();
    if (last.width != first.width || last.height != first.height) {
      throw InvalidInput(f.string() + ": dimension mismatch (" + std::to_string(last.width) + "x" +
                         std::to_string(last.height) + " vs " + std::to_string(first.width) + "x" +
                         std::to_string(first.height) + ")");
    }
  }
  return make_sequence(std::move(frames), dir.filename().string());
}

// ---------------------------------------------------------------------------
// Colorspaces

// BT.601 luma weights, full range.
inline GrayFrame to_grayscale(const RgbFrame& frame) {
  GrayFrame gray(frame.width, frame.height);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const Rgb& p = frame.pixels[i];
    const double y = 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
    gray.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return gray;
}

namespace detail {

inline double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// sRGB -> XYZ (D65). The white point is taken as the row sums so that
// neutral inputs land exactly on a = b = 0.
inline constexpr double kRgbToXyz[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                           {0.2126729, 0.7151522, 0.0721750},
                                           {0.0193339, 0.1191920, 0.9503041}};

}  // namespace detail

inline Lab rgb_to_lab(Rgb p) {
  using detail::kRgbToXyz;
  const double lin[3] = {detail::srgb_to_linear(p.r / 255.0), detail::srgb_to_linear(p.g / 255.0),
                         detail::srgb_to_linear(p.b / 255.0)};
  double f[3];
  for (int row = 0; row < 3; ++row) {
    const double white = kRgbToXyz[row][0] + kRgbToXyz[row][1] + kRgbToXyz[row][2];
    const double v = kRgbToXyz[row][0] * lin[0] + kRgbToXyz[row][1] * lin[1] + kRgbToXyz[row][2] * lin[2];
    f[row] = detail::lab_f(v / white);
  }
  return Lab{116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])};
}

inline LabImage rgb_to_lab(const RgbFrame& frame) {
  LabImage lab(frame.width, frame.height);
  for (std::size_t i = 0; i < frame.size(); ++i) lab.pixels[i] = rgb_to_lab(frame.pixels[i]);
  return lab;
}

enum class YuvLayout { Planar, Interleaved };

// 4:4:4, 8 bits per sample. Planar bytes are YYY..UUU..VVV, interleaved
// bytes are YUVYUV..
struct Yuv444Frame {
  int width = 0;
  int height = 0;
  YuvLayout layout = YuvLayout::Planar;
  std::vector<std::uint8_t> bytes;

  std::size_t pixel_count() const { return std::size_t(width) * height; }

  // channel: 0 = Y, 1 = U, 2 = V
  std::uint8_t sample(std::size_t pixel, int channel) const {
    return layout == YuvLayout::Planar ? bytes[channel * pixel_count() + pixel]
                                       : bytes[pixel * 3 + channel];
  }

  GrayFrame plane(int channel) const {
    GrayFrame out(width, height);
    for (std::size_t i = 0; i < pixel_count(); ++i) out.pixels[i] = sample(i, channel);
    return out;
  }

  bool operator==(const Yuv444Frame&) const = default;
};

namespace detail {
inline std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}
}  // namespace detail

// BT.601 full-range (JFIF) matrix, chroma offset 128.
inline Yuv444Frame rgb_to_yuv444(const RgbFrame& frame, YuvLayout layout = YuvLayout::Planar) {
  Yuv444Frame out{frame.width, frame.height, layout, std::vector<std::uint8_t>(frame.size() * 3)};
  const std::size_t n = frame.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = frame.pixels[i].r, g = frame.pixels[i].g, b = frame.pixels[i].b;
    const std::uint8_t yuv[3] = {
        detail::clamp_byte(0.299 * r + 0.587 * g + 0.114 * b),
        detail::clamp_byte(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b),
        detail::clamp_byte(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b)};
    for (int c = 0; c < 3; ++c) {
      out.bytes[layout == YuvLayout::Planar ? c * n + i : i * 3 + c] = yuv[c];
    }
  }
  return out;
}

inline RgbFrame yuv444_to_rgb(const Yuv444Frame& yuv) {
  RgbFrame out(yuv.width, yuv.height);
  for (std::size_t i = 0; i < yuv.pixel_count(); ++i) {
    const double y = yuv.sample(i, 0);
    const double u = yuv.sample(i, 1) - 128.0;
    const double v = yuv.sample(i, 2) - 128.0;
    out.pixels[i] = Rgb{detail::clamp_byte(y + 1.402 * v),
                        detail::clamp_byte(y - 0.344136 * u - 0.714136 * v),
                        detail::clamp_byte(y + 1.772 * u)};
  }
  return out;
}

inline Yuv444Frame planar_to_interleaved(const Yuv444Frame& planar) {
  if (planar.layout != YuvLayout::Planar) throw InvalidInput("planar_to_interleaved: input is not planar");
  const std::size_t n = planar.pixel_count();
  if (planar.bytes.size() != 3 * n) throw InvalidInput("planar_to_interleaved: plane size mismatch");
  Yuv444Frame out{planar.width, planar.height, YuvLayout::Interleaved, std::vector<std::uint8_t>(3 * n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) out.bytes[i * 3 + c] = planar.bytes[c * n + i];
  }
  return out;
}

inline Yuv444Frame interleaved_to_planar(const Yuv444Frame& packed) {
  if (packed.layout != YuvLayout::Interleaved) {
    throw InvalidInput("interleaved_to_planar: input is not interleaved");
  }
  const std::size_t n = packed.pixel_count();
  if (packed.bytes.size() != 3 * n) throw InvalidInput("interleaved_to_planar: buffer size mismatch");
  Yuv444Frame out{packed.width, packed.height, YuvLayout::Planar, std::vector<std::uint8_t>(3 * n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) out.bytes[c * n + i] = packed.bytes[i * 3 + c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset manifest

struct ManifestEntry {
  std::string video_id;
  std::string model_name;
  std::string prompt;
  std::filesystem::path frames_path;
  std::optional<std::filesystem::path> captions_path;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

// Relative paths resolve against `base_dir` (the manifest's directory).
inline DatasetManifest parse_manifest(const csv::Table& table, const std::filesystem::path& base_dir,
                                      std::string_view source = "manifest") {
  const auto c_id = table.require_column("video_id", source);
  const auto c_model = table.require_column("model_name", source);
  const auto c_prompt = table.require_column("prompt", source);
  const auto c_frames = table.require_column("frames_path", source);
  const auto c_captions = table.column("captions_path");

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() ? base_dir / path : path;
  };

  DatasetManifest manifest;
  std::set<std::string> seen;
  for (const auto& row : table.rows) {
    ManifestEntry e;
    e.video_id = row[c_id];
    e.model_name = row[c_model];
    e.prompt = row[c_prompt];
    if (e.video_id.empty()) throw InvalidInput(std::string(source) + ": empty video_id");
    if (!seen.insert(e.video_id).second) {
      throw InvalidInput(std::string(source) + ": duplicate video_id '" + e.video_id + "'");
    }
    if (e.prompt.find_first_not_of(" \t") == std::string::npos) {
      throw InvalidInput(std::string(source) + ": empty prompt for video_id '" + e.video_id + "'");
    }
    e.frames_path = resolve(row[c_frames]);
    if (c_captions && !row[*c_captions].empty()) e.captions_path = resolve(row[*c_captions]);
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

inline DatasetManifest load_manifest(const std::filesystem::path& file) {
  return parse_manifest(csv::read(file), file.parent_path(), file.string());
}

}  // namespace t2vqa
