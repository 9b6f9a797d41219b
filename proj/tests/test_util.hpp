#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "t2vqa/media_io.hpp"

namespace t2vqa::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t2vqa") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline GrayFrame constant_gray(int w, int h, std::uint8_t v) { return GrayFrame(w, h, v); }

inline RgbFrame constant_rgb(int w, int h, Rgb c) { return RgbFrame(w, h, c); }

inline GrayFrame checkerboard(int w, int h, std::uint8_t lo = 0, std::uint8_t hi = 255, int cell = 1) {
  GrayFrame g(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) g.at(x, y) = ((x / cell + y / cell) % 2) ? hi : lo;
  }
  return g;
}

inline GrayFrame random_gray(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  GrayFrame g(w, h);
  for (auto& p : g.pixels) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return g;
}

inline RgbFrame random_rgb(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  RgbFrame f(w, h);
  for (auto& p : f.pixels) {
    p = Rgb{static_cast<std::uint8_t>(rng() & 0xFF), static_cast<std::uint8_t>(rng() & 0xFF),
            static_cast<std::uint8_t>(rng() & 0xFF)};
  }
  return f;
}

inline RgbFrame gray_to_rgb(const GrayFrame& g) {
  RgbFrame f(g.width, g.height);
  for (std::size_t i = 0; i < g.size(); ++i) f.pixels[i] = Rgb{g.pixels[i], g.pixels[i], g.pixels[i]};
  return f;
}

// Bright isotropic Gaussian spots on a dark background.
struct Spot {
  double x, y, sigma;
};
inline GrayFrame gaussian_spots(int w, int h, const std::vector<Spot>& spots, double peak = 255.0) {
  GrayFrame g(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (const auto& s : spots) {
        v += peak * std::exp(-((x - s.x) * (x - s.x) + (y - s.y) * (y - s.y)) / (2 * s.sigma * s.sigma));
      }
      g.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return g;
}

// Smooth random texture with a roughly 1/f amplitude spectrum, built as a
// sum of octaves of bilinearly upsampled white noise. Stands in for a
// "natural" frame in ordering tests.
inline GrayFrame natural_like(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> acc(std::size_t(w) * h, 0.0);
  double amplitude = 1.0;
  for (int cell = std::max(w, h) / 2; cell >= 1; cell /= 2) {
    const int gw = w / cell + 2, gh = h / cell + 2;
    std::vector<double> grid(std::size_t(gw) * gh);
    for (auto& v : grid) v = normal(rng);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double fx = double(x) / cell, fy = double(y) / cell;
        const int ix = int(fx), iy = int(fy);
        const double tx = fx - ix, ty = fy - iy;
        const double v = grid[iy * gw + ix] * (1 - tx) * (1 - ty) + grid[iy * gw + ix + 1] * tx * (1 - ty) +
                         grid[(iy + 1) * gw + ix] * (1 - tx) * ty + grid[(iy + 1) * gw + ix + 1] * tx * ty;
        acc[std::size_t(y) * w + x] += amplitude * v;
      }
    }
    amplitude *= 0.5;
  }
  double lo = acc[0], hi = acc[0];
  for (double v : acc) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  GrayFrame g(w, h);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    g.pixels[i] = static_cast<std::uint8_t>(std::lround(20.0 + 215.0 * (acc[i] - lo) / (hi - lo)));
  }
  return g;
}

inline GrayFrame add_gaussian_noise(const GrayFrame& g, double sigma, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  GrayFrame out = g;
  for (auto& p : out.pixels) p = static_cast<std::uint8_t>(std::clamp(std::lround(p + normal(rng)), 0L, 255L));
  return out;
}

inline GrayFrame add_salt_pepper(const GrayFrame& g, double fraction, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrayFrame out = g;
  for (auto& p : out.pixels) {
    const double r = u(rng);
    if (r < fraction / 2) p = 0;
    else if (r < fraction) p = 255;
  }
  return out;
}

}  // namespace t2vqa::testing
