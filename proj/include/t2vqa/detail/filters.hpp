#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "t2vqa/media_io.hpp"

namespace t2vqa::detail {

inline FloatPlane to_float(const GrayFrame& g) {
  FloatPlane out(g.width, g.height);
  std::copy(g.pixels.begin(), g.pixels.end(), out.pixels.begin());
  return out;
}

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

// Normalized 1-D Gaussian taps, length 2*radius+1.
inline std::vector<double> gaussian_kernel(int radius, double sigma) {
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable correlation with replicated borders.
inline FloatPlane separable_filter(const FloatPlane& in, std::span<const double> kx,
                                   std::span<const double> ky) {
  const int w = in.width, h = in.height;
  const int rx = static_cast<int>(kx.size() / 2), ry = static_cast<int>(ky.size() / 2);
  FloatPlane tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -rx; i <= rx; ++i) acc += kx[i + rx] * in.at(clamp_index(x + i, w), y);
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -ry; j <= ry; ++j) acc += ky[j + ry] * tmp.at(x, clamp_index(y + j, h));
      out.at(x, y) = acc;
    }
  }
  return out;
}

// 3x3 correlation with replicated borders; kernel is row-major.
inline FloatPlane filter3x3(const FloatPlane& in, const double (&k)[3][3]) {
  const int w = in.width, h = in.height;
  FloatPlane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          acc += k[dy + 1][dx + 1] * in.at(clamp_index(x + dx, w), clamp_index(y + dy, h));
        }
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

inline MeanStd mean_std(std::span<const double> v) {
  if (v.empty()) return {};
  // Shifted by the first sample so constant input is exact.
  double shift = 0.0;
  for (double x : v) shift += x - v[0];
  const double mean = v[0] + shift / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

}  // namespace t2vqa::detail
