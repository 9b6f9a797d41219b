#pragma once

#include <opencv2/core.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "t2vqa/codec.hpp"
#include "t2vqa/detail/filters.hpp"
#include "t2vqa/error.hpp"
#include "t2vqa/media_io.hpp"

// Per-frame naturalness statistics: texture, sharpness, colour
// distribution, spectral, entropy and contrast.
namespace t2vqa::features {

// Variance of the Sobel gradient magnitude after a 5x5, sigma=1 Gaussian blur.
inline double texture_score(const GrayFrame& frame) {
  if (frame.width < 3 || frame.height < 3) {
    throw InvalidInput("texture_score: frame smaller than 3x3 kernel");
  }
  static const std::vector<double> gauss = t2vqa::detail::gaussian_kernel(2, 1.0);
  static constexpr double kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static constexpr double kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

  const FloatPlane blurred = t2vqa::detail::separable_filter(t2vqa::detail::to_float(frame), gauss, gauss);
  const FloatPlane gx = t2vqa::detail::filter3x3(blurred, kSobelX);
  const FloatPlane gy = t2vqa::detail::filter3x3(blurred, kSobelY);
  std::vector<double> magnitude(blurred.size());
  for (std::size_t i = 0; i < magnitude.size(); ++i) {
    magnitude[i] = std::hypot(gx.pixels[i], gy.pixels[i]);
  }
  const auto ms = t2vqa::detail::mean_std(magnitude);
  return ms.std * ms.std;
}

// RMS difference between the frame and its sharpened (clamped) version.
inline double sharpness_score(const GrayFrame& frame) {
  static constexpr double kSharpen[3][3] = {{0, -1, 0}, {-1, 5, -1}, {0, -1, 0}};
  const FloatPlane original = t2vqa::detail::to_float(frame);
  const FloatPlane sharpened = t2vqa::detail::filter3x3(original, kSharpen);
  double ss = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double d = original.pixels[i] - std::clamp(sharpened.pixels[i], 0.0, 255.0);
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(original.size()));
}

struct KMeansOptions {
  std::uint64_t seed = 42;
  int max_iterations = 100;
  double tolerance = 1e-4;
};

// Fraction of pixels in the 2-means cluster (over LAB a/b) whose centroid
// has the lower A coordinate. Degenerate inputs (one distinct colour or
// coincident centroids) score 1.0.
inline double color_distribution_score(const RgbFrame& frame, const KMeansOptions& opts = {}) {
  const LabImage lab = rgb_to_lab(frame);
  const std::size_t n = lab.size();
  std::vector<std::array<double, 2>> points(n);
  for (std::size_t i = 0; i < n; ++i) points[i] = {lab.pixels[i].a, lab.pixels[i].b};

  auto dist2 = [](const std::array<double, 2>& p, const std::array<double, 2>& q) {
    const double da = p[0] - q[0], db = p[1] - q[1];
    return da * da + db * db;
  };

  // k-means++ seeding
  codec::SplitMix64 rng(opts.seed);
  std::array<std::array<double, 2>, 2> centroid{};
  centroid[0] = points[std::min(n - 1, static_cast<std::size_t>(rng.uniform() * n))];
  std::vector<double> d2(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += d2[i] = dist2(points[i], centroid[0]);
  if (total == 0.0) return 1.0;
  const double target = rng.uniform() * total;
  double cumulative = 0.0;
  std::size_t pick = n - 1;
  for (std::size_t i = 0; i < n; ++i) {
    cumulative += d2[i];
    if (cumulative > target && d2[i] > 0.0) {
      pick = i;
      break;
    }
  }
  centroid[1] = points[pick];

  std::vector<std::uint8_t> label(n, 0);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    std::array<std::array<double, 2>, 2> sum{};
    std::array<std::size_t, 2> count{};
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t c = dist2(points[i], centroid[1]) < dist2(points[i], centroid[0]) ? 1 : 0;
      label[i] = c;
      sum[c][0] += points[i][0];
      sum[c][1] += points[i][1];
      ++count[c];
    }
    double shift = 0.0;
    for (int c = 0; c < 2; ++c) {
      if (count[c] == 0) continue;
      const std::array<double, 2> next = {sum[c][0] / count[c], sum[c][1] / count[c]};
      shift = std::max(shift, std::sqrt(dist2(next, centroid[c])));
      centroid[c] = next;
    }
    if (shift < opts.tolerance) break;
  }
  // Final assignment against the converged centroids.
  std::array<std::size_t, 2> count{};
  for (std::size_t i = 0; i < n; ++i) {
    ++count[dist2(points[i], centroid[1]) < dist2(points[i], centroid[0]) ? 1 : 0];
  }
  if (centroid[0] == centroid[1]) return 1.0;
  const int low = centroid[1][0] < centroid[0][0] ? 1 : 0;
  return static_cast<double>(count[low]) / static_cast<double>(n);
}

enum class SpectralMode {
  Fourier,       // statistics of the per-channel 2-D DFT magnitude
  ChannelStats,  // statistics of the raw channel intensities
};

// (sum over channels of std) / (sum over channels of mean); 0 when the
// denominator vanishes.
inline double spectral_score(const RgbFrame& frame, SpectralMode mode = SpectralMode::Fourier) {
  double sum_std = 0.0, sum_mean = 0.0;
  for (int c = 0; c < 3; ++c) {
    cv::Mat channel(frame.height, frame.width, CV_64F);
    for (int y = 0; y < frame.height; ++y) {
      auto* row = channel.ptr<double>(y);
      for (int x = 0; x < frame.width; ++x) {
        const Rgb& p = frame.at(x, y);
        row[x] = c == 0 ? p.r : c == 1 ? p.g : p.b;
      }
    }
    std::vector<double> values;
    values.reserve(frame.size());
    if (mode == SpectralMode::Fourier) {
      cv::Mat spectrum;
      cv::dft(channel, spectrum, cv::DFT_COMPLEX_OUTPUT);
      for (int y = 0; y < spectrum.rows; ++y) {
        const auto* row = spectrum.ptr<cv::Vec2d>(y);
        for (int x = 0; x < spectrum.cols; ++x) values.push_back(std::hypot(row[x][0], row[x][1]));
      }
    } else {
      values.assign(channel.begin<double>(), channel.end<double>());
    }
    const auto ms = t2vqa::detail::mean_std(values);
    sum_std += ms.std;
    sum_mean += ms.mean;
  }
  return sum_mean > 0.0 ? sum_std / sum_mean : 0.0;
}

// Shannon entropy (bits) of the 256-bin intensity histogram.
inline double entropy_score(const GrayFrame& frame) {
  std::array<std::size_t, 256> hist{};
  for (auto v : frame.pixels) ++hist[v];
  const double n = static_cast<double>(frame.size());
  double h = 0.0;
  for (auto count : hist) {
    if (count == 0) continue;
    const double p = count / n;
    h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

// Population std / mean of intensities; 0 for an all-black frame.
inline double contrast_score(const GrayFrame& frame) {
  std::vector<double> v(frame.pixels.begin(), frame.pixels.end());
  const auto ms = t2vqa::detail::mean_std(v);
  return ms.mean > 0.0 ? ms.std / ms.mean : 0.0;
}

}  // namespace t2vqa::features
