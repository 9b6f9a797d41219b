#pragma once

#include <opencv2/core.hpp>
#include <opencv2/features2d.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <vector>

#include "t2vqa/detail/filters.hpp"
#include "t2vqa/media_io.hpp"

namespace t2vqa::features {

struct OrbStats {
  double kp_count = 0.0;
  double dist_mean = 0.0;  // pairwise keypoint distance
  double dist_std = 0.0;
  double desc_mean = 0.0;  // descriptor popcount
  double desc_std = 0.0;
};

inline constexpr int kOrbMaxKeypoints = 500;

inline OrbStats orb_stats(const GrayFrame& frame) {
  const cv::Mat image(frame.height, frame.width, CV_8U, const_cast<std::uint8_t*>(frame.pixels.data()));
  std::vector<cv::KeyPoint> keypoints;
  cv::Mat descriptors;
  cv::ORB::create(kOrbMaxKeypoints)->detectAndCompute(image, cv::noArray(), keypoints, descriptors);

  OrbStats out;
  out.kp_count = static_cast<double>(keypoints.size());
  if (keypoints.empty()) return out;

  std::vector<double> distances;
  distances.reserve(keypoints.size() * (keypoints.size() - 1) / 2);
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    for (std::size_t j = i + 1; j < keypoints.size(); ++j) {
      const cv::Point2f d = keypoints[i].pt - keypoints[j].pt;
      distances.push_back(std::hypot(d.x, d.y));
    }
  }
  const auto dist = t2vqa::detail::mean_std(distances);
  out.dist_mean = dist.mean;
  out.dist_std = dist.std;

  std::vector<double> popcounts;
  for (int r = 0; r < descriptors.rows; ++r) {
    const auto* row = descriptors.ptr<std::uint8_t>(r);
    int bits = 0;
    for (int c = 0; c < descriptors.cols; ++c) bits += std::popcount(row[c]);
    popcounts.push_back(bits);
  }
  const auto desc = t2vqa::detail::mean_std(popcounts);
  out.desc_mean = desc.mean;
  out.desc_std = desc.std;
  return out;
}

struct Blob {
  double x = 0.0;
  double y = 0.0;
  double sigma = 0.0;
  double response = 0.0;
  double radius() const { return sigma * std::numbers::sqrt2; }
};

struct BlobOptions {
  double min_sigma = 1.0;
  int num_sigma = 10;
  double relative_threshold = 0.1;
  // Peaks must also clear this scale-normalized response (intensities in
  // [0,1]); keeps round-off on flat frames from producing blobs.
  double absolute_threshold = 1e-3;
  double overlap = 0.5;
};

struct BlobStats {
  double blob_count = 0.0;
  double size_mean = 0.0;
  double size_std = 0.0;
};

namespace detail {

// Fraction of the smaller circle's area covered by the other circle.
inline double circle_overlap(const Blob& a, const Blob& b) {
  const double r1 = a.radius(), r2 = b.radius();
  const double d = std::hypot(a.x - b.x, a.y - b.y);
  const double small = std::min(r1, r2);
  if (d >= r1 + r2) return 0.0;
  if (d <= std::abs(r1 - r2)) return 1.0;
  const double a1 = r1 * r1 * std::acos(std::clamp((d * d + r1 * r1 - r2 * r2) / (2 * d * r1), -1.0, 1.0));
  const double a2 = r2 * r2 * std::acos(std::clamp((d * d + r2 * r2 - r1 * r1) / (2 * d * r2), -1.0, 1.0));
  const double a3 = 0.5 * std::sqrt(std::max(0.0, (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)));
  return (a1 + a2 - a3) / (std::numbers::pi * small * small);
}

}  // namespace detail

inline std::vector<double> blob_sigmas(int width, int height, const BlobOptions& opts = {}) {
  const double max_sigma = std::max(opts.min_sigma, std::min(width, height) / 8.0);
  if (max_sigma <= opts.min_sigma || opts.num_sigma < 2) return {opts.min_sigma};
  std::vector<double> sigmas(opts.num_sigma);
  const double lo = std::log(opts.min_sigma), hi = std::log(max_sigma);
  for (int i = 0; i < opts.num_sigma; ++i) {
    sigmas[i] = std::exp(lo + (hi - lo) * i / (opts.num_sigma - 1));
  }
  return sigmas;
}

// Multi-scale Laplacian-of-Gaussian detection of bright blobs.
inline std::vector<Blob> detect_blobs(const GrayFrame& frame, const BlobOptions& opts = {}) {
  const int w = frame.width, h = frame.height;
  cv::Mat image(h, w, CV_64F);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) image.at<double>(y, x) = frame.at(x, y) / 255.0;
  }

  const auto sigmas = blob_sigmas(w, h, opts);
  std::vector<cv::Mat> stack;
  double global_max = 0.0;
  for (double s : sigmas) {
    const int radius = static_cast<int>(std::ceil(4.0 * s));
    cv::Mat g(1, 2 * radius + 1, CV_64F), g2(1, 2 * radius + 1, CV_64F);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += g.at<double>(i + radius) = std::exp(-i * i / (2 * s * s));
    g /= sum;
    double mean2 = 0.0;
    for (int i = -radius; i <= radius; ++i) {
      mean2 += g2.at<double>(i + radius) = (i * i / (s * s * s * s) - 1.0 / (s * s)) * g.at<double>(i + radius);
    }
    g2 -= mean2 / g2.cols;  // zero DC so flat regions respond with exactly ~0

    cv::Mat dxx, dyy;
    cv::sepFilter2D(image, dxx, CV_64F, g2, g, cv::Point(-1, -1), 0, cv::BORDER_REFLECT);
    cv::sepFilter2D(image, dyy, CV_64F, g, g2, cv::Point(-1, -1), 0, cv::BORDER_REFLECT);
    cv::Mat response = -(dxx + dyy) * (s * s);
    double mx = 0.0;
    cv::minMaxLoc(response, nullptr, &mx);
    global_max = std::max(global_max, mx);
    stack.push_back(response);
  }
  if (global_max <= opts.absolute_threshold) return {};
  const double threshold = std::max(opts.absolute_threshold, opts.relative_threshold * global_max);

  std::vector<Blob> candidates;
  const int ns = static_cast<int>(stack.size());
  for (int k = 0; k < ns; ++k) {
    for (int y = 1; y + 1 < h; ++y) {
      for (int x = 1; x + 1 < w; ++x) {
        const double v = stack[k].at<double>(y, x);
        if (v < threshold) continue;
        bool is_max = true;
        for (int dk = -1; dk <= 1 && is_max; ++dk) {
          if (k + dk < 0 || k + dk >= ns) continue;
          for (int dy = -1; dy <= 1 && is_max; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (!dk && !dy && !dx) continue;
              if (stack[k + dk].at<double>(y + dy, x + dx) > v) {
                is_max = false;
                break;
              }
            }
          }
        }
        if (is_max) candidates.push_back(Blob{double(x), double(y), sigmas[k], v});
      }
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(), [](const Blob& a, const Blob& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  std::vector<Blob> kept;
  for (const Blob& c : candidates) {
    bool suppressed = false;
    for (const Blob& k : kept) {
      if (detail::circle_overlap(c, k) > opts.overlap) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

inline BlobStats blob_stats(const GrayFrame& frame, const BlobOptions& opts = {}) {
  const auto blobs = detect_blobs(frame, opts);
  BlobStats out;
  out.blob_count = static_cast<double>(blobs.size());
  if (blobs.empty()) return out;
  std::vector<double> sizes;
  for (const auto& b : blobs) sizes.push_back(b.radius());
  const auto ms = t2vqa::detail::mean_std(sizes);
  out.size_mean = ms.mean;
  out.size_std = ms.std;
  return out;
}

}  // namespace t2vqa::features
