#pragma once

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "t2vqa/detail/filters.hpp"
#include "t2vqa/error.hpp"
#include "t2vqa/inception.hpp"
#include "t2vqa/keypoints.hpp"
#include "t2vqa/media_io.hpp"
#include "t2vqa/natural_features.hpp"
#include "t2vqa/nss.hpp"
#include "t2vqa/parallel.hpp"

namespace t2vqa {

// Per-frame statistics, in schema order. Each is aggregated over frames into
// `<name>_mean` and `<name>_std`.
inline constexpr std::array<std::string_view, 19> kFrameFeatureNames = {
    "texture",       "sharpness",    "color_dist",     "spectral",      "entropy",
    "contrast",      "orb_kp_count", "orb_dist_mean",  "orb_dist_std",  "orb_desc_mean",
    "orb_desc_std",  "blob_count",   "blob_size_mean", "blob_size_std", "niqe_gray",
    "niqe_y",        "niqe_u",       "niqe_v",         "brisque"};

inline constexpr std::size_t kBrisqueIndex = 18;

// Flat, ordered feature schema: 19 x {mean, std} followed by `mis`.
inline const std::vector<std::string>& feature_schema() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (auto base : kFrameFeatureNames) {
      out.push_back(std::string(base) + "_mean");
      out.push_back(std::string(base) + "_std");
    }
    out.push_back("mis");
    return out;
  }();
  return names;
}

// Per-video aggregated features. Absent features (no BRISQUE model, no class
// probabilities) hold std::nullopt, never a fill value.
struct FeatureVector {
  std::vector<std::optional<double>> values = std::vector<std::optional<double>>(feature_schema().size());
  std::uint64_t seed = 42;
  // Frames whose NIQE channel contained constant patches, per channel name.
  std::map<std::string, int> niqe_degenerate;
  std::map<std::string, int> niqe_pseudo_inverse;

  static std::size_t index_of(std::string_view name) {
    const auto& schema = feature_schema();
    for (std::size_t i = 0; i < schema.size(); ++i) {
      if (schema[i] == name) return i;
    }
    throw InvalidInput("unknown feature '" + std::string(name) + "'");
  }

  std::optional<double> get(std::string_view name) const { return values[index_of(name)]; }
  void set(std::string_view name, std::optional<double> v) { values[index_of(name)] = v; }

  std::vector<std::string> absent_features() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!values[i]) out.push_back(feature_schema()[i]);
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < values.size(); ++i) {
      j[feature_schema()[i]] = values[i] ? nlohmann::ordered_json(*values[i]) : nlohmann::ordered_json(nullptr);
    }
    j["meta"] = {{"seed", seed},
                 {"absent_features", absent_features()},
                 {"niqe_degenerate_frames", niqe_degenerate},
                 {"niqe_pseudo_inverse_frames", niqe_pseudo_inverse}};
    return nlohmann::json::parse(j.dump());
  }
};

struct FeatureOptions {
  std::uint64_t seed = 42;
  features::SpectralMode spectral_mode = features::SpectralMode::Fourier;
  features::BlobOptions blobs;
  int jobs = 1;
};

struct FrameFeatures {
  std::array<double, kFrameFeatureNames.size()> values{};
  std::array<bool, 4> niqe_degenerate{};  // gray, y, u, v
  std::array<bool, 4> niqe_pinv{};
};

inline FrameFeatures extract_frame_features(const RgbFrame& frame, const nss::NiqeModel& niqe,
                                            const nss::BrisqueModel* brisque, const FeatureOptions& opts) {
  using namespace features;
  FrameFeatures out;
  auto& v = out.values;
  const GrayFrame gray = to_grayscale(frame);
  v[0] = texture_score(gray);
  v[1] = sharpness_score(gray);
  v[2] = color_distribution_score(frame, KMeansOptions{opts.seed});
  v[3] = spectral_score(frame, opts.spectral_mode);
  v[4] = entropy_score(gray);
  v[5] = contrast_score(gray);
  const OrbStats orb = orb_stats(gray);
  v[6] = orb.kp_count;
  v[7] = orb.dist_mean;
  v[8] = orb.dist_std;
  v[9] = orb.desc_mean;
  v[10] = orb.desc_std;
  const BlobStats blobs = blob_stats(gray, opts.blobs);
  v[11] = blobs.blob_count;
  v[12] = blobs.size_mean;
  v[13] = blobs.size_std;

  const Yuv444Frame yuv = planar_to_interleaved(rgb_to_yuv444(frame, YuvLayout::Planar));
  const GrayFrame channels[4] = {gray, yuv.plane(0), yuv.plane(1), yuv.plane(2)};
  for (int c = 0; c < 4; ++c) {
    const nss::NiqeResult r = nss::niqe_score(channels[c], niqe);
    v[14 + c] = r.score;
    out.niqe_degenerate[c] = r.degenerate;
    out.niqe_pinv[c] = r.pseudo_inverse;
  }
  v[kBrisqueIndex] = brisque ? nss::brisque_score(gray, *brisque) : 0.0;
  return out;
}

inline FeatureVector extract_video_features(const FrameSequence& video, const nss::NiqeModel& niqe,
                                            const nss::BrisqueModel* brisque, const ClassProbs* probs,
                                            const FeatureOptions& opts = {}) {
  if (video.frames.empty()) throw InvalidInput(video.source_id + ": no frames");
  std::vector<FrameFeatures> per_frame(video.frames.size());
  parallel_for(video.frames.size(), opts.jobs, [&](std::size_t i) {
    per_frame[i] = extract_frame_features(video.frames[i], niqe, brisque, opts);
  });

  FeatureVector fv;
  fv.seed = opts.seed;
  static constexpr std::string_view kChannels[4] = {"niqe_gray", "niqe_y", "niqe_u", "niqe_v"};
  for (int c = 0; c < 4; ++c) {
    int degenerate = 0, pinv = 0;
    for (const auto& f : per_frame) {
      degenerate += f.niqe_degenerate[c];
      pinv += f.niqe_pinv[c];
    }
    if (degenerate) fv.niqe_degenerate[std::string(kChannels[c])] = degenerate;
    if (pinv) fv.niqe_pseudo_inverse[std::string(kChannels[c])] = pinv;
  }

  for (std::size_t k = 0; k < kFrameFeatureNames.size(); ++k) {
    if (k == kBrisqueIndex && !brisque) continue;
    std::vector<double> series;
    series.reserve(per_frame.size());
    for (const auto& f : per_frame) series.push_back(f.values[k]);
    const auto ms = detail::mean_std(series);
    if (!std::isfinite(ms.mean) || !std::isfinite(ms.std)) {
      throw Error(video.source_id + ": non-finite " + std::string(kFrameFeatureNames[k]));
    }
    fv.values[2 * k] = ms.mean;
    fv.values[2 * k + 1] = ms.std;
  }
  if (probs) fv.set("mis", modified_inception_score(*probs));
  return fv;
}

}  // namespace t2vqa
