#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "t2vqa/error.hpp"

namespace t2vqa::ensemble {

struct EnsembleRow {
  double naturalness = 0.0;
  double text_similarity = 0.0;
  double human_score = 0.0;  // combined human score in [0, 1]
};

struct EnsembleWeights {
  double intercept = 0.0;
  double w_naturalness = 0.0;
  double w_textsim = 0.0;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();

  void validate() const {
    if (!std::isfinite(intercept) || !std::isfinite(w_naturalness) || !std::isfinite(w_textsim)) {
      throw InvalidInput("ensemble weights must be finite");
    }
  }
};

struct VideoQualityResult {
  std::string video_id;
  double naturalness = 0.0;
  double text_similarity = 0.0;
  double ensemble_score = 0.0;
};

namespace detail {

inline double mean(std::span<const double> v) {
  double shift = 0.0;
  for (double x : v) shift += x - v[0];
  return v[0] + shift / static_cast<double>(v.size());
}

}  // namespace detail

// Ordinary least squares of human_score on (naturalness, text_similarity)
// with an intercept. Solved on centred data, so a constant target gives
// exactly zero slopes.
inline EnsembleWeights fit_ensemble(std::vector<EnsembleRow> rows) {
  if (rows.size() < 3) throw InvalidInput("ensemble fit needs at least 3 rows, got " + std::to_string(rows.size()));
  for (const auto& r : rows) {
    if (!std::isfinite(r.naturalness) || !std::isfinite(r.text_similarity) || !std::isfinite(r.human_score)) {
      throw InvalidInput("ensemble rows must be finite");
    }
  }
  // Canonical order makes the floating-point sums independent of input order.
  std::sort(rows.begin(), rows.end(), [](const EnsembleRow& a, const EnsembleRow& b) {
    return std::tie(a.naturalness, a.text_similarity, a.human_score) <
           std::tie(b.naturalness, b.text_similarity, b.human_score);
  });
  const std::size_t n = rows.size();
  std::vector<double> x1(n), x2(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = rows[i].naturalness;
    x2[i] = rows[i].text_similarity;
    y[i] = rows[i].human_score;
  }
  const double m1 = detail::mean(x1), m2 = detail::mean(x2), my = detail::mean(y);

  Eigen::Matrix2d sxx = Eigen::Matrix2d::Zero();
  Eigen::Vector2d sxy = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d d(x1[i] - m1, x2[i] - m2);
    sxx += d * d.transpose();
    sxy += d * (y[i] - my);
  }
  const double scale = sxx(0, 0) * sxx(1, 1);
  if (sxx(0, 0) == 0.0 || sxx(1, 1) == 0.0 || sxx.determinant() <= 1e-12 * scale) {
    throw InvalidInput("ensemble design matrix is rank deficient (constant or collinear predictors)");
  }
  const Eigen::Vector2d beta = sxx.ldlt().solve(sxy);

  EnsembleWeights w;
  w.w_naturalness = sxy.isZero(0.0) ? 0.0 : beta(0);
  w.w_textsim = sxy.isZero(0.0) ? 0.0 : beta(1);
  w.intercept = my - w.w_naturalness * m1 - w.w_textsim * m2;
  w.meta["rows"] = n;
  w.validate();
  return w;
}

inline double raw_score(double naturalness, double text_similarity, const EnsembleWeights& w) {
  return w.intercept + w.w_naturalness * naturalness + w.w_textsim * text_similarity;
}

inline double score_video(double naturalness, double text_similarity, const EnsembleWeights& w) {
  if (!(naturalness >= 0.0 && naturalness <= 1.0)) {
    throw InvalidInput("naturalness out of [0,1]: " + std::to_string(naturalness));
  }
  if (!(text_similarity >= 0.0 && text_similarity <= 1.0)) {
    throw InvalidInput("text similarity out of [0,1]: " + std::to_string(text_similarity));
  }
  return std::clamp(raw_score(naturalness, text_similarity, w), 0.0, 1.0);
}

inline nlohmann::ordered_json to_json(const EnsembleWeights& w) {
  return {{"intercept", w.intercept}, {"w_naturalness", w.w_naturalness}, {"w_textsim", w.w_textsim}, {"meta", w.meta}};
}

inline EnsembleWeights weights_from_json(const nlohmann::ordered_json& j) {
  EnsembleWeights w;
  try {
    w.intercept = j.at("intercept").get<double>();
    w.w_naturalness = j.at("w_naturalness").get<double>();
    w.w_textsim = j.at("w_textsim").get<double>();
    if (j.contains("meta")) w.meta = j.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed ensemble weights: ") + e.what());
  }
  w.validate();
  return w;
}

inline void save_weights(const std::filesystem::path& path, const EnsembleWeights& w) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << to_json(w).dump(2) << '\n';
  if (!out) throw IoError("cannot write ensemble weights " + path.string());
}

inline EnsembleWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ensemble weights " + path.string());
  const auto j = nlohmann::ordered_json::parse(in, nullptr, false);
  if (j.is_discarded()) throw InvalidInput(path.string() + ": not valid JSON");
  return weights_from_json(j);
}

}  // namespace t2vqa::ensemble
