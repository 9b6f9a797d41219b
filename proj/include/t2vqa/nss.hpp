#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "t2vqa/codec.hpp"
#include "t2vqa/detail/filters.hpp"
#include "t2vqa/error.hpp"
#include "t2vqa/media_io.hpp"

// Natural scene statistics: MSCN coefficients, (A)GGD moment fits, and the
// NIQE / BRISQUE quality scores built on them.
namespace t2vqa::nss {

inline constexpr int kFeatureDim = 36;
inline constexpr int kModelVersion = 1;

using PatchFeatures = std::array<double, kFeatureDim>;

// Mean-subtracted contrast-normalized coefficients with a 7x7 Gaussian
// window (sigma 7/6) on the 0..255 intensity scale, stabilizer C = 1.
inline FloatPlane mscn(const FloatPlane& image) {
  static const std::vector<double> window = t2vqa::detail::gaussian_kernel(3, 7.0 / 6.0);
  const FloatPlane mu = t2vqa::detail::separable_filter(image, window, window);
  FloatPlane sq(image.width, image.height);
  for (std::size_t i = 0; i < sq.size(); ++i) sq.pixels[i] = image.pixels[i] * image.pixels[i];
  const FloatPlane mu_sq = t2vqa::detail::separable_filter(sq, window, window);
  FloatPlane out(image.width, image.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double sigma = std::sqrt(std::abs(mu_sq.pixels[i] - mu.pixels[i] * mu.pixels[i]));
    out.pixels[i] = (image.pixels[i] - mu.pixels[i]) / (sigma + 1.0);
  }
  return out;
}

namespace detail {

struct GammaGrid {
  std::vector<double> shape;
  std::vector<double> ggd_ratio;   // G(1/a)G(3/a)/G(2/a)^2
  std::vector<double> aggd_ratio;  // G(2/a)^2/(G(1/a)G(3/a))
};

inline const GammaGrid& gamma_grid() {
  static const GammaGrid grid = [] {
    GammaGrid g;
    for (int i = 0; i < 9800; ++i) {
      const double a = 0.2 + 0.001 * i;
      const double g1 = std::tgamma(1.0 / a), g2 = std::tgamma(2.0 / a), g3 = std::tgamma(3.0 / a);
      g.shape.push_back(a);
      g.ggd_ratio.push_back(g1 * g3 / (g2 * g2));
      g.aggd_ratio.push_back(g2 * g2 / (g1 * g3));
    }
    return g;
  }();
  return grid;
}

inline double nearest_shape(const std::vector<double>& ratios, double target) {
  const auto& grid = gamma_grid();
  std::size_t best = 0;
  double best_diff = std::abs(ratios[0] - target);
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    const double diff = std::abs(ratios[i] - target);
    if (diff < best_diff) {
      best_diff = diff;
      best = i;
    }
  }
  return grid.shape[best];
}

}  // namespace detail

struct GgdParams {
  double shape = 0.0;
  double variance = 0.0;
};

// Symmetric generalized Gaussian fit by moment matching.
inline GgdParams fit_ggd(std::span<const double> x) {
  double sq = 0.0, abs_sum = 0.0;
  for (double v : x) {
    sq += v * v;
    abs_sum += std::abs(v);
  }
  const double n = static_cast<double>(x.size());
  if (x.empty() || abs_sum == 0.0) return {};
  const double variance = sq / n;
  const double mean_abs = abs_sum / n;
  const double rho = variance / (mean_abs * mean_abs);
  return {detail::nearest_shape(detail::gamma_grid().ggd_ratio, rho), variance};
}

struct AggdParams {
  double shape = 0.0;
  double mean = 0.0;
  double left_variance = 0.0;
  double right_variance = 0.0;
};

// Asymmetric generalized Gaussian fit by moment matching.
inline AggdParams fit_aggd(std::span<const double> x) {
  double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0;
  std::size_t left_n = 0, right_n = 0;
  for (double v : x) {
    if (v < 0) {
      left_sq += v * v;
      ++left_n;
    } else if (v > 0) {
      right_sq += v * v;
      ++right_n;
    }
    abs_sum += std::abs(v);
  }
  if (left_n + right_n == 0) return {};
  double left_std = left_n ? std::sqrt(left_sq / left_n) : 0.0;
  double right_std = right_n ? std::sqrt(right_sq / right_n) : 0.0;
  // One-sided samples: mirror the populated side.
  if (left_n == 0) left_std = right_std;
  if (right_n == 0) right_std = left_std;

  const double n = static_cast<double>(x.size());
  const double gamma_hat = left_std / right_std;
  const double r_hat = (abs_sum / n) * (abs_sum / n) / ((left_sq + right_sq) / n);
  const double r_hat_norm = r_hat * (gamma_hat * gamma_hat * gamma_hat + 1) * (gamma_hat + 1) /
                            ((gamma_hat * gamma_hat + 1) * (gamma_hat * gamma_hat + 1));
  const double shape = detail::nearest_shape(detail::gamma_grid().aggd_ratio, r_hat_norm);
  const double g1 = std::tgamma(1.0 / shape), g2 = std::tgamma(2.0 / shape), g3 = std::tgamma(3.0 / shape);
  const double mean = (right_std - left_std) * (g2 / g1) * std::sqrt(g1 / g3);
  return {shape, mean, left_std * left_std, right_std * right_std};
}

namespace detail {

inline FloatPlane downsample2(const FloatPlane& in) {
  FloatPlane out(std::max(1, in.width / 2), std::max(1, in.height / 2));
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const int x0 = std::min(2 * x, in.width - 1), x1 = std::min(2 * x + 1, in.width - 1);
      const int y0 = std::min(2 * y, in.height - 1), y1 = std::min(2 * y + 1, in.height - 1);
      out.at(x, y) = 0.25 * (in.at(x0, y0) + in.at(x1, y0) + in.at(x0, y1) + in.at(x1, y1));
    }
  }
  return out;
}

// Eighteen features of one patch at one scale: GGD(shape, variance) of the
// MSCN values, then AGGD(shape, mean, left var, right var) of the products
// with the horizontal, vertical and two diagonal neighbours.
inline void patch_scale_features(const FloatPlane& coeffs, int x0, int y0, int size, double* out) {
  std::vector<double> values;
  values.reserve(std::size_t(size) * size);
  for (int y = y0; y < y0 + size; ++y) {
    for (int x = x0; x < x0 + size; ++x) values.push_back(coeffs.at(x, y));
  }
  const GgdParams ggd = fit_ggd(values);
  out[0] = ggd.shape;
  out[1] = ggd.variance;

  static constexpr int kShifts[4][2] = {{1, 0}, {0, 1}, {1, 1}, {-1, 1}};  // (dx, dy)
  for (int s = 0; s < 4; ++s) {
    const int dx = kShifts[s][0], dy = kShifts[s][1];
    std::vector<double> products;
    products.reserve(values.size());
    for (int y = y0; y < y0 + size; ++y) {
      for (int x = x0; x < x0 + size; ++x) {
        const int nx = x + dx, ny = y + dy;
        if (nx < x0 || nx >= x0 + size || ny >= y0 + size) continue;
        products.push_back(coeffs.at(x, y) * coeffs.at(nx, ny));
      }
    }
    const AggdParams a = fit_aggd(products);
    out[2 + 4 * s + 0] = a.shape;
    out[2 + 4 * s + 1] = a.mean;
    out[2 + 4 * s + 2] = a.left_variance;
    out[2 + 4 * s + 3] = a.right_variance;
  }
}

inline bool patch_is_flat(const FloatPlane& coeffs, int x0, int y0, int size) {
  for (int y = y0; y < y0 + size; ++y) {
    for (int x = x0; x < x0 + size; ++x) {
      if (std::abs(coeffs.at(x, y)) > 1e-9) return false;
    }
  }
  return true;
}

}  // namespace detail

struct PatchSet {
  std::vector<PatchFeatures> features;
  std::vector<bool> flat;  // MSCN identically zero (constant patch)
  std::size_t flat_count() const { return static_cast<std::size_t>(std::count(flat.begin(), flat.end(), true)); }
};

// Non-overlapping patch_size blocks from the top-left corner; features at
// full and half resolution. Flat patches get an all-zero feature vector.
inline PatchSet patch_features(const GrayFrame& frame, int patch_size) {
  if (patch_size < 4 || patch_size % 2 != 0) {
    throw InvalidInput("patch size must be an even number >= 4");
  }
  if (frame.width < patch_size || frame.height < patch_size) {
    throw InvalidInput("frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                       " smaller than one " + std::to_string(patch_size) + "px patch");
  }
  const FloatPlane full = t2vqa::detail::to_float(frame);
  const FloatPlane half = detail::downsample2(full);
  const FloatPlane coeffs[2] = {mscn(full), mscn(half)};

  PatchSet set;
  const int cols = frame.width / patch_size, rows = frame.height / patch_size;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      PatchFeatures f{};
      bool flat = true;
      for (int scale = 0; scale < 2; ++scale) {
        const int size = patch_size >> scale;
        flat = flat && detail::patch_is_flat(coeffs[scale], c * size, r * size, size);
      }
      if (!flat) {
        for (int scale = 0; scale < 2; ++scale) {
          const int size = patch_size >> scale;
          detail::patch_scale_features(coeffs[scale], c * size, r * size, size, f.data() + 18 * scale);
        }
      }
      set.features.push_back(f);
      set.flat.push_back(flat);
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// NIQE

struct NiqeModel {
  std::vector<double> mean;        // feature_dim
  std::vector<double> covariance;  // feature_dim x feature_dim, row-major
  int patch_size = 96;
  int feature_dim = kFeatureDim;

  Eigen::Map<const Eigen::VectorXd> mean_vector() const {
    return {mean.data(), static_cast<Eigen::Index>(mean.size())};
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> covariance_matrix() const {
    return {covariance.data(), feature_dim, feature_dim};
  }

  void validate() const {
    if (feature_dim != kFeatureDim) throw InvalidInput("NIQE model: feature_dim must be 36");
    if (mean.size() != std::size_t(feature_dim)) throw InvalidInput("NIQE model: mean length != feature_dim");
    if (covariance.size() != std::size_t(feature_dim) * feature_dim) {
      throw InvalidInput("NIQE model: covariance is not feature_dim x feature_dim");
    }
    if (patch_size < 4 || patch_size % 2) throw InvalidInput("NIQE model: invalid patch_size");
    const Eigen::MatrixXd cov = covariance_matrix();
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
      throw InvalidInput("NIQE model: covariance not symmetric");
    }
    for (double v : covariance) {
      if (!std::isfinite(v)) throw InvalidInput("NIQE model: non-finite covariance entry");
    }
    for (double v : mean) {
      if (!std::isfinite(v)) throw InvalidInput("NIQE model: non-finite mean entry");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8 * scale) {
      throw InvalidInput("NIQE model: covariance not positive semi-definite");
    }
  }
};

struct MvgFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// Sample mean and unbiased covariance of row vectors.
inline MvgFit fit_mvg(std::span<const PatchFeatures> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, kFeatureDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < kFeatureDim; ++j) x(i, j) = rows[i][j];
  }
  MvgFit fit;
  fit.mean = n ? Eigen::VectorXd(x.colwise().mean().transpose()) : Eigen::VectorXd::Zero(kFeatureDim);
  fit.covariance = Eigen::MatrixXd::Zero(kFeatureDim, kFeatureDim);
  if (n > 1) {
    const Eigen::MatrixXd centered = x.rowwise() - fit.mean.transpose();
    fit.covariance = centered.transpose() * centered / static_cast<double>(n - 1);
    fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose());
  }
  return fit;
}

inline NiqeModel niqe_model_from_patches(std::span<const PatchFeatures> rows, int patch_size) {
  if (rows.size() < std::size_t(kFeatureDim) + 1) {
    throw InvalidInput("insufficient patches to fit NIQE model: " + std::to_string(rows.size()) +
                       " < " + std::to_string(kFeatureDim + 1));
  }
  const MvgFit fit = fit_mvg(rows);
  NiqeModel model;
  model.patch_size = patch_size;
  model.mean.assign(fit.mean.data(), fit.mean.data() + kFeatureDim);
  model.covariance.resize(std::size_t(kFeatureDim) * kFeatureDim);
  for (int i = 0; i < kFeatureDim; ++i) {
    for (int j = 0; j < kFeatureDim; ++j) model.covariance[std::size_t(i) * kFeatureDim + j] = fit.covariance(i, j);
  }
  return model;
}

// Pristine model from >= 10 frames; flat patches are excluded.
inline NiqeModel fit_niqe_model(std::span<const GrayFrame> pristine, int patch_size = 96) {
  if (pristine.size() < 10) {
    throw InvalidInput("fit_niqe_model needs at least 10 frames, got " + std::to_string(pristine.size()));
  }
  std::vector<PatchFeatures> rows;
  for (const auto& frame : pristine) {
    const PatchSet set = patch_features(frame, patch_size);
    for (std::size_t i = 0; i < set.features.size(); ++i) {
      if (!set.flat[i]) rows.push_back(set.features[i]);
    }
  }
  return niqe_model_from_patches(rows, patch_size);
}

struct NiqeResult {
  double score = 0.0;
  bool degenerate = false;        // at least one constant patch scored as zero features
  bool pseudo_inverse = false;    // pooled covariance was singular
};

inline NiqeResult niqe_distance(const NiqeModel& model, std::span<const PatchFeatures> patches) {
  const MvgFit sample = fit_mvg(patches);
  const Eigen::VectorXd diff = model.mean_vector() - sample.mean;
  const Eigen::MatrixXd pooled = 0.5 * (Eigen::MatrixXd(model.covariance_matrix()) + sample.covariance);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pooled);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double largest = std::max(std::abs(lambda.maxCoeff()), std::abs(lambda.minCoeff()));
  const double cutoff = largest * kFeatureDim * 1e-12;
  NiqeResult result;
  Eigen::VectorXd inv(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > cutoff) {
      inv(i) = 1.0 / lambda(i);
    } else {
      inv(i) = 0.0;
      result.pseudo_inverse = true;
    }
  }
  const Eigen::VectorXd projected = eig.eigenvectors().transpose() * diff;
  const double quad = projected.cwiseProduct(inv).dot(projected);
  result.score = std::sqrt(std::max(0.0, quad));
  return result;
}

inline NiqeResult niqe_score(const GrayFrame& channel, const NiqeModel& model) {
  if (channel.width < 2 * model.patch_size || channel.height < 2 * model.patch_size) {
    throw InvalidInput("niqe_score: frame " + std::to_string(channel.width) + "x" +
                       std::to_string(channel.height) + " smaller than 2x patch size " +
                       std::to_string(model.patch_size));
  }
  const PatchSet set = patch_features(channel, model.patch_size);
  NiqeResult result = niqe_distance(model, set.features);
  result.degenerate = set.flat_count() > 0;
  return result;
}

// ---------------------------------------------------------------------------
// BRISQUE (inference only)

struct BrisqueModel {
  int feature_dim = kFeatureDim;
  int block_size = 96;
  std::vector<double> pca_mean;   // feature_dim
  std::vector<double> pca_basis;  // components x feature_dim, row-major
  int components = 0;
  double svr_gamma = 0.0;
  double svr_bias = 0.0;
  std::vector<double> support_vectors;  // count x components, row-major
  std::vector<double> dual_coefs;       // count

  void validate() const {
    if (feature_dim != kFeatureDim) throw InvalidInput("BRISQUE model: feature_dim must be 36");
    if (components <= 0) throw InvalidInput("BRISQUE model: components must be positive");
    if (pca_mean.size() != std::size_t(feature_dim)) throw InvalidInput("BRISQUE model: pca_mean length");
    if (pca_basis.size() != std::size_t(components) * feature_dim) {
      throw InvalidInput("BRISQUE model: pca_basis is not components x feature_dim");
    }
    if (dual_coefs.empty() || support_vectors.size() != dual_coefs.size() * components) {
      throw InvalidInput("BRISQUE model: support vectors inconsistent with coefficients");
    }
    if (!(svr_gamma > 0.0)) throw InvalidInput("BRISQUE model: svr gamma must be positive");
    if (block_size < 4 || block_size % 2) throw InvalidInput("BRISQUE model: invalid block_size");
  }

  double evaluate(const PatchFeatures& f) const {
    std::vector<double> z(components, 0.0);
    for (int c = 0; c < components; ++c) {
      for (int j = 0; j < feature_dim; ++j) z[c] += pca_basis[std::size_t(c) * feature_dim + j] * (f[j] - pca_mean[j]);
    }
    double out = svr_bias;
    for (std::size_t s = 0; s < dual_coefs.size(); ++s) {
      double d2 = 0.0;
      for (int c = 0; c < components; ++c) {
        const double d = z[c] - support_vectors[s * components + c];
        d2 += d * d;
      }
      out += dual_coefs[s] * std::exp(-svr_gamma * d2);
    }
    return out;
  }
};

// Mean SVR prediction over non-overlapping blocks (higher = worse).
inline double brisque_score(const GrayFrame& frame, const BrisqueModel& model) {
  if (frame.width < model.block_size || frame.height < model.block_size) {
    throw InvalidInput("brisque_score: frame smaller than one " + std::to_string(model.block_size) + "px block");
  }
  const PatchSet set = patch_features(frame, model.block_size);
  double sum = 0.0;
  for (const auto& f : set.features) sum += model.evaluate(f);
  return sum / static_cast<double>(set.features.size());
}

// ---------------------------------------------------------------------------
// Model files: versioned JSON, float64 matrices as base64 little-endian.

inline nlohmann::json to_json(const NiqeModel& m) {
  return {{"version", kModelVersion},
          {"kind", "niqe"},
          {"feature_dim", m.feature_dim},
          {"patch_size", m.patch_size},
          {"mean", codec::encode_f64(m.mean)},
          {"covariance", codec::encode_f64(m.covariance)}};
}

namespace detail {
inline void check_version(const nlohmann::json& j, std::string_view what) {
  if (!j.contains("version") || j.at("version").get<int>() != kModelVersion) {
    throw InvalidInput(std::string(what) + ": unsupported or missing model version");
  }
}
}  // namespace detail

inline NiqeModel niqe_model_from_json(const nlohmann::json& j) {
  try {
    detail::check_version(j, "NIQE model");
    NiqeModel m;
    m.feature_dim = j.at("feature_dim").get<int>();
    m.patch_size = j.value("patch_size", 96);
    m.mean = codec::decode_f64(j.at("mean").get<std::string>());
    m.covariance = codec::decode_f64(j.at("covariance").get<std::string>());
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("NIQE model: ") + e.what());
  }
}

inline nlohmann::json to_json(const BrisqueModel& m) {
  return {{"version", kModelVersion},
          {"kind", "brisque"},
          {"feature_dim", m.feature_dim},
          {"block_size", m.block_size},
          {"components", m.components},
          {"pca_mean", codec::encode_f64(m.pca_mean)},
          {"pca_basis", codec::encode_f64(m.pca_basis)},
          {"svr",
           {{"kernel", "rbf"},
            {"gamma", m.svr_gamma},
            {"bias", m.svr_bias},
            {"support_vectors", codec::encode_f64(m.support_vectors)},
            {"dual_coefs", codec::encode_f64(m.dual_coefs)}}}};
}

inline BrisqueModel brisque_model_from_json(const nlohmann::json& j) {
  try {
    detail::check_version(j, "BRISQUE model");
    BrisqueModel m;
    m.feature_dim = j.at("feature_dim").get<int>();
    m.block_size = j.value("block_size", 96);
    m.components = j.at("components").get<int>();
    m.pca_mean = codec::decode_f64(j.at("pca_mean").get<std::string>());
    m.pca_basis = codec::decode_f64(j.at("pca_basis").get<std::string>());
    const auto& svr = j.at("svr");
    if (svr.value("kernel", "rbf") != "rbf") throw InvalidInput("BRISQUE model: only rbf kernel supported");
    m.svr_gamma = svr.at("gamma").get<double>();
    m.svr_bias = svr.at("bias").get<double>();
    m.support_vectors = codec::decode_f64(svr.at("support_vectors").get<std::string>());
    m.dual_coefs = codec::decode_f64(svr.at("dual_coefs").get<std::string>());
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("BRISQUE model: ") + e.what());
  }
}

namespace detail {
inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}
}  // namespace detail

inline NiqeModel load_niqe_model(const std::filesystem::path& path) {
  return niqe_model_from_json(detail::read_json_file(path));
}
inline void save_niqe_model(const std::filesystem::path& path, const NiqeModel& m) {
  detail::write_json_file(path, to_json(m));
}
inline BrisqueModel load_brisque_model(const std::filesystem::path& path) {
  return brisque_model_from_json(detail::read_json_file(path));
}
inline void save_brisque_model(const std::filesystem::path& path, const BrisqueModel& m) {
  detail::write_json_file(path, to_json(m));
}

}  // namespace t2vqa::nss
