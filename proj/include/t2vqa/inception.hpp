#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "t2vqa/error.hpp"

namespace t2vqa {

// Per-frame class probability distributions, all over the same K classes.
struct ClassProbs {
  int classes = 0;
  std::vector<std::vector<double>> frames;

  void validate(double tolerance = 1e-6) const {
    if (classes < 1) throw InvalidInput("class probabilities: classes must be >= 1");
    if (frames.empty()) throw InvalidInput("class probabilities: no frames");
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const auto& p = frames[f];
      if (p.size() != std::size_t(classes)) {
        throw InvalidInput("class probabilities: frame " + std::to_string(f) + " has " +
                           std::to_string(p.size()) + " entries, expected " + std::to_string(classes));
      }
      double sum = 0.0;
      for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw InvalidInput("class probabilities: frame " + std::to_string(f) + " has a negative or non-finite entry");
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > tolerance) {
        throw InvalidInput("class probabilities: frame " + std::to_string(f) + " sums to " + std::to_string(sum));
      }
    }
  }

  std::vector<double> marginal() const {
    std::vector<double> mean(classes, 0.0);
    for (const auto& p : frames) {
      for (int k = 0; k < classes; ++k) mean[k] += p[k];
    }
    for (double& v : mean) v /= static_cast<double>(frames.size());
    return mean;
  }
};

namespace detail {
// KL(p || q) in nats; terms with p = 0 contribute nothing.
inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) kl += p[k] * std::log(p[k] / q[k]);
  }
  return kl;
}
}  // namespace detail

// exp(KL(mean distribution || uniform)) = exp(ln K - H(mean)). Rewards videos
// whose frames agree on a confident class; ranges over [1, K].
inline double modified_inception_score(const ClassProbs& probs) {
  probs.validate();
  const auto mean = probs.marginal();
  double entropy = 0.0;
  for (double p : mean) {
    if (p > 0.0) entropy -= p * std::log(p);
  }
  const double k = static_cast<double>(probs.classes);
  return std::clamp(std::exp(std::log(k) - entropy), 1.0, k);
}

// Classic IS: exp(mean over frames of KL(p_i || mean distribution)).
inline double inception_score(const ClassProbs& probs) {
  probs.validate();
  const auto mean = probs.marginal();
  double total = 0.0;
  for (const auto& p : probs.frames) total += detail::kl_divergence(p, mean);
  return std::max(1.0, std::exp(total / static_cast<double>(probs.frames.size())));
}

inline ClassProbs class_probs_from_json(const nlohmann::json& j) {
  try {
    ClassProbs probs;
    probs.classes = j.at("classes").get<int>();
    probs.frames = j.at("frames").get<std::vector<std::vector<double>>>();
    probs.validate();
    return probs;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("class probabilities: ") + e.what());
  }
}

inline nlohmann::json to_json(const ClassProbs& probs) {
  return {{"classes", probs.classes}, {"frames", probs.frames}};
}

inline ClassProbs load_class_probs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return class_probs_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

}  // namespace t2vqa
