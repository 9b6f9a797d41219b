#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "t2vqa/codec.hpp"
#include "t2vqa/csv.hpp"
#include "t2vqa/error.hpp"
#include "t2vqa/parallel.hpp"
#include "t2vqa/video_features.hpp"

namespace t2vqa::gbt {

inline constexpr int kModelVersion = 1;

enum class Split { Train, Val, Test };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val" || s == "validation") return Split::Val;
  if (s == "test") return Split::Test;
  throw InvalidInput("unknown split '" + std::string(s) + "' (expected train, val or test)");
}

using Row = std::vector<std::optional<double>>;

struct LabelledSet {
  std::vector<std::string> feature_names;
  std::vector<std::string> ids;
  std::vector<Row> rows;
  std::vector<int> labels;  // 1 natural, 0 non-natural
  std::vector<std::optional<Split>> splits;

  std::size_t size() const { return rows.size(); }

  void add(std::string id, Row row, int label, std::optional<Split> split = std::nullopt) {
    if (row.size() != feature_names.size()) throw InvalidInput("row width does not match feature names");
    if (label != 0 && label != 1) throw InvalidInput("label must be 0 or 1");
    ids.push_back(std::move(id));
    rows.push_back(std::move(row));
    labels.push_back(label);
    splits.push_back(split);
  }

  LabelledSet subset(Split s) const {
    LabelledSet out;
    out.feature_names = feature_names;
    for (std::size_t i = 0; i < size(); ++i) {
      if (splits[i] == s) out.add(ids[i], rows[i], labels[i], s);
    }
    return out;
  }

  void validate() const {
    std::set<std::string> seen;
    for (const auto& id : ids) {
      if (!id.empty() && !seen.insert(id).second) throw InvalidInput("duplicate video id '" + id + "'");
    }
  }
};

struct TrainConfig {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.3;
  double min_child_weight = 1.0;
  double subsample = 1.0;
  double l2_reg = 1.0;
  double min_split_gain = 0.0;  // gamma
  std::uint64_t seed = 42;

  void validate() const {
    if (n_trees < 1) throw InvalidInput("n_trees must be >= 1");
    if (max_depth < 1) throw InvalidInput("max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw InvalidInput("learning_rate must be in (0, 1]");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw InvalidInput("subsample must be in (0, 1]");
    if (!(l2_reg >= 0.0) || !(min_child_weight >= 0.0) || !(min_split_gain >= 0.0)) {
      throw InvalidInput("l2_reg, min_child_weight and min_split_gain must be >= 0");
    }
  }
};

// Split nodes route x[feature] < threshold to `left`; leaves carry `leaf`.
struct Node {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf = 0.0;
  double gain = 0.0;
  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<Node> nodes;  // nodes[0] is the root

  double evaluate(std::span<const double> x) const {
    int i = 0;
    while (!nodes[i].is_leaf()) i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].leaf;
  }
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct GbtModel {
  std::vector<std::string> feature_names;
  std::vector<double> imputation;  // training-split medians
  double base_score = 0.0;         // log-odds
  double learning_rate = 0.3;
  std::vector<Tree> trees;
  TrainConfig config;

  std::vector<double> impute(const Row& row) const {
    if (row.size() != feature_names.size()) throw InvalidInput("row width does not match model features");
    std::vector<double> x(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      x[j] = row[j] ? *row[j] : imputation[j];
      if (!std::isfinite(x[j])) throw InvalidInput("non-finite value for feature '" + feature_names[j] + "'");
    }
    return x;
  }

  double margin(std::span<const double> x, std::size_t max_trees = SIZE_MAX) const {
    double sum = 0.0;
    for (std::size_t t = 0; t < std::min(max_trees, trees.size()); ++t) sum += trees[t].evaluate(x);
    return base_score + learning_rate * sum;
  }

  double predict(const Row& row) const { return sigmoid(margin(impute(row))); }

  void validate() const {
    if (imputation.size() != feature_names.size()) throw InvalidInput("GBT model: imputation length");
    if (!std::isfinite(base_score) || !std::isfinite(learning_rate)) throw InvalidInput("GBT model: non-finite scalar");
    for (const auto& tree : trees) {
      if (tree.nodes.empty()) throw InvalidInput("GBT model: empty tree");
      const int n = static_cast<int>(tree.nodes.size());
      for (int i = 0; i < n; ++i) {
        const Node& node = tree.nodes[i];
        if (node.is_leaf()) {
          if (!std::isfinite(node.leaf)) throw InvalidInput("GBT model: non-finite leaf");
          continue;
        }
        if (node.feature >= static_cast<int>(feature_names.size())) {
          throw InvalidInput("GBT model: feature index out of range");
        }
        if (node.left <= i || node.right <= i || node.left >= n || node.right >= n) {
          throw InvalidInput("GBT model: malformed child index");
        }
      }
    }
  }
};

// Predicts from named values; the names must be exactly the model's features.
inline double predict_naturalness(const GbtModel& model, const std::map<std::string, std::optional<double>>& named) {
  Row row(model.feature_names.size());
  for (std::size_t j = 0; j < model.feature_names.size(); ++j) {
    auto it = named.find(model.feature_names[j]);
    if (it == named.end()) throw InvalidInput("missing feature '" + model.feature_names[j] + "'");
    row[j] = it->second;
  }
  if (named.size() != model.feature_names.size()) {
    for (const auto& [name, v] : named) {
      if (std::find(model.feature_names.begin(), model.feature_names.end(), name) == model.feature_names.end()) {
        throw InvalidInput("unexpected feature '" + name + "'");
      }
    }
  }
  return model.predict(row);
}

inline double predict_naturalness(const GbtModel& model, const FeatureVector& fv) {
  std::map<std::string, std::optional<double>> named;
  for (std::size_t i = 0; i < fv.values.size(); ++i) named[feature_schema()[i]] = fv.values[i];
  return predict_naturalness(model, named);
}

inline int classify_threshold(double score, double threshold = 0.5) { return score >= threshold ? 1 : 0; }

inline double f1_score(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw InvalidInput("f1_score: length mismatch");
  if (predictions.empty()) throw InvalidInput("f1_score: no examples");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] && labels[i]) ++tp;
    else if (predictions[i]) ++fp;
    else if (labels[i]) ++fn;
  }
  const long denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * tp / static_cast<double>(denom);
}

inline double log_loss(double p, int y) {
  constexpr double kEps = 1e-15;
  p = std::clamp(p, kEps, 1.0 - kEps);
  return y ? -std::log(p) : -std::log(1.0 - p);
}

// Median of present values per column; 0 for columns with none.
inline std::vector<double> column_medians(const std::vector<Row>& rows, std::size_t width) {
  std::vector<double> out(width, 0.0);
  for (std::size_t j = 0; j < width; ++j) {
    std::vector<double> v;
    for (const auto& r : rows) {
      if (r[j]) {
        if (!std::isfinite(*r[j])) throw InvalidInput("non-finite training value in column " + std::to_string(j));
        v.push_back(*r[j]);
      }
    }
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    out[j] = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }
  return out;
}

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// A candidate replaces the incumbent only if it is better by more than
// rounding noise, so ties go to the lowest feature, then lowest threshold.
inline bool better_gain(double candidate, double incumbent) {
  return candidate > incumbent + 1e-12 * std::max(1.0, std::abs(incumbent));
}

inline double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  const double g = gl + gr, h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
}

// Exhaustive greedy split search over midpoints between distinct values.
inline std::optional<SplitCandidate> best_split(const std::vector<std::vector<double>>& x, std::span<const double> g,
                                                std::span<const double> h, std::span<const std::size_t> idx,
                                                const TrainConfig& cfg) {
  if (idx.size() < 2) return std::nullopt;
  double gt = 0.0, ht = 0.0;
  for (auto i : idx) {
    gt += g[i];
    ht += h[i];
  }
  std::optional<SplitCandidate> best;
  const std::size_t width = x.empty() ? 0 : x[0].size();
  std::vector<std::size_t> order(idx.begin(), idx.end());
  for (std::size_t f = 0; f < width; ++f) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
    double gl = 0.0, hl = 0.0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      gl += g[order[k]];
      hl += h[order[k]];
      const double lo = x[order[k]][f], hi = x[order[k + 1]][f];
      if (!(lo < hi)) continue;
      const double gr = gt - gl, hr = ht - hl;
      if (hl < cfg.min_child_weight || hr < cfg.min_child_weight) continue;
      const double gain = split_gain(gl, hl, gr, hr, cfg.l2_reg, cfg.min_split_gain);
      if (!(gain > 0.0)) continue;
      if (!best || better_gain(gain, best->gain)) {
        best = SplitCandidate{static_cast<int>(f), std::midpoint(lo, hi), gain};
      }
    }
  }
  return best;
}

namespace detail {

inline int grow(Tree& tree, const std::vector<std::vector<double>>& x, std::span<const double> g,
                std::span<const double> h, std::vector<std::size_t> idx, int depth, const TrainConfig& cfg) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  std::optional<SplitCandidate> split;
  if (depth < cfg.max_depth) split = best_split(x, g, h, idx, cfg);
  if (!split) {
    double gs = 0.0, hs = 0.0;
    for (auto i : idx) {
      gs += g[i];
      hs += h[i];
    }
    tree.nodes[id].leaf = -gs / (hs + cfg.l2_reg);
    return id;
  }
  std::vector<std::size_t> left, right;
  for (auto i : idx) (x[i][split->feature] < split->threshold ? left : right).push_back(i);
  tree.nodes[id].feature = split->feature;
  tree.nodes[id].threshold = split->threshold;
  tree.nodes[id].gain = split->gain;
  const int l = grow(tree, x, g, h, std::move(left), depth + 1, cfg);
  const int r = grow(tree, x, g, h, std::move(right), depth + 1, cfg);
  tree.nodes[id].left = l;
  tree.nodes[id].right = r;
  return id;
}

}  // namespace detail

// Stagewise Newton boosting of logistic loss. Rows are put in a canonical
// order first, so the result does not depend on input row order.
inline GbtModel train_gbt(const LabelledSet& data, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = data.size();
  const long positives = std::count(data.labels.begin(), data.labels.end(), 1);
  if (positives < 2 || static_cast<long>(n) - positives < 2) {
    throw InvalidInput("training set needs at least 2 examples of each class (got " + std::to_string(positives) +
                       " natural, " + std::to_string(n - positives) + " non-natural)");
  }

  GbtModel model;
  model.feature_names = data.feature_names;
  model.learning_rate = cfg.learning_rate;
  model.config = cfg;
  model.imputation = column_medians(data.rows, data.feature_names.size());

  std::vector<std::vector<double>> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = model.impute(data.rows[i]);
  std::vector<std::size_t> canon(n);
  std::iota(canon.begin(), canon.end(), 0);
  std::stable_sort(canon.begin(), canon.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return data.labels[a] < data.labels[b];
  });
  std::vector<std::vector<double>> xs(n);
  std::vector<int> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    xs[k] = std::move(x[canon[k]]);
    y[k] = data.labels[canon[k]];
  }

  const double rate = static_cast<double>(positives) / static_cast<double>(n);
  model.base_score = std::log(rate / (1.0 - rate));

  std::vector<double> margin(n, model.base_score), g(n), h(n);
  codec::SplitMix64 rng(cfg.seed);
  for (int t = 0; t < cfg.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      g[i] = p - y[i];
      h[i] = p * (1.0 - p);
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (cfg.subsample >= 1.0 || rng.uniform() < cfg.subsample) idx.push_back(i);
    }
    if (idx.empty()) {
      idx.resize(n);
      std::iota(idx.begin(), idx.end(), 0);
    }
    Tree tree;
    detail::grow(tree, xs, g, h, std::move(idx), 0, cfg);
    for (std::size_t i = 0; i < n; ++i) margin[i] += cfg.learning_rate * tree.evaluate(xs[i]);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline std::vector<double> predict_all(const GbtModel& model, const LabelledSet& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& row : data.rows) out.push_back(model.predict(row));
  return out;
}

inline double evaluate_f1(const GbtModel& model, const LabelledSet& data, double threshold = 0.5) {
  std::vector<int> pred;
  for (double p : predict_all(model, data)) pred.push_back(classify_threshold(p, threshold));
  return f1_score(pred, data.labels);
}

// ---------------------------------------------------------------------------
// Grid search

struct Grid {
  std::vector<int> n_trees = {50, 100, 200};
  std::vector<int> max_depth = {2, 3, 4};
  std::vector<double> learning_rate = {0.1, 0.3};
  std::vector<double> l2_reg = {1.0};
  TrainConfig base;  // remaining fields

  // Lexicographic in (n_trees, max_depth, learning_rate, l2_reg).
  std::vector<TrainConfig> configs() const {
    std::vector<TrainConfig> out;
    for (int nt : n_trees)
      for (int md : max_depth)
        for (double lr : learning_rate)
          for (double l2 : l2_reg) {
            TrainConfig c = base;
            c.n_trees = nt;
            c.max_depth = md;
            c.learning_rate = lr;
            c.l2_reg = l2;
            out.push_back(c);
          }
    return out;
  }
};

struct GridPoint {
  TrainConfig config;
  double val_f1 = 0.0;
};

struct GridReport {
  std::vector<GridPoint> points;
  std::size_t best_index = 0;
  double train_f1 = 0.0;
  double val_f1 = 0.0;
  double test_f1 = 0.0;
};

struct GridResult {
  GbtModel model;
  GridReport report;
};

inline GridResult grid_search(const LabelledSet& data, const Grid& grid, int jobs = 1) {
  data.validate();
  const auto configs = grid.configs();
  if (configs.empty()) throw InvalidInput("grid search: empty grid");
  const LabelledSet train = data.subset(Split::Train), val = data.subset(Split::Val), test = data.subset(Split::Test);
  if (train.size() == 0 || val.size() == 0 || test.size() == 0) {
    throw InvalidInput("grid search: train, val and test splits must all be non-empty (sizes " +
                       std::to_string(train.size()) + "/" + std::to_string(val.size()) + "/" +
                       std::to_string(test.size()) + ")");
  }
  std::vector<GbtModel> models(configs.size());
  std::vector<double> scores(configs.size());
  parallel_for(configs.size(), jobs, [&](std::size_t i) {
    models[i] = train_gbt(train, configs[i]);
    scores[i] = evaluate_f1(models[i], val);
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < configs.size(); ++i) {
    const auto& a = configs[i];
    const auto& b = configs[best];
    if (scores[i] != scores[best]) {
      if (scores[i] > scores[best]) best = i;
    } else if (a.n_trees != b.n_trees) {
      if (a.n_trees < b.n_trees) best = i;
    } else if (a.max_depth < b.max_depth) {
      best = i;
    }
  }

  GridResult result;
  for (std::size_t i = 0; i < configs.size(); ++i) result.report.points.push_back({configs[i], scores[i]});
  result.report.best_index = best;
  result.report.train_f1 = evaluate_f1(models[best], train);
  result.report.val_f1 = scores[best];
  result.report.test_f1 = evaluate_f1(models[best], test);
  result.model = std::move(models[best]);
  return result;
}

// Stratified by label; per class the shuffled rows are cut at the given
// fractions, the remainder going to test.
inline std::vector<Split> stratified_split(std::span<const int> labels, std::uint64_t seed, double train_frac = 0.6,
                                           double val_frac = 0.2) {
  if (train_frac <= 0 || val_frac <= 0 || train_frac + val_frac >= 1.0) {
    throw InvalidInput("split fractions must be positive and leave room for test");
  }
  std::vector<Split> out(labels.size(), Split::Test);
  codec::SplitMix64 rng(seed);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.next() % i]);
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * idx.size()));
    const auto n_val = static_cast<std::size_t>(std::llround(val_frac * idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out[idx[k]] = k < n_train ? Split::Train : k < n_train + n_val ? Split::Val : Split::Test;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"n_trees", c.n_trees},         {"max_depth", c.max_depth}, {"learning_rate", c.learning_rate},
          {"min_child_weight", c.min_child_weight}, {"subsample", c.subsample}, {"l2_reg", c.l2_reg},
          {"min_split_gain", c.min_split_gain},     {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.n_trees = j.value("n_trees", c.n_trees);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.min_child_weight = j.value("min_child_weight", c.min_child_weight);
  c.subsample = j.value("subsample", c.subsample);
  c.l2_reg = j.value("l2_reg", c.l2_reg);
  c.min_split_gain = j.value("min_split_gain", c.min_split_gain);
  c.seed = j.value("seed", c.seed);
  return c;
}

inline nlohmann::ordered_json to_json(const GbtModel& m) {
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const auto& tree : m.trees) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : tree.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"leaf", n.leaf}});
      } else {
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"gain", n.gain}});
      }
    }
    trees.push_back({{"nodes", nodes}});
  }
  return {{"version", kModelVersion},
          {"kind", "gbt"},
          {"feature_names", m.feature_names},
          {"base_score", m.base_score},
          {"learning_rate", m.learning_rate},
          {"imputation", m.imputation},
          {"config", to_json(m.config)},
          {"trees", trees}};
}

inline GbtModel gbt_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kModelVersion) throw InvalidInput("GBT model: unsupported version");
    GbtModel m;
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.imputation = j.at("imputation").get<std::vector<double>>();
    if (j.contains("config")) m.config = train_config_from_json(j.at("config"));
    for (const auto& t : j.at("trees")) {
      Tree tree;
      for (const auto& n : t.at("nodes")) {
        Node node;
        if (n.contains("leaf")) {
          node.leaf = n.at("leaf").get<double>();
        } else {
          node.feature = n.at("feature").get<int>();
          node.threshold = n.at("threshold").get<double>();
          node.left = n.at("left").get<int>();
          node.right = n.at("right").get<int>();
          node.gain = n.value("gain", 0.0);
        }
        tree.nodes.push_back(node);
      }
      m.trees.push_back(std::move(tree));
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("GBT model: ") + e.what());
  }
}

inline std::string serialize(const GbtModel& m) { return to_json(m).dump(2) + "\n"; }

inline void save_model(const std::filesystem::path& path, const GbtModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize(m);
  if (!out) throw IoError("cannot write " + path.string());
}

inline GbtModel load_model(const std::filesystem::path& path) {
  return gbt_model_from_json(nss::detail::read_json_file(path));
}

// ---------------------------------------------------------------------------
// Training CSV: feature columns plus `label` and optional `split`. `video_id`
// and `model_name` are carried as metadata; any other column is a feature.

inline LabelledSet labelled_set_from_table(const csv::Table& table, std::string_view source) {
  const std::size_t label_col = table.require_column("label", source);
  const auto split_col = table.column("split");
  const auto id_col = table.column("video_id");
  const auto model_col = table.column("model_name");
  LabelledSet set;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == label_col || c == split_col || c == id_col || c == model_col) continue;
    feature_cols.push_back(c);
    set.feature_names.push_back(table.header[c]);
  }
  if (feature_cols.empty()) throw InvalidInput(std::string(source) + ": no feature columns");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& rec = table.rows[r];
    const std::string where = std::string(source) + " row " + std::to_string(r + 1);
    Row row;
    for (auto c : feature_cols) {
      const std::string& cell = rec[c];
      if (cell.empty() || cell == "null" || cell == "NA") {
        row.push_back(std::nullopt);
      } else {
        const double v = codec::parse_double(cell, where + " " + table.header[c]);
        if (!std::isfinite(v)) throw InvalidInput(where + ": non-finite " + table.header[c]);
        row.push_back(v);
      }
    }
    const std::string& lab = rec[label_col];
    if (lab != "0" && lab != "1") throw InvalidInput(where + ": label must be 0 or 1, got '" + lab + "'");
    std::optional<Split> split;
    if (split_col && !rec[*split_col].empty()) split = parse_split(rec[*split_col]);
    set.add(id_col ? rec[*id_col] : std::to_string(r), std::move(row), lab == "1" ? 1 : 0, split);
  }
  set.validate();
  return set;
}

}  // namespace t2vqa::gbt
