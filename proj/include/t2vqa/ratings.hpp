#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "t2vqa/codec.hpp"
#include "t2vqa/csv.hpp"
#include "t2vqa/detail/studentized_range_table.hpp"
#include "t2vqa/error.hpp"

namespace t2vqa::ratings {

enum class Aspect { alignment, perception };

inline std::string aspect_name(Aspect a) { return a == Aspect::alignment ? "alignment" : "perception"; }

inline Aspect parse_aspect(std::string_view s) {
  if (s == "alignment") return Aspect::alignment;
  if (s == "perception") return Aspect::perception;
  throw InvalidInput("unknown aspect '" + std::string(s) + "' (expected alignment or perception)");
}

struct Rating {
  std::string video_id;
  std::string model_name;
  std::string prompt;
  std::string annotator_id;
  Aspect aspect = Aspect::alignment;
  double score = 0.0;
};

inline int prompt_word_count(std::string_view prompt) {
  std::istringstream in{std::string(prompt)};
  int n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

struct RatingsTable {
  std::vector<Rating> rows;

  // Scores in [1, 10]; each video has one model and one prompt.
  void validate() const {
    if (rows.empty()) throw InvalidInput("ratings table is empty");
    std::map<std::string, std::pair<std::string, std::string>> video;
    for (const auto& r : rows) {
      if (r.video_id.empty() || r.model_name.empty() || r.annotator_id.empty()) {
        throw InvalidInput("rating with empty video_id, model_name or annotator_id");
      }
      if (!(r.score >= 1.0 && r.score <= 10.0)) {
        throw InvalidInput(r.video_id + ": score " + codec::format_double(r.score) + " outside [1, 10]");
      }
      auto [it, fresh] = video.emplace(r.video_id, std::pair{r.model_name, r.prompt});
      if (!fresh && it->second != std::pair{r.model_name, r.prompt}) {
        throw InvalidInput(r.video_id + ": inconsistent model_name or prompt across rows");
      }
    }
  }
};

// CSV with header video_id,model_name,prompt,annotator_id,aspect,score.
inline RatingsTable ratings_from_table(const csv::Table& t, std::string_view source = "<ratings>") {
  const std::size_t c_video = t.require_column("video_id", source), c_model = t.require_column("model_name", source),
                    c_prompt = t.require_column("prompt", source), c_ann = t.require_column("annotator_id", source),
                    c_aspect = t.require_column("aspect", source), c_score = t.require_column("score", source);
  RatingsTable out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    Rating r;
    r.video_id = row[c_video];
    r.model_name = row[c_model];
    r.prompt = row[c_prompt];
    r.annotator_id = row[c_ann];
    r.aspect = parse_aspect(row[c_aspect]);
    r.score = codec::parse_double(row[c_score], std::string(source) + " row " + std::to_string(i + 1) + " score");
    out.rows.push_back(std::move(r));
  }
  out.validate();
  return out;
}

inline RatingsTable read_ratings(const std::filesystem::path& path) {
  return ratings_from_table(csv::read(path), path.string());
}

// ---------------------------------------------------------------- statistics

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1); 0 for a single value
  std::size_t n = 0;
};

// Shifted by the first value so constant input is exact.
inline MeanStd mean_std(std::span<const double> v) {
  MeanStd m;
  m.n = v.size();
  if (v.empty()) return m;
  double shift = 0.0;
  for (double x : v) shift += x - v[0];
  m.mean = v[0] + shift / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

inline constexpr double kAnchorRating = 5.0;

struct AdjustedScores {
  std::vector<double> values;
  double pid_delta = 0.0;
  double mean = 0.0;  // of the shifted scores
  double std = 0.0;
  std::size_t clipped = 0;
};

// Shift toward the scale midpoint, z-score, clip z to [-k, k], rescale.
// Clipping z and rescaling is the same as clamping the shifted score to
// mean +- k*std, which is how it is computed so unclipped scores pass
// through unchanged.
inline AdjustedScores adjust_scores(std::span<const double> raw, double k_outlier = 3.0) {
  if (raw.empty()) throw InvalidInput("cannot adjust an empty score group");
  if (!(k_outlier > 0.0)) throw InvalidInput("k_outlier must be positive");
  AdjustedScores out;
  out.pid_delta = kAnchorRating - mean_std(raw).mean;
  out.values.reserve(raw.size());
  for (double x : raw) out.values.push_back(x + out.pid_delta);
  const MeanStd s = mean_std(out.values);
  out.mean = s.mean;
  out.std = s.std;
  if (s.std == 0.0 || std::isinf(k_outlier)) return out;
  const double lo = s.mean - k_outlier * s.std, hi = s.mean + k_outlier * s.std;
  for (double& x : out.values) {
    if (x < lo || x > hi) {
      x = std::clamp(x, lo, hi);
      ++out.clipped;
    }
  }
  return out;
}

// `none` skips adjustment and reports raw opinion scores.
enum class AdjustGroup { per_annotator, global, none };

inline AdjustGroup parse_adjust_group(std::string_view s) {
  if (s == "per-annotator") return AdjustGroup::per_annotator;
  if (s == "global") return AdjustGroup::global;
  if (s == "none") return AdjustGroup::none;
  throw InvalidInput("unknown adjust group '" + std::string(s) + "' (expected per-annotator, global or none)");
}

inline std::string adjust_group_name(AdjustGroup g) {
  switch (g) {
    case AdjustGroup::per_annotator: return "per-annotator";
    case AdjustGroup::global: return "global";
    case AdjustGroup::none: return "none";
  }
  return "?";
}

struct AdjustOptions {
  double k_outlier = 3.0;
  AdjustGroup group = AdjustGroup::per_annotator;
};

// Per-video adjusted mean opinion scores.
struct VideoMos {
  std::string video_id;
  std::string model_name;
  std::string prompt;
  int prompt_words = 0;
  double alignment = 0.0;
  double perception = 0.0;
  double combined = 0.0;  // mean of the two aspects / 10, clamped to [0, 1]
  bool combined_clamped = false;
};

struct AdjustedTable {
  std::vector<VideoMos> videos;  // sorted by video_id
  std::size_t clipped = 0;       // ratings clipped as outliers
  std::size_t combined_clamped = 0;
};

inline AdjustedTable adjust_table(const RatingsTable& table, const AdjustOptions& opt = {}) {
  table.validate();
  // Repeated ratings from the two rounds are averaged first.
  using Key = std::tuple<std::string, std::string, Aspect>;  // annotator, video, aspect
  std::map<Key, std::vector<double>> repeats;
  std::map<std::string, const Rating*> video_info;
  for (const auto& r : table.rows) {
    repeats[{r.annotator_id, r.video_id, r.aspect}].push_back(r.score);
    video_info.emplace(r.video_id, &r);
  }

  using GroupKey = std::pair<std::string, Aspect>;
  std::map<GroupKey, std::vector<std::pair<std::string, double>>> groups;  // -> (video, score)
  for (const auto& [key, scores] : repeats) {
    const auto& [annotator, video, aspect] = key;
    const std::string group = opt.group == AdjustGroup::per_annotator ? annotator : std::string();
    groups[{group, aspect}].emplace_back(video, mean_std(scores).mean);
  }

  AdjustedTable out;
  std::map<std::pair<std::string, Aspect>, std::vector<double>> per_video;
  for (const auto& [key, members] : groups) {
    std::vector<double> raw;
    for (const auto& m : members) raw.push_back(m.second);
    if (opt.group != AdjustGroup::none) {
      const AdjustedScores adj = adjust_scores(raw, opt.k_outlier);
      out.clipped += adj.clipped;
      raw = adj.values;
    }
    for (std::size_t i = 0; i < members.size(); ++i) per_video[{members[i].first, key.second}].push_back(raw[i]);
  }

  for (const auto& [video, info] : video_info) {
    auto a = per_video.find({video, Aspect::alignment});
    auto p = per_video.find({video, Aspect::perception});
    if (a == per_video.end() || p == per_video.end()) {
      throw InvalidInput(video + " (" + info->model_name + "): missing " +
                         (a == per_video.end() ? "alignment" : "perception") + " ratings");
    }
    VideoMos v;
    v.video_id = video;
    v.model_name = info->model_name;
    v.prompt = info->prompt;
    v.prompt_words = prompt_word_count(info->prompt);
    v.alignment = mean_std(a->second).mean;
    v.perception = mean_std(p->second).mean;
    const double c = (v.alignment + v.perception) / 2.0 / 10.0;
    v.combined = std::clamp(c, 0.0, 1.0);
    v.combined_clamped = v.combined != c;
    out.combined_clamped += v.combined_clamped;
    out.videos.push_back(std::move(v));
  }
  return out;
}

struct ModelStats {
  std::string model_name;
  std::size_t videos = 0;
  MeanStd alignment;
  MeanStd perception;
  MeanStd combined;
};

// Per-model statistics over videos, sorted by model name.
inline std::vector<ModelStats> model_stats(const AdjustedTable& t) {
  if (t.videos.empty()) throw InvalidInput("no rated videos");
  std::map<std::string, std::array<std::vector<double>, 3>> by_model;
  for (const auto& v : t.videos) {
    auto& m = by_model[v.model_name];
    m[0].push_back(v.alignment);
    m[1].push_back(v.perception);
    m[2].push_back(v.combined);
  }
  std::vector<ModelStats> out;
  for (const auto& [name, cols] : by_model) {
    out.push_back({name, cols[0].size(), mean_std(cols[0]), mean_std(cols[1]), mean_std(cols[2])});
  }
  return out;
}

// Per-model combined scores, the groups compared by Tukey HSD.
inline std::map<std::string, std::vector<double>> combined_by_model(const AdjustedTable& t) {
  std::map<std::string, std::vector<double>> g;
  for (const auto& v : t.videos) g[v.model_name].push_back(v.combined);
  return g;
}

// ---------------------------------------------------------------- Tukey HSD

// Upper critical value of the studentized range for k groups and df degrees
// of freedom. Log-df interpolation between tabulated rows; between 120 and
// infinity the interpolation is linear in 1/df.
inline double studentized_range_critical(int k, double df, double alpha) {
  using namespace t2vqa::detail;
  if (k < kStudentizedRangeMinGroups || k > kStudentizedRangeMaxGroups) {
    throw InvalidInput("studentized range table covers 2.." + std::to_string(kStudentizedRangeMaxGroups) +
                       " groups, got " + std::to_string(k));
  }
  const double(*table)[kStudentizedRangeMaxGroups - kStudentizedRangeMinGroups + 1];
  if (alpha == 0.05) {
    table = kStudentizedRange05;
  } else if (alpha == 0.01) {
    table = kStudentizedRange01;
  } else {
    throw InvalidInput("alpha must be 0.05 or 0.01");
  }
  if (!(df >= 1.0)) throw InvalidInput("Tukey HSD needs at least 1 error degree of freedom");
  const int col = k - kStudentizedRangeMinGroups;
  const auto& dfs = kStudentizedRangeDf;
  if (std::isinf(df)) return table[dfs.size() - 1][col];
  std::size_t hi = 0;
  while (dfs[hi] < df) ++hi;
  if (dfs[hi] == df) return table[hi][col];
  const std::size_t lo = hi - 1;
  double t;
  if (std::isinf(dfs[hi])) {
    t = (1.0 / dfs[lo] - 1.0 / df) / (1.0 / dfs[lo]);
  } else {
    t = (std::log(df) - std::log(dfs[lo])) / (std::log(dfs[hi]) - std::log(dfs[lo]));
  }
  return table[lo][col] + t * (table[hi][col] - table[lo][col]);
}

struct TukeyPair {
  std::string model_a;
  std::string model_b;
  double mean_diff = 0.0;  // mean_a - mean_b
  double q_statistic = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool significant = false;
};

struct TukeyResult {
  std::vector<std::string> groups;  // sorted
  std::vector<double> means;
  std::vector<std::size_t> sizes;
  double msw = 0.0;
  double df = 0.0;
  double alpha = 0.05;
  double q_critical = 0.0;
  std::vector<TukeyPair> pairs;  // (i, j) with i < j in group order
};

inline TukeyResult tukey_hsd(const std::map<std::string, std::vector<double>>& groups, double alpha = 0.05) {
  if (groups.size() < 2) throw InvalidInput("Tukey HSD needs at least 2 groups");
  TukeyResult r;
  r.alpha = alpha;
  double ssw = 0.0;
  std::size_t total = 0;
  for (const auto& [name, values] : groups) {
    if (values.size() < 2) throw InvalidInput("Tukey HSD group '" + name + "' has fewer than 2 values");
    const MeanStd m = mean_std(values);
    for (double x : values) ssw += (x - m.mean) * (x - m.mean);
    r.groups.push_back(name);
    r.means.push_back(m.mean);
    r.sizes.push_back(values.size());
    total += values.size();
  }
  const auto k = static_cast<int>(groups.size());
  r.df = static_cast<double>(total) - k;
  r.msw = ssw / r.df;
  r.q_critical = studentized_range_critical(k, r.df, alpha);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      TukeyPair p;
      p.model_a = r.groups[i];
      p.model_b = r.groups[j];
      p.mean_diff = r.means[i] - r.means[j];
      const double se = std::sqrt(r.msw / 2.0 * (1.0 / r.sizes[i] + 1.0 / r.sizes[j]));
      if (se == 0.0) {
        p.q_statistic = p.mean_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      } else {
        p.q_statistic = std::fabs(p.mean_diff) / se;
      }
      p.ci_low = p.mean_diff - r.q_critical * se;
      p.ci_high = p.mean_diff + r.q_critical * se;
      p.significant = p.q_statistic > r.q_critical;
      r.pairs.push_back(std::move(p));
    }
  }
  return r;
}

inline const TukeyPair& find_pair(const TukeyResult& r, std::string_view a, std::string_view b) {
  for (const auto& p : r.pairs) {
    if ((p.model_a == a && p.model_b == b) || (p.model_a == b && p.model_b == a)) return p;
  }
  throw InvalidInput("no Tukey pair " + std::string(a) + " / " + std::string(b));
}

// ---------------------------------------------------------------- prompts

enum class LengthBucket { short_prompt, average_prompt, long_prompt };

inline std::string bucket_name(LengthBucket b) {
  switch (b) {
    case LengthBucket::short_prompt: return "short";
    case LengthBucket::average_prompt: return "average";
    case LengthBucket::long_prompt: return "long";
  }
  return "?";
}

// 4-8 words short, 9-13 average, 14+ long. Fewer than 4 counts as short.
inline LengthBucket prompt_length_bucket(std::string_view prompt) {
  const int n = prompt_word_count(prompt);
  if (n <= 8) return LengthBucket::short_prompt;
  if (n <= 13) return LengthBucket::average_prompt;
  return LengthBucket::long_prompt;
}

struct BucketStats {
  std::string model_name;
  LengthBucket bucket = LengthBucket::short_prompt;
  std::vector<double> combined;  // sorted, for box plots
  MeanStd summary;
};

inline std::vector<BucketStats> bucket_stats(const AdjustedTable& t) {
  std::map<std::pair<std::string, LengthBucket>, std::vector<double>> g;
  for (const auto& v : t.videos) g[{v.model_name, prompt_length_bucket(v.prompt)}].push_back(v.combined);
  std::vector<BucketStats> out;
  for (auto& [key, values] : g) {
    std::sort(values.begin(), values.end());
    out.push_back({key.first, key.second, values, mean_std(values)});
  }
  return out;
}

// ---------------------------------------------------------------- rankings

struct RankEntry {
  std::string model_name;
  double score = 0.0;
  int rank = 0;  // 1 = best; tied scores share the better rank
};

inline std::vector<RankEntry> rank_models(const std::map<std::string, double>& scores) {
  if (scores.empty()) throw InvalidInput("nothing to rank");
  std::vector<RankEntry> out;
  for (const auto& [name, s] : scores) {
    if (!std::isfinite(s)) throw InvalidInput("non-finite score for " + name);
    out.push_back({name, s, 0});
  }
  std::stable_sort(out.begin(), out.end(), [](const RankEntry& a, const RankEntry& b) { return a.score > b.score; });
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].rank = (i > 0 && out[i].score == out[i - 1].score) ? out[i - 1].rank : static_cast<int>(i) + 1;
  }
  return out;
}

// Kendall tau-b between two metrics' scores over the same models.
inline double rank_agreement(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  if (a.size() != b.size() || !std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) {
        return x.first == y.first;
      })) {
    throw InvalidInput("rankings cover different model sets");
  }
  if (a.size() < 2) throw InvalidInput("rank agreement needs at least 2 models");
  std::vector<double> x, y;
  for (const auto& [name, s] : a) x.push_back(s);
  for (const auto& [name, s] : b) y.push_back(s);
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        ++ties_x;
      } else if (dy == 0.0) {
        ++ties_y;
      } else if ((dx > 0) == (dy > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double denom = std::sqrt(static_cast<double>(concordant + discordant + ties_x) *
                                 static_cast<double>(concordant + discordant + ties_y));
  if (denom == 0.0) throw InvalidInput("rank agreement undefined for a constant ranking");
  return static_cast<double>(concordant - discordant) / denom;
}

}  // namespace t2vqa::ratings
