#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "t2vqa/output.hpp"
#include "t2vqa/ratings.hpp"

namespace t2vqa::ratings {

struct MetricScores {
  std::string metric;
  std::map<std::string, double> scores;  // per model
};

struct AnalysisReport {
  AdjustOptions options;
  AdjustedTable table;
  std::vector<ModelStats> stats;
  TukeyResult tukey;
  std::vector<BucketStats> buckets;
  std::vector<MetricScores> metrics;  // human combined score first
};

// Per-model metric scores from CSV: model_name plus one column per metric.
inline std::vector<MetricScores> metrics_from_table(const csv::Table& t, std::string_view source) {
  const std::size_t c_model = t.require_column("model_name", source);
  std::vector<MetricScores> out;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == c_model) continue;
    MetricScores m{t.header[c], {}};
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const std::string& model = t.rows[r][c_model];
      const double v = codec::parse_double(t.rows[r][c], std::string(source) + " " + model + " " + t.header[c]);
      if (!m.scores.emplace(model, v).second) throw InvalidInput(std::string(source) + ": duplicate model " + model);
    }
    out.push_back(std::move(m));
  }
  return out;
}

inline AnalysisReport analyze(const RatingsTable& ratings, const AdjustOptions& options = {},
                              std::vector<MetricScores> extra_metrics = {}, double alpha = 0.05) {
  AnalysisReport r;
  r.options = options;
  r.table = adjust_table(ratings, options);
  r.stats = model_stats(r.table);
  r.tukey = tukey_hsd(combined_by_model(r.table), alpha);
  r.buckets = bucket_stats(r.table);
  MetricScores human{"human", {}};
  for (const auto& s : r.stats) human.scores[s.model_name] = s.combined.mean;
  r.metrics.push_back(std::move(human));
  for (auto& m : extra_metrics) {
    if (m.metric == "human") throw InvalidInput("metric name 'human' is reserved");
    rank_agreement(r.metrics.front().scores, m.scores);  // validates the model set
    r.metrics.push_back(std::move(m));
  }
  return r;
}

// ---------------------------------------------------------------- SVG

namespace svg {

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string f(double v) { return codec::format_fixed(v, 2); }

class Canvas {
 public:
  Canvas(double width, double height, std::string_view title) {
    out_ = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           f(width) + "\" height=\"" + f(height) + "\" viewBox=\"0 0 " + f(width) + " " + f(height) + "\">\n" +
           "<title>" + escape(title) + "</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, std::string_view stroke = "black", double width = 1.0) {
    out_ += "<line x1=\"" + f(x1) + "\" y1=\"" + f(y1) + "\" x2=\"" + f(x2) + "\" y2=\"" + f(y2) + "\" stroke=\"" +
            std::string(stroke) + "\" stroke-width=\"" + f(width) + "\"/>\n";
  }
  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke = "none") {
    out_ += "<rect x=\"" + f(x) + "\" y=\"" + f(y) + "\" width=\"" + f(std::max(0.0, w)) + "\" height=\"" +
            f(std::max(0.0, h)) + "\" fill=\"" + std::string(fill) + "\" stroke=\"" + std::string(stroke) + "\"/>\n";
  }
  void circle(double x, double y, double r, std::string_view fill) {
    out_ += "<circle cx=\"" + f(x) + "\" cy=\"" + f(y) + "\" r=\"" + f(r) + "\" fill=\"" + std::string(fill) + "\"/>\n";
  }
  void text(double x, double y, std::string_view s, std::string_view anchor = "start", int size = 11) {
    out_ += "<text x=\"" + f(x) + "\" y=\"" + f(y) + "\" font-family=\"sans-serif\" font-size=\"" +
            std::to_string(size) + "\" text-anchor=\"" + std::string(anchor) + "\">" + escape(s) + "</text>\n";
  }
  std::string finish() const { return out_ + "</svg>\n"; }

 private:
  std::string out_;
};

inline const char* palette(std::size_t i) {
  static constexpr const char* kColors[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                            "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
  return kColors[i % std::size(kColors)];
}

// Linear interpolation between order statistics.
inline double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::string mos_distributions(const AdjustedTable& t) {
  double lo = 0.0, hi = 10.0;
  for (const auto& v : t.videos) {
    lo = std::min({lo, std::floor(v.alignment), std::floor(v.perception)});
    hi = std::max({hi, std::ceil(v.alignment), std::ceil(v.perception)});
  }
  const double bin = 0.5;
  const auto bins = static_cast<std::size_t>(std::ceil((hi - lo) / bin));
  std::vector<std::size_t> counts[2] = {std::vector<std::size_t>(bins), std::vector<std::size_t>(bins)};
  for (const auto& v : t.videos) {
    const double x[2] = {v.alignment, v.perception};
    for (int a = 0; a < 2; ++a) counts[a][std::min(bins - 1, static_cast<std::size_t>((x[a] - lo) / bin))]++;
  }
  std::size_t peak = 1;
  for (const auto& c : counts) peak = std::max(peak, *std::max_element(c.begin(), c.end()));

  const double pw = 360, ph = 220, left = 50, top = 40;
  Canvas c(2 * pw + 80, ph + 90, "Adjusted MOS distributions");
  const char* names[2] = {"alignment", "perception"};
  for (int a = 0; a < 2; ++a) {
    const double x0 = left + a * (pw + 30);
    c.text(x0 + pw / 2, top - 15, names[a], "middle", 13);
    c.line(x0, top + ph, x0 + pw, top + ph);
    c.line(x0, top, x0, top + ph);
    const double bw = pw / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) {
      const double h = ph * static_cast<double>(counts[a][b]) / static_cast<double>(peak);
      c.rect(x0 + b * bw, top + ph - h, bw - 1, h, palette(a));
    }
    for (double tick = lo; tick <= hi + 1e-9; tick += 1.0) {
      const double x = x0 + pw * (tick - lo) / (hi - lo);
      c.line(x, top + ph, x, top + ph + 4);
      c.text(x, top + ph + 16, codec::format_fixed(tick, 0), "middle", 10);
    }
    c.text(x0 - 6, top + 4, std::to_string(peak), "end", 10);
    c.text(x0 - 6, top + ph, "0", "end", 10);
  }
  c.text(left + pw + 15, top + ph + 40, "adjusted MOS (videos per 0.5 bin)", "middle");
  return c.finish();
}

inline std::string tukey_intervals(const TukeyResult& r) {
  double lo = 0.0, hi = 0.0;
  for (const auto& p : r.pairs) {
    lo = std::min(lo, p.ci_low);
    hi = std::max(hi, p.ci_high);
  }
  if (hi == lo) hi = lo + 1.0;
  const double row = 26, left = 230, width = 420, top = 40;
  Canvas c(left + width + 40, top + row * static_cast<double>(r.pairs.size()) + 50,
           "Tukey HSD confidence intervals");
  auto x_of = [&](double v) { return left + width * (v - lo) / (hi - lo); };
  c.text(left + width / 2, 20, "Mean difference with family-wise " + codec::format_fixed(100 * (1 - r.alpha), 0) +
                                   "% intervals", "middle", 13);
  const double bottom = top + row * static_cast<double>(r.pairs.size());
  c.line(x_of(0), top - 5, x_of(0), bottom, "#888888");
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    const auto& p = r.pairs[i];
    const double y = top + row * (static_cast<double>(i) + 0.5);
    const char* color = p.significant ? "#e15759" : "#4e79a7";
    c.text(left - 10, y + 4, p.model_a + " - " + p.model_b, "end");
    c.line(x_of(p.ci_low), y, x_of(p.ci_high), y, color, 2);
    c.circle(x_of(p.mean_diff), y, 3.5, color);
  }
  c.line(left, bottom, left + width, bottom);
  c.text(left, bottom + 16, codec::format_fixed(lo, 3), "middle", 10);
  c.text(left + width, bottom + 16, codec::format_fixed(hi, 3), "middle", 10);
  c.text(left + width / 2, bottom + 36, "red: significant", "middle", 10);
  return c.finish();
}

inline std::string prompt_length_box(const std::vector<BucketStats>& buckets, const std::vector<ModelStats>& stats) {
  double lo = 0.0, hi = 1.0;
  for (const auto& b : buckets) {
    lo = std::min(lo, b.combined.front());
    hi = std::max(hi, b.combined.back());
  }
  const double box = 22, gap = 30, left = 50, top = 40, ph = 260;
  const double group = box * static_cast<double>(stats.size()) + gap;
  Canvas c(left + 3 * group + 160, top + ph + 60, "Combined score by prompt length");
  auto y_of = [&](double v) { return top + ph - ph * (v - lo) / (hi - lo); };
  c.line(left, top, left, top + ph);
  c.line(left, top + ph, left + 3 * group, top + ph);
  for (double tick : {lo, (lo + hi) / 2, hi}) c.text(left - 6, y_of(tick) + 4, codec::format_fixed(tick, 2), "end", 10);
  const LengthBucket order[3] = {LengthBucket::short_prompt, LengthBucket::average_prompt, LengthBucket::long_prompt};
  for (int g = 0; g < 3; ++g) {
    const double gx = left + gap / 2 + g * group;
    c.text(gx + (group - gap) / 2, top + ph + 18, bucket_name(order[g]), "middle");
    for (std::size_t m = 0; m < stats.size(); ++m) {
      auto it = std::find_if(buckets.begin(), buckets.end(), [&](const BucketStats& b) {
        return b.bucket == order[g] && b.model_name == stats[m].model_name;
      });
      if (it == buckets.end()) continue;
      const auto& v = it->combined;
      const double x = gx + box * static_cast<double>(m), cx = x + box / 2;
      const double q1 = quantile(v, 0.25), q2 = quantile(v, 0.5), q3 = quantile(v, 0.75);
      c.line(cx, y_of(v.front()), cx, y_of(v.back()));
      c.rect(x + 3, y_of(q3), box - 6, y_of(q1) - y_of(q3), palette(m), "black");
      c.line(x + 3, y_of(q2), x + box - 3, y_of(q2), "black", 2);
    }
  }
  for (std::size_t m = 0; m < stats.size(); ++m) {
    const double y = top + 10 + 18 * static_cast<double>(m);
    c.rect(left + 3 * group + 15, y - 9, 10, 10, palette(m));
    c.text(left + 3 * group + 30, y, stats[m].model_name);
  }
  return c.finish();
}

inline std::string rank_compare(const std::vector<MetricScores>& metrics) {
  const double col = 170, left = 110, top = 50, row = 30;
  const std::size_t n = metrics.front().scores.size();
  Canvas c(left + col * static_cast<double>(metrics.size() - 1) + 140, top + row * static_cast<double>(n) + 20,
           "Model ranks by metric");
  std::map<std::string, std::size_t> color;
  for (const auto& [name, s] : metrics.front().scores) color.emplace(name, color.size());
  std::vector<std::map<std::string, int>> ranks;
  for (const auto& m : metrics) {
    std::map<std::string, int> r;
    for (const auto& e : rank_models(m.scores)) r[e.model_name] = e.rank;
    ranks.push_back(std::move(r));
  }
  auto y_of = [&](int rank) { return top + row * (rank - 0.5); };
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const double x = left + col * static_cast<double>(i);
    c.text(x, top - 20, metrics[i].metric, "middle", 12);
    for (const auto& [name, rank] : ranks[i]) {
      if (i + 1 < metrics.size()) {
        c.line(x, y_of(rank), x + col, y_of(ranks[i + 1].at(name)), palette(color[name]), 2);
      }
      c.circle(x, y_of(rank), 5, palette(color[name]));
    }
  }
  for (const auto& [name, rank] : ranks.front()) c.text(left - 12, y_of(rank) + 4, name, "end");
  const double last = left + col * static_cast<double>(metrics.size() - 1);
  for (const auto& [name, rank] : ranks.back()) c.text(last + 12, y_of(rank) + 4, name);
  return c.finish();
}

}  // namespace svg

// ---------------------------------------------------------------- files

inline std::map<std::string, std::string> render_report(const AnalysisReport& r, const nlohmann::ordered_json& meta) {
  if (r.stats.empty()) throw InvalidInput("report has no models");
  std::map<std::string, std::string> files;
  nlohmann::ordered_json m = meta;
  m["adjust_group"] = adjust_group_name(r.options.group);
  m["k_outlier"] = r.options.k_outlier;
  m["outliers_clipped"] = r.table.clipped;
  m["combined_clamped"] = r.table.combined_clamped;

  CsvBuilder stats(m, {"model_name", "videos", "alignment_mean", "alignment_std", "perception_mean", "perception_std",
                       "combined_mean", "combined_std"});
  for (const auto& s : r.stats) {
    stats.row({s.model_name, std::to_string(s.videos), num(s.alignment.mean), num(s.alignment.std),
               num(s.perception.mean), num(s.perception.std), num(s.combined.mean), num(s.combined.std)});
  }
  files["model_stats.csv"] = stats.str();

  nlohmann::ordered_json tm = m;
  tm["alpha"] = r.tukey.alpha;
  tm["msw"] = r.tukey.msw;
  tm["df"] = r.tukey.df;
  CsvBuilder tukey(tm, {"model_a", "model_b", "mean_diff", "q_statistic", "q_critical", "ci_low", "ci_high",
                        "significant"});
  for (const auto& p : r.tukey.pairs) {
    tukey.row({p.model_a, p.model_b, num(p.mean_diff), num(p.q_statistic), num(r.tukey.q_critical), num(p.ci_low),
               num(p.ci_high), p.significant ? "true" : "false"});
  }
  files["tukey.csv"] = tukey.str();

  CsvBuilder videos(m, {"video_id", "model_name", "prompt_words", "length_bucket", "alignment_mos", "perception_mos",
                        "combined", "combined_clamped"});
  for (const auto& v : r.table.videos) {
    videos.row({v.video_id, v.model_name, std::to_string(v.prompt_words), bucket_name(prompt_length_bucket(v.prompt)),
                num(v.alignment), num(v.perception), num(v.combined), v.combined_clamped ? "true" : "false"});
  }
  files["video_scores.csv"] = videos.str();

  CsvBuilder lengths(m, {"model_name", "length_bucket", "videos", "combined_mean", "combined_std"});
  for (const auto& b : r.buckets) {
    lengths.row({b.model_name, bucket_name(b.bucket), std::to_string(b.summary.n), num(b.summary.mean),
                 num(b.summary.std)});
  }
  files["prompt_length.csv"] = lengths.str();

  CsvBuilder ranks(m, {"metric", "model_name", "score", "rank", "kendall_tau_vs_human"});
  for (const auto& metric : r.metrics) {
    const double tau = r.metrics.front().scores.size() >= 2 ? rank_agreement(r.metrics.front().scores, metric.scores)
                                                            : 1.0;
    for (const auto& e : rank_models(metric.scores)) {
      ranks.row({metric.metric, e.model_name, num(e.score), std::to_string(e.rank), num(tau)});
    }
  }
  files["rankings.csv"] = ranks.str();

  files["mos_distributions.svg"] = svg::mos_distributions(r.table);
  files["tukey_intervals.svg"] = svg::tukey_intervals(r.tukey);
  files["prompt_length_box.svg"] = svg::prompt_length_box(r.buckets, r.stats);
  files["rank_compare.svg"] = svg::rank_compare(r.metrics);
  return files;
}

// Everything is rendered before the first file is written.
inline std::vector<std::filesystem::path> emit_report(const AnalysisReport& r, const std::filesystem::path& out_dir,
                                                      const nlohmann::ordered_json& meta) {
  const auto files = render_report(r, meta);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());
  std::vector<std::filesystem::path> written;
  for (const auto& [name, text] : files) {
    write_file(out_dir / name, text);
    written.push_back(out_dir / name);
  }
  return written;
}

}  // namespace t2vqa::ratings
