#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "t2vqa/ensemble.hpp"
#include "t2vqa/gbt.hpp"
#include "t2vqa/media_io.hpp"
#include "t2vqa/output.hpp"
#include "t2vqa/provider.hpp"
#include "t2vqa/report.hpp"
#include "t2vqa/text_similarity.hpp"
#include "t2vqa/video_features.hpp"

// Batch steps behind the command-line subcommands. Each returns the text of
// its output file so callers decide where it goes.
namespace t2vqa::pipeline {

inline std::string with_video(const std::string& video_id, const std::exception& e) {
  return video_id + ": " + e.what();
}

// Rethrows `e` with the video id prefixed, keeping the error category.
[[noreturn]] inline void rethrow_for(const std::string& video_id) {
  try {
    throw;
  } catch (const ProviderError& e) {
    throw ProviderError(with_video(video_id, e), e.retriable());
  } catch (const IoError& e) {
    throw IoError(with_video(video_id, e));
  } catch (const InvalidInput& e) {
    throw InvalidInput(with_video(video_id, e));
  } catch (const std::exception& e) {
    throw Error(with_video(video_id, e));
  }
}

// ---------------------------------------------------------------- features

enum class ProbsSource { none, files, provider };

struct FeaturesRequest {
  DatasetManifest manifest;
  nss::NiqeModel niqe;
  std::optional<nss::BrisqueModel> brisque;
  ProbsSource probs = ProbsSource::none;
  std::filesystem::path probs_dir;         // <video_id>.json when probs == files
  provider::Provider* provider = nullptr;  // when probs == provider
  FeatureOptions options;
  int jobs = 1;
  std::optional<std::filesystem::path> json_dir;  // per-video FeatureVector JSON
};

struct FeatureRow {
  std::string video_id;
  std::string model_name;
  FeatureVector features;
};

inline std::vector<FeatureRow> extract_features(const FeaturesRequest& req) {
  const auto& entries = req.manifest.entries;
  if (entries.empty()) throw InvalidInput("manifest has no videos");
  std::vector<FeatureRow> rows(entries.size());
  FeatureOptions frame_opts = req.options;
  frame_opts.jobs = 1;
  parallel_for(entries.size(), req.jobs, [&](std::size_t i) {
    const auto& e = entries[i];
    try {
      const FrameSequence video = load_frames(e.frames_path);
      std::optional<ClassProbs> probs;
      if (req.probs == ProbsSource::files) probs = load_class_probs(req.probs_dir / (e.video_id + ".json"));
      if (req.probs == ProbsSource::provider) probs = req.provider->class_probs(e.video_id, video);
      if (probs && probs->frames.size() != video.frame_count()) {
        throw InvalidInput("class probabilities cover " + std::to_string(probs->frames.size()) + " frames, video has " +
                           std::to_string(video.frame_count()));
      }
      rows[i] = {e.video_id, e.model_name,
                 extract_video_features(video, req.niqe, req.brisque ? &*req.brisque : nullptr,
                                        probs ? &*probs : nullptr, frame_opts)};
    } catch (...) {
      rethrow_for(e.video_id);
    }
  });
  return rows;
}

inline std::string features_csv(const std::vector<FeatureRow>& rows, const nlohmann::ordered_json& meta) {
  std::vector<std::string> header = {"video_id", "model_name"};
  header.insert(header.end(), feature_schema().begin(), feature_schema().end());
  CsvBuilder out(meta, header);
  for (const auto& r : rows) {
    std::vector<std::string> fields = {r.video_id, r.model_name};
    for (const auto& v : r.features.values) fields.push_back(v ? num(*v) : "");
    out.row(fields);
  }
  return out.str();
}

// Named feature values from one features-CSV row; empty cells are absent.
inline std::map<std::string, std::map<std::string, std::optional<double>>> read_feature_table(
    const csv::Table& t, std::string_view source) {
  const std::size_t c_id = t.require_column("video_id", source);
  std::map<std::string, std::map<std::string, std::optional<double>>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::map<std::string, std::optional<double>> named;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c == c_id || t.header[c] == "model_name") continue;
      const std::string& cell = t.rows[r][c];
      named[t.header[c]] = cell.empty() ? std::nullopt
                                        : std::optional(codec::parse_double(
                                              cell, std::string(source) + " " + t.rows[r][c_id] + " " + t.header[c]));
    }
    if (!out.emplace(t.rows[r][c_id], std::move(named)).second) {
      throw InvalidInput(std::string(source) + ": duplicate video_id '" + t.rows[r][c_id] + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------- classifier

// Joins a features table with labels (video_id, label[, split]) into a
// training table; videos without a label are dropped.
inline csv::Table join_labels(const csv::Table& features, std::string_view features_source, const csv::Table& labels,
                              std::string_view labels_source) {
  const std::size_t f_id = features.require_column("video_id", features_source);
  const std::size_t l_id = labels.require_column("video_id", labels_source);
  const std::size_t l_label = labels.require_column("label", labels_source);
  const auto l_split = labels.column("split");
  std::map<std::string, std::pair<std::string, std::string>> by_id;
  for (const auto& row : labels.rows) {
    if (!by_id.emplace(row[l_id], std::pair{row[l_label], l_split ? row[*l_split] : ""}).second) {
      throw InvalidInput(std::string(labels_source) + ": duplicate video_id '" + row[l_id] + "'");
    }
  }
  csv::Table out;
  out.header = features.header;
  for (const char* c : {"label", "split"}) {
    if (features.column(c)) throw InvalidInput(std::string(features_source) + ": unexpected column '" + c + "'");
    out.header.push_back(c);
  }
  std::set<std::string> used;
  for (const auto& row : features.rows) {
    auto it = by_id.find(row[f_id]);
    if (it == by_id.end()) continue;
    auto r = row;
    r.push_back(it->second.first);
    r.push_back(it->second.second);
    out.rows.push_back(std::move(r));
    used.insert(row[f_id]);
  }
  std::vector<std::string> missing;
  for (const auto& [id, v] : by_id) {
    if (!used.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ",") + id;
    throw InvalidInput("labelled videos missing from features: " + list);
  }
  return out;
}

// Rows without a split get one from a seeded stratified split.
inline void assign_missing_splits(gbt::LabelledSet& data, std::uint64_t seed) {
  const bool any_missing = std::any_of(data.splits.begin(), data.splits.end(), [](const auto& s) { return !s; });
  if (!any_missing) return;
  const auto splits = gbt::stratified_split(data.labels, seed);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.splits[i]) data.splits[i] = splits[i];
  }
}

inline nlohmann::ordered_json grid_report_json(const gbt::GridReport& r) {
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  for (const auto& p : r.points) points.push_back({{"config", gbt::to_json(p.config)}, {"val_f1", p.val_f1}});
  return {{"best_index", r.best_index},
          {"train_f1", r.train_f1},
          {"val_f1", r.val_f1},
          {"test_f1", r.test_f1},
          {"points", points}};
}

// ---------------------------------------------------------------- textsim

struct TextsimRequest {
  DatasetManifest manifest;
  provider::Provider* provider = nullptr;
  std::optional<std::filesystem::path> cache_dir;  // captions/<video_id>.jsonl
  text::SimilarityWeights weights;
  int jobs = 1;
};

struct TextsimRow {
  std::string video_id;
  std::string model_name;
  text::SimilarityReport report;
};

// Captions come from the manifest's captions_path when set, else from the
// cache directory, else from the provider.
inline std::vector<TextsimRow> text_similarity(const TextsimRequest& req) {
  const auto& entries = req.manifest.entries;
  if (entries.empty()) throw InvalidInput("manifest has no videos");
  std::vector<TextsimRow> rows(entries.size());
  auto embed = [&](const std::string& s) { return req.provider->embed(s); };
  parallel_for(entries.size(), req.jobs, [&](std::size_t i) {
    const auto& e = entries[i];
    try {
      text::CaptionSet captions;
      if (e.captions_path) {
        captions = text::read_captions(*e.captions_path);
      } else {
        std::optional<std::filesystem::path> cache;
        if (req.cache_dir) cache = *req.cache_dir / (e.video_id + ".jsonl");
        if (cache && std::filesystem::exists(*cache)) {
          captions = text::read_captions(*cache);
        } else {
          captions = provider::caption_video(e.video_id, load_frames(e.frames_path), *req.provider, cache);
        }
      }
      rows[i] = {e.video_id, e.model_name, text::video_text_similarity(e.prompt, captions, embed, req.weights)};
    } catch (...) {
      rethrow_for(e.video_id);
    }
  });
  return rows;
}

inline std::string textsim_csv(const std::vector<TextsimRow>& rows, const nlohmann::ordered_json& meta) {
  CsvBuilder out(meta, {"video_id", "model_name", "text_similarity", "frames", "distinct_captions"});
  for (const auto& r : rows) {
    std::set<std::string> distinct;
    for (const auto& c : r.report.per_caption) distinct.insert(c.caption);
    out.row({r.video_id, r.model_name, num(r.report.video_score), std::to_string(r.report.per_caption.size()),
             std::to_string(distinct.size())});
  }
  return out.str();
}

// ---------------------------------------------------------------- ensemble

// Column `column` of a CSV keyed by video_id, in file order.
inline std::vector<std::pair<std::string, double>> read_column(const csv::Table& t, std::string_view column,
                                                               std::string_view source) {
  const std::size_t c_id = t.require_column("video_id", source), c = t.require_column(column, source);
  std::vector<std::pair<std::string, double>> out;
  std::set<std::string> seen;
  for (const auto& row : t.rows) {
    if (!seen.insert(row[c_id]).second) {
      throw InvalidInput(std::string(source) + ": duplicate video_id '" + row[c_id] + "'");
    }
    out.emplace_back(row[c_id], codec::parse_double(row[c], std::string(source) + " " + row[c_id] + " " +
                                                                std::string(column)));
  }
  return out;
}

inline std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : ",") + id;
  return out;
}

struct ScoredVideo {
  std::string video_id;
  std::string model_name;
  double naturalness = 0.0;
  double text_similarity = 0.0;
};

// Joins features (scored by the classifier) with text similarity on video_id.
// Every id must appear in both tables; rows follow the features order.
inline std::vector<ScoredVideo> join_scores(const csv::Table& features, std::string_view features_source,
                                            const csv::Table& textsim, std::string_view textsim_source,
                                            const gbt::GbtModel& classifier) {
  const auto named = read_feature_table(features, features_source);
  const auto sims = read_column(textsim, "text_similarity", textsim_source);
  std::map<std::string, double> sim_by_id(sims.begin(), sims.end());
  std::vector<std::string> only_features, only_textsim;
  for (const auto& [id, v] : named) {
    if (!sim_by_id.contains(id)) only_features.push_back(id);
  }
  for (const auto& [id, v] : sim_by_id) {
    if (!named.contains(id)) only_textsim.push_back(id);
  }
  if (!only_features.empty() || !only_textsim.empty()) {
    throw InvalidInput("video ids do not match: only in features [" + join_ids(only_features) +
                       "], only in text similarity [" + join_ids(only_textsim) + "]");
  }
  const std::size_t c_id = features.require_column("video_id", features_source);
  const auto c_model = features.column("model_name");
  std::vector<ScoredVideo> out;
  for (const auto& row : features.rows) {
    const std::string& id = row[c_id];
    auto values = named.at(id);
    std::map<std::string, std::optional<double>> used;
    for (const auto& name : classifier.feature_names) {
      auto it = values.find(name);
      if (it == values.end()) throw InvalidInput(std::string(features_source) + ": missing feature column '" + name + "'");
      used.emplace(name, it->second);
    }
    try {
      out.push_back({id, c_model ? row[*c_model] : "", gbt::predict_naturalness(classifier, used), sim_by_id.at(id)});
    } catch (...) {
      rethrow_for(id);
    }
  }
  return out;
}

struct EnsembleData {
  std::vector<ensemble::EnsembleRow> rows;
  std::vector<std::string> unrated;  // scored videos without a human score
};

// Human target per video from `column` (default: the analyze step's
// video_scores.csv `combined`).
inline EnsembleData ensemble_rows(const std::vector<ScoredVideo>& scored, const csv::Table& human,
                                  std::string_view human_source, std::string_view column = "combined") {
  const auto target = read_column(human, column, human_source);
  std::map<std::string, double> by_id(target.begin(), target.end());
  EnsembleData out;
  for (const auto& s : scored) {
    auto it = by_id.find(s.video_id);
    if (it == by_id.end()) {
      out.unrated.push_back(s.video_id);
    } else {
      out.rows.push_back({s.naturalness, s.text_similarity, it->second});
    }
  }
  return out;
}

inline std::string score_csv(const std::vector<ScoredVideo>& scored, const ensemble::EnsembleWeights& w,
                             const nlohmann::ordered_json& meta) {
  CsvBuilder out(meta, {"video_id", "model_name", "naturalness", "text_similarity", "ensemble_score"});
  for (const auto& s : scored) {
    try {
      out.row({s.video_id, s.model_name, num(s.naturalness), num(s.text_similarity),
               num(ensemble::score_video(s.naturalness, s.text_similarity, w))});
    } catch (...) {
      rethrow_for(s.video_id);
    }
  }
  return out.str();
}

}  // namespace t2vqa::pipeline
