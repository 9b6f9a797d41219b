#pragma once

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "t2vqa/error.hpp"

namespace t2vqa::text {

// Common English function words removed before the bag-of-words cosine.
inline const std::unordered_set<std::string_view>& stopwords() {
  static const std::unordered_set<std::string_view> words = {
      "a",       "about",   "above",  "after",   "again",  "against", "all",     "am",     "an",      "and",
      "any",     "are",     "as",     "at",      "be",     "because", "been",    "before", "being",   "below",
      "between", "both",    "but",    "by",      "can",    "could",   "did",     "do",     "does",    "doing",
      "down",    "during",  "each",   "few",     "for",    "from",    "further", "had",    "has",     "have",
      "having",  "he",      "her",    "here",    "hers",   "herself", "him",     "himself", "his",    "how",
      "i",       "if",      "in",     "into",    "is",     "it",      "its",     "itself", "just",    "me",
      "might",   "more",    "most",   "must",    "my",     "myself",  "no",      "nor",    "not",     "now",
      "of",      "off",     "on",     "once",    "only",   "or",      "other",   "our",    "ours",    "ourselves",
      "out",     "over",    "own",    "same",    "shall",  "she",     "should",  "so",     "some",    "such",
      "than",    "that",    "the",    "their",   "theirs", "them",    "themselves", "then", "there",  "these",
      "they",    "this",    "those",  "through", "to",     "too",     "under",   "until",  "up",      "upon",
      "very",    "was",     "we",     "were",    "what",   "when",    "where",   "which",  "while",   "who",
      "whom",    "why",     "will",   "with",    "would",  "you",     "your",    "yours",  "yourself", "yourselves",
      "s",       "t",       "d",      "ll",      "m",      "re",      "ve",      "also",   "among",   "may",
      "onto",    "per",     "within", "without", "yet",    "via",     "let",    "us",      "whose"};
  return words;
}

// Lowercased runs of ASCII letters and digits.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::map<std::string, double> term_frequencies(std::string_view text) {
  std::map<std::string, double> tf;
  for (auto& tok : tokenize(text)) {
    if (!stopwords().contains(tok)) tf[tok] += 1.0;
  }
  return tf;
}

// Term-frequency cosine after stopword removal; 0 when either side is empty.
inline double bow_cosine(std::string_view a, std::string_view b) {
  const auto ta = term_frequencies(a), tb = term_frequencies(b);
  if (ta.empty() || tb.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [w, c] : ta) {
    na += c * c;
    if (auto it = tb.find(w); it != tb.end()) dot += c * it->second;
  }
  for (const auto& [w, c] : tb) nb += c * c;
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

// Cosine of two embedding vectors, negative values clamped to 0.
inline double vector_cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("embedding dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

struct SimilarityWeights {
  double cosine = 0.25;
  double embedding = 0.75;
  double fallback = 0.5;  // embedding weight when the surface cosine is 0
};

inline double combined_similarity(double cos_sim, double emb_sim, const SimilarityWeights& w = {}) {
  if (cos_sim != 0.0) return w.cosine * cos_sim + w.embedding * emb_sim;
  return w.fallback * emb_sim;
}

struct CaptionSet {
  std::vector<std::string> captions;  // one per frame
  std::size_t size() const { return captions.size(); }
};

struct CaptionScore {
  std::string caption;
  double cos_sim = 0.0;
  double emb_sim = 0.0;
  double combined = 0.0;
  double weight = 0.0;  // count(caption) / n
};

struct SimilarityReport {
  std::vector<CaptionScore> per_caption;  // frame order
  double video_score = 0.0;
};

// Frequency-weighted mean: (1/n) * sum_i w_i * sim_i with w_i = count_i / n.
// Summed per distinct caption as (k/n)^2 * mean sim, which is the same sum
// and returns sim exactly when every caption is identical.
inline double weighted_video_score(std::span<const std::string> captions, std::span<const double> sims) {
  if (captions.empty()) throw InvalidInput("no captions");
  if (captions.size() != sims.size()) throw InvalidInput("caption and similarity counts differ");
  std::map<std::string_view, std::vector<double>> groups;
  for (std::size_t i = 0; i < captions.size(); ++i) groups[captions[i]].push_back(sims[i]);
  const double n = static_cast<double>(captions.size());
  double score = 0.0;
  for (const auto& [caption, g] : groups) {
    double shift = 0.0;
    for (double v : g) shift += v - g[0];
    const double mean = g[0] + shift / static_cast<double>(g.size());
    const double w = static_cast<double>(g.size()) / n;
    score += w * w * mean;
  }
  return score;
}

// `embed` maps a string to its sentence embedding; each distinct string is
// embedded once.
template <typename Embed>
SimilarityReport video_text_similarity(std::string_view prompt, const CaptionSet& captions, Embed&& embed,
                                       const SimilarityWeights& weights = {}) {
  if (captions.captions.empty()) throw InvalidInput("caption set is empty");
  std::map<std::string, std::vector<double>> cache;
  auto embedding = [&](const std::string& s) -> const std::vector<double>& {
    auto it = cache.find(s);
    if (it == cache.end()) it = cache.emplace(s, embed(s)).first;
    return it->second;
  };
  const std::vector<double> prompt_vec = embedding(std::string(prompt));

  std::map<std::string, int> counts;
  for (const auto& c : captions.captions) counts[c]++;
  const double n = static_cast<double>(captions.size());

  SimilarityReport report;
  std::vector<double> sims;
  for (const auto& c : captions.captions) {
    CaptionScore s;
    s.caption = c;
    s.cos_sim = bow_cosine(prompt, c);
    s.emb_sim = vector_cosine(prompt_vec, embedding(c));
    s.combined = combined_similarity(s.cos_sim, s.emb_sim, weights);
    s.weight = counts[c] / n;
    sims.push_back(s.combined);
    report.per_caption.push_back(std::move(s));
  }
  report.video_score = weighted_video_score(captions.captions, sims);
  return report;
}

// Captions file: JSON Lines of {"frame": i, "caption": "..."}.
inline CaptionSet read_captions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open captions file " + path.string());
  std::map<int, std::string> by_frame;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const int frame = j.at("frame").get<int>();
      if (frame < 0 || !by_frame.emplace(frame, j.at("caption").get<std::string>()).second) {
        throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": bad or duplicate frame index");
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  CaptionSet set;
  for (const auto& [frame, caption] : by_frame) {
    if (frame != static_cast<int>(set.captions.size())) {
      throw InvalidInput(path.string() + ": missing caption for frame " + std::to_string(set.captions.size()));
    }
    set.captions.push_back(caption);
  }
  if (set.captions.empty()) throw InvalidInput(path.string() + ": no captions");
  return set;
}

inline void write_captions(const std::filesystem::path& path, const CaptionSet& set) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write captions file " + path.string());
  for (std::size_t i = 0; i < set.captions.size(); ++i) {
    out << nlohmann::ordered_json{{"frame", i}, {"caption", set.captions[i]}}.dump() << '\n';
  }
  if (!out) throw IoError("cannot write captions file " + path.string());
}

inline nlohmann::ordered_json to_json(const SimilarityReport& r) {
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& s : r.per_caption) {
    per.push_back({{"caption", s.caption},
                   {"cos_sim", s.cos_sim},
                   {"emb_sim", s.emb_sim},
                   {"combined_sim", s.combined},
                   {"weight", s.weight}});
  }
  return {{"video_score", r.video_score}, {"per_caption", per}};
}

}  // namespace t2vqa::text
