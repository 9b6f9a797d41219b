#pragma once

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "t2vqa/codec.hpp"
#include "t2vqa/error.hpp"
#include "t2vqa/inception.hpp"
#include "t2vqa/media_io.hpp"
#include "t2vqa/parallel.hpp"
#include "t2vqa/text_similarity.hpp"

// Sources of the neural-model outputs the toolkit consumes as inputs: frame
// captions, sentence embeddings and per-frame class probabilities.
namespace t2vqa::provider {

inline constexpr int kStubEmbeddingDim = 64;
inline constexpr int kStubClasses = 1000;
inline constexpr std::string_view kDefaultStubSeed = "t2vqa-stub";

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  // One caption per frame, in frame order.
  virtual std::vector<std::string> captions(const std::string& video_id, const FrameSequence& video) = 0;
  virtual std::vector<double> embed(const std::string& text) = 0;
  virtual ClassProbs class_probs(const std::string& video_id, const FrameSequence& video) = 0;
};

// ---------------------------------------------------------------------------
// Stub: deterministic functions of the request bytes and a seed string.

inline const std::vector<std::string>& stub_phrases() {
  static const std::vector<std::string> phrases = {
      "a dog running on the grass",        "a city street at night",
      "a sunset over the ocean",           "a person riding a bicycle",
      "a cat sitting on a sofa",           "a bowl of fruit on a table",
      "a mountain covered in snow",        "a car driving down a road",
      "a group of people walking",         "a bird flying in the sky",
      "a boat on a calm lake",             "a forest with tall trees",
      "a close up of a flower",            "a child playing with a ball",
      "an abstract colorful pattern",      "a blurry image of a room"};
  return phrases;
}

inline codec::Digest frame_digest(const RgbFrame& frame, std::string_view seed) {
  std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(frame.pixels.data()),
                                      frame.pixels.size() * sizeof(Rgb));
  return codec::blake2b(bytes, seed);
}

inline std::string stub_caption(const RgbFrame& frame, std::string_view seed = kDefaultStubSeed) {
  const auto& phrases = stub_phrases();
  return phrases[codec::digest_word(frame_digest(frame, seed)) % phrases.size()];
}

// Each token seeds a stream of 64 values in [-1, 1); the token multiset sums
// them and the result is L2-normalized. Text without tokens embeds to zero.
inline std::vector<double> stub_embedding(std::string_view text, std::string_view seed = kDefaultStubSeed) {
  std::vector<double> v(kStubEmbeddingDim, 0.0);
  for (const auto& tok : text::tokenize(text)) {
    codec::SplitMix64 rng(codec::digest_word(codec::blake2b(tok, seed)));
    for (double& x : v) x += 2.0 * rng.uniform() - 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

inline std::vector<double> stub_class_probs(const RgbFrame& frame, std::string_view seed = kDefaultStubSeed) {
  codec::SplitMix64 rng(codec::digest_word(frame_digest(frame, seed), 1));
  std::vector<double> logits(kStubClasses);
  double top = -1e300;
  for (double& l : logits) {
    l = 8.0 * rng.uniform();
    top = std::max(top, l);
  }
  double sum = 0.0;
  for (double& l : logits) sum += (l = std::exp(l - top));
  for (double& l : logits) l /= sum;
  return logits;
}

class StubProvider : public Provider {
 public:
  explicit StubProvider(std::string seed = std::string(kDefaultStubSeed)) : seed_(std::move(seed)) {}
  std::string name() const override { return seed_ == kDefaultStubSeed ? "stub" : "stub:" + seed_; }
  std::vector<std::string> captions(const std::string&, const FrameSequence& video) override {
    std::vector<std::string> out;
    for (const auto& f : video.frames) out.push_back(stub_caption(f, seed_));
    return out;
  }
  std::vector<double> embed(const std::string& text) override { return stub_embedding(text, seed_); }
  ClassProbs class_probs(const std::string&, const FrameSequence& video) override {
    ClassProbs p;
    p.classes = kStubClasses;
    for (const auto& f : video.frames) p.frames.push_back(stub_class_probs(f, seed_));
    return p;
  }

 private:
  std::string seed_;
};

// ---------------------------------------------------------------------------
// File mode. Layout under the root directory:
//   captions/<video_id>.jsonl     {"frame": i, "caption": "..."} per line
//   embeddings.jsonl              {"text": "...", "vector": [...]} per line
//   class_probs/<video_id>.json   {"classes": K, "frames": [[...], ...]}

class FileProvider : public Provider {
 public:
  explicit FileProvider(std::filesystem::path root) : root_(std::move(root)) {
    if (!std::filesystem::is_directory(root_)) throw IoError("provider directory not found: " + root_.string());
  }
  std::string name() const override { return "file:" + root_.string(); }

  std::vector<std::string> captions(const std::string& video_id, const FrameSequence& video) override {
    const auto path = root_ / "captions" / (video_id + ".jsonl");
    if (!std::filesystem::exists(path)) throw ProviderError("no captions for '" + video_id + "' in " + path.string(), false);
    auto set = text::read_captions(path);
    if (set.size() != video.frame_count()) {
      throw ProviderError(path.string() + ": " + std::to_string(set.size()) + " captions for " +
                              std::to_string(video.frame_count()) + " frames",
                          false);
    }
    return set.captions;
  }

  std::vector<double> embed(const std::string& text) override {
    std::call_once(loaded_, [&] { load_embeddings(); });
    auto it = embeddings_.find(text);
    if (it == embeddings_.end()) throw ProviderError("no embedding for text \"" + text + "\"", false);
    return it->second;
  }

  ClassProbs class_probs(const std::string& video_id, const FrameSequence& video) override {
    const auto path = root_ / "class_probs" / (video_id + ".json");
    if (!std::filesystem::exists(path)) throw ProviderError("no class probabilities for '" + video_id + "'", false);
    ClassProbs p = load_class_probs(path);
    if (p.frames.size() != video.frame_count()) {
      throw ProviderError(path.string() + ": frame count does not match video", false);
    }
    return p;
  }

 private:
  void load_embeddings() {
    const auto path = root_ / "embeddings.jsonl";
    std::ifstream in(path);
    if (!in) throw ProviderError("cannot open " + path.string(), false);
    std::string line;
    int lineno = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        auto v = j.at("vector").get<std::vector<double>>();
        if (dim == 0) dim = v.size();
        if (v.empty() || v.size() != dim) throw InvalidInput("inconsistent embedding dimension");
        embeddings_[j.at("text").get<std::string>()] = std::move(v);
      } catch (const std::exception& e) {
        throw ProviderError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(), false);
      }
    }
  }

  std::filesystem::path root_;
  std::once_flag loaded_;
  std::map<std::string, std::vector<double>> embeddings_;
};

// ---------------------------------------------------------------------------
// HTTP client for the model service.
//   POST /caption      {"image": base64 PNG}  -> {"caption": str}
//   POST /embed        {"text": str}          -> {"vector": [f64], "dim": int}
//   POST /class_probs  {"image": base64 PNG}  -> {"probs": [f64], "classes": int}
//   GET  /health                              -> {"status": "ok", "mode": str}

struct HttpOptions {
  int max_in_flight = 4;
  int retries = 2;            // extra attempts for retriable failures
  double timeout_seconds = 30.0;
};

class HttpProvider : public Provider {
 public:
  explicit HttpProvider(std::string base_url, HttpOptions opts = {}) : url_(std::move(base_url)), opts_(opts) {
    if (!url_.starts_with("http://") && !url_.starts_with("https://")) url_ = "http://" + url_;
    while (url_.ends_with('/')) url_.pop_back();
    if (opts_.max_in_flight < 1) throw InvalidInput("max_in_flight must be >= 1");
  }
  std::string name() const override { return "http:" + url_; }

  nlohmann::json health() { return request("GET", "/health", nullptr); }

  std::vector<std::string> captions(const std::string& video_id, const FrameSequence& video) override {
    std::vector<std::string> out(video.frame_count());
    for_frames(video_id, video, [&](std::size_t i, const nlohmann::json& image) {
      const auto r = request("POST", "/caption", {{"image", image}});
      try {
        out[i] = r.at("caption").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("/caption: malformed response: ") + e.what(), false);
      }
    });
    return out;
  }

  std::vector<double> embed(const std::string& text) override {
    const auto r = request("POST", "/embed", {{"text", text}});
    try {
      auto v = r.at("vector").get<std::vector<double>>();
      if (v.empty() || (r.contains("dim") && r.at("dim").get<std::size_t>() != v.size())) {
        throw ProviderError("/embed: vector length disagrees with dim", false);
      }
      std::lock_guard lock(mu_);
      if (dim_ && *dim_ != v.size()) throw ProviderError("/embed: embedding dimension changed between calls", false);
      dim_ = v.size();
      return v;
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("/embed: malformed response: ") + e.what(), false);
    }
  }

  ClassProbs class_probs(const std::string& video_id, const FrameSequence& video) override {
    ClassProbs p;
    p.frames.resize(video.frame_count());
    std::vector<int> classes(video.frame_count());
    for_frames(video_id, video, [&](std::size_t i, const nlohmann::json& image) {
      const auto r = request("POST", "/class_probs", {{"image", image}});
      try {
        p.frames[i] = r.at("probs").get<std::vector<double>>();
        classes[i] = r.at("classes").get<int>();
      } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("/class_probs: malformed response: ") + e.what(), false);
      }
    });
    p.classes = classes.empty() ? 0 : classes.front();
    for (int k : classes) {
      if (k != p.classes) throw ProviderError("/class_probs: class count changed between frames", false);
    }
    try {
      p.validate();
    } catch (const InvalidInput& e) {
      throw ProviderError(std::string("/class_probs: ") + e.what(), false);
    }
    return p;
  }

 private:
  // Frames are requested concurrently, at most max_in_flight at a time;
  // results are stored by frame index.
  template <typename Fn>
  void for_frames(const std::string& video_id, const FrameSequence& video, Fn&& fn) {
    parallel_for(video.frame_count(), opts_.max_in_flight, [&](std::size_t i) {
      try {
        fn(i, nlohmann::json(codec::base64_encode(encode_png(video.frames[i]))));
      } catch (const ProviderError& e) {
        throw ProviderError(video_id + " frame " + std::to_string(i) + ": " + e.what(), e.retriable());
      }
    });
  }

  nlohmann::json request(const std::string& method, const std::string& path, const nlohmann::json& body) {
    for (int attempt = 0;; ++attempt) {
      try {
        return request_once(method, path, body);
      } catch (const ProviderError& e) {
        if (!e.retriable() || attempt >= opts_.retries) throw;
        std::this_thread::sleep_for(std::chrono::milliseconds(50 << attempt));
      }
    }
  }

  nlohmann::json request_once(const std::string& method, const std::string& path, const nlohmann::json& body) {
    httplib::Client client(url_);
    const auto secs = static_cast<time_t>(opts_.timeout_seconds);
    const auto usecs = static_cast<time_t>((opts_.timeout_seconds - secs) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Result res =
        method == "GET" ? client.Get(path) : client.Post(path, body.dump(), "application/json");
    if (!res) {
      throw ProviderError(path + ": " + httplib::to_string(res.error()) + " (" + url_ + ")", true);
    }
    if (res->status >= 500 || res->status == 429) {
      throw ProviderError(path + ": HTTP " + std::to_string(res->status) + " " + res->body, true);
    }
    if (res->status != 200) {
      throw ProviderError(path + ": HTTP " + std::to_string(res->status) + " " + res->body, false);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProviderError(path + ": response is not JSON: " + e.what(), false);
    }
  }

  std::string url_;
  HttpOptions opts_;
  std::mutex mu_;
  std::optional<std::size_t> dim_;
};

// ---------------------------------------------------------------------------

// "stub", "stub:<seed>", "file:<dir>", "http:<url>" or a bare http(s) URL.
// An empty spec falls back to $T2VQA_PROVIDER, then to "stub".
inline std::unique_ptr<Provider> make_provider(std::string spec, HttpOptions http = {}) {
  if (spec.empty()) {
    const char* env = std::getenv("T2VQA_PROVIDER");
    spec = env && *env ? env : "stub";
  }
  if (spec == "stub") return std::make_unique<StubProvider>();
  if (spec.starts_with("stub:")) return std::make_unique<StubProvider>(spec.substr(5));
  if (spec.starts_with("file:")) return std::make_unique<FileProvider>(spec.substr(5));
  if (spec.starts_with("http:") && !spec.starts_with("http://")) return std::make_unique<HttpProvider>(spec.substr(5), http);
  if (spec.starts_with("http://") || spec.starts_with("https://")) return std::make_unique<HttpProvider>(spec, http);
  throw InvalidInput("unknown provider '" + spec + "' (expected stub, file:<dir> or http:<url>)");
}

// Captions for one video, read from `cache` when it exists; otherwise fetched
// from the provider and written to `cache`.
inline text::CaptionSet caption_video(const std::string& video_id, const FrameSequence& video, Provider& provider,
                                      const std::optional<std::filesystem::path>& cache = std::nullopt) {
  if (cache && std::filesystem::exists(*cache)) {
    text::CaptionSet set = text::read_captions(*cache);
    if (set.size() != video.frame_count()) {
      throw InvalidInput(cache->string() + ": " + std::to_string(set.size()) + " cached captions for " +
                         std::to_string(video.frame_count()) + " frames");
    }
    return set;
  }
  text::CaptionSet set{provider.captions(video_id, video)};
  if (set.size() != video.frame_count()) throw ProviderError(video_id + ": provider returned wrong caption count", false);
  if (cache) text::write_captions(*cache, set);
  return set;
}

}  // namespace t2vqa::provider
