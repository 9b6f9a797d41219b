#pragma once

// Small on-disk datasets for command-line and end-to-end runs.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "t2vqa/csv.hpp"
#include "t2vqa/media_io.hpp"
#include "t2vqa/nss.hpp"
#include "t2vqa/video_features.hpp"
#include "test_util.hpp"

namespace t2vqa::testing {

struct SyntheticDataset {
  std::filesystem::path root;
  std::filesystem::path manifest;
  std::filesystem::path niqe_model;
  std::vector<std::string> video_ids;
};

inline RgbFrame tinted(const GrayFrame& g, int shift) {
  RgbFrame out(g.width, g.height);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int v = g.pixels[i];
    out.pixels[i] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(std::clamp(v + shift, 0, 255)),
                     static_cast<std::uint8_t>(255 - v)};
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  write_text(p, text);
}

inline SyntheticDataset make_synthetic_dataset(const std::filesystem::path& root, int videos = 3, int frames = 8,
                                               int size = 64, std::uint32_t seed = 1) {
  static const char* kPrompts[] = {"a red balloon rising over a quiet lake at dawn", "a dog runs on the beach",
                                   "city traffic at night with bright neon signs reflecting on wet asphalt roads",
                                   "a cat sleeping"};
  SyntheticDataset ds;
  ds.root = root;
  std::string manifest = "video_id,model_name,prompt,frames_path,captions_path\n";
  for (int v = 0; v < videos; ++v) {
    const std::string id = "vid" + std::to_string(v);
    const auto dir = root / "frames" / id;
    std::filesystem::create_directories(dir);
    for (int f = 0; f < frames; ++f) {
      GrayFrame g = natural_like(size, size, seed * 1000 + v * 50 + f);
      if (v % 3 == 2) g = add_gaussian_noise(g, 40.0, seed + f);
      char name[32];
      std::snprintf(name, sizeof name, "%04d.png", f);
      write_frame(dir / name, tinted(g, 10 * v));
    }
    manifest += id + ",model" + std::to_string(v % 2) + ",\"" + kPrompts[v % 4] + "\",frames/" + id + ",\n";
    ds.video_ids.push_back(id);
  }
  ds.manifest = root / "manifest.csv";
  write_text(ds.manifest, manifest);

  std::vector<GrayFrame> pristine;
  for (int i = 0; i < 12; ++i) pristine.push_back(natural_like(size, size, 900 + i));
  ds.niqe_model = root / "niqe.json";
  nss::save_niqe_model(ds.niqe_model, nss::fit_niqe_model(pristine, std::min(32, size / 2)));
  return ds;
}

// Features CSV over the full schema plus a labels CSV; the label is
// texture_mean > 0.5 so a depth-1 tree separates the classes.
inline void write_labelled_features(const std::filesystem::path& features, const std::filesystem::path& labels,
                                    int n = 40, std::uint32_t seed = 3, std::string id_prefix = "train") {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> header = {"video_id", "model_name"};
  header.insert(header.end(), feature_schema().begin(), feature_schema().end());
  std::string f = csv::join_row(header), l = "video_id,label\n";
  for (int i = 0; i < n; ++i) {
    const std::string id = id_prefix + std::to_string(i);
    std::vector<std::string> row = {id, "m" + std::to_string(i % 3)};
    double texture = 0.0;
    for (const auto& name : feature_schema()) {
      double v = u(rng);
      if (name == "texture_mean") {
        v = (i % 2 == 0) ? 0.6 + 0.4 * u(rng) : 0.4 * u(rng);
        texture = v;
      }
      row.push_back(name == "mis" && i % 5 == 0 ? "" : codec::format_double(v));
    }
    f += csv::join_row(row);
    l += id + "," + (texture > 0.5 ? "1" : "0") + "\n";
  }
  write_text_file(features, f);
  write_text_file(labels, l);
}

// Ratings for five models whose quality rises in alphabetical order.
inline void write_ratings(const std::filesystem::path& path, int videos_per_model = 6, int annotators = 4,
                          std::uint32_t seed = 5) {
  const char* models[] = {"Aphantasia", "T2VSynthesis", "Text2Video-Zero", "Tune-a-Video", "Video_Fusion"};
  const char* prompts[] = {"a cat", "a red car drives down a wet street at night",
                           "two dogs play with a ball in a sunny park near a lake",
                           "an astronaut rides a horse across a desert under a purple sky with two moons"};
  std::mt19937 rng(seed);
  std::string out = "video_id,model_name,prompt,annotator_id,aspect,score\n";
  for (int m = 0; m < 5; ++m) {
    for (int v = 0; v < videos_per_model; ++v) {
      const std::string vid = std::string(models[m]) + "_" + std::to_string(v);
      for (int a = 0; a < annotators; ++a) {
        for (const char* aspect : {"alignment", "perception"}) {
          const int s = std::clamp(2 + m + static_cast<int>(rng() % 3), 1, 10);
          out += vid + "," + models[m] + ",\"" + prompts[v % 4] + "\",ann" + std::to_string(a) + "," + aspect + "," +
                 std::to_string(s) + "\n";
        }
      }
    }
  }
  write_text_file(path, out);
}

}  // namespace t2vqa::testing
