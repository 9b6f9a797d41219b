#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <json.hpp>
#include <regex>

#include "synthetic_dataset.hpp"
#include "t2vqa/csv.hpp"
#include "t2vqa/ensemble.hpp"
#include "t2vqa/gbt.hpp"
#include "t2vqa/nss.hpp"
#include "t2vqa/output.hpp"

namespace fs = std::filesystem;
using namespace t2vqa;
using namespace t2vqa::testing;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

// Runs the CLI with `args` (already shell-quoted), optionally prefixed by
// environment assignments.
Result run(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const char* cli = std::getenv("T2VQA_CLI");
  if (!cli) throw std::runtime_error("T2VQA_CLI not set");
  const fs::path base = fs::temp_directory_path() / ("t2vqa_cli_" + std::to_string(::getpid()) + "_" +
                                                     std::to_string(counter++));
  const std::string cmd = (env.empty() ? "" : "env " + env + " ") + "'" + cli + "' " + args + " >" +
                          quote(base.string() + ".out") + " 2>" + quote(base.string() + ".err");
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(base.string() + ".out");
  r.err = read_text(base.string() + ".err");
  fs::remove(base.string() + ".out");
  fs::remove(base.string() + ".err");
  return r;
}

std::string strip_meta(const std::string& csv_text) {
  return csv_text.starts_with("# meta: ") ? csv_text.substr(csv_text.find('\n') + 1) : csv_text;
}

nlohmann::json meta_of(const fs::path& csv_path) {
  const std::string text = read_text(csv_path);
  EXPECT_TRUE(text.starts_with("# meta: ")) << csv_path;
  return nlohmann::json::parse(text.substr(8, text.find('\n') - 8));
}

int line_count(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

void expect_error_line(const Result& r, const std::string& kind) {
  EXPECT_EQ(r.code, 1) << r.err;
  EXPECT_EQ(line_count(r.err), 1) << r.err;
  EXPECT_TRUE(r.err.starts_with("t2vqa: error[" + kind + "]: ")) << r.err;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    ds_ = new SyntheticDataset(make_synthetic_dataset(dir_->path() / "data"));
    features_ = dir_->path() / "features.csv";
    const Result r = run("features --manifest " + quote(ds_->manifest) + " --niqe-model " + quote(ds_->niqe_model) +
                         " --out " + quote(features_));
    ASSERT_EQ(r.code, 0) << r.err;

    write_labelled_features(dir_->path() / "train_features.csv", dir_->path() / "labels.csv");
    classifier_ = dir_->path() / "classifier.json";
    const Result t = run("train-classifier --features " + quote(dir_->path() / "train_features.csv") + " --labels " +
                         quote(dir_->path() / "labels.csv") + " --n-trees 5 --max-depth 2 --out " + quote(classifier_));
    ASSERT_EQ(t.code, 0) << t.err;

    textsim_ = dir_->path() / "textsim.csv";
    const Result x = run("--provider stub textsim --manifest " + quote(ds_->manifest) + " --out " + quote(textsim_));
    ASSERT_EQ(x.code, 0) << x.err;
  }
  static void TearDownTestSuite() {
    delete ds_;
    delete dir_;
  }

  fs::path tmp(const std::string& name) const { return dir_->path() / name; }

  static TempDir* dir_;
  static SyntheticDataset* ds_;
  static fs::path features_, classifier_, textsim_;
};

TempDir* Cli::dir_ = nullptr;
SyntheticDataset* Cli::ds_ = nullptr;
fs::path Cli::features_, Cli::classifier_, Cli::textsim_;

TEST_F(Cli, VersionAndUsage) {
  const Result v = run("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("0.1.0"), std::string::npos);

  const Result missing = run("features --manifest x.csv");
  EXPECT_EQ(missing.code, 2);
  EXPECT_EQ(line_count(missing.err), 1) << missing.err;
  EXPECT_TRUE(missing.err.starts_with("t2vqa: error[usage]: ")) << missing.err;

  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("analyze --ratings r.csv --out-dir o --alpha 0.2").code, 2);
}

TEST_F(Cli, FeaturesOneRowPerVideoWithMeta) {
  const auto t = csv::read(features_);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.header.size(), 2 + feature_schema().size());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(t.rows[i][0], ds_->video_ids[i]);
  const auto meta = meta_of(features_);
  EXPECT_EQ(meta["tool_version"], "0.1.0");
  EXPECT_EQ(meta["seed"], 42);
  EXPECT_EQ(meta["config_hash"].get<std::string>().size(), 32u);
}

TEST_F(Cli, FeaturesDeterministicAcrossRunsAndJobs) {
  const auto base = "features --manifest " + quote(ds_->manifest) + " --niqe-model " + quote(ds_->niqe_model);
  ASSERT_EQ(run(base + " --out " + quote(tmp("f_rerun.csv"))).code, 0);
  const Result r = run("--jobs 3 " + base + " --json-dir " + quote(tmp("fjson")) + " --out " + quote(tmp("f_j3.csv")));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text(features_), read_text(tmp("f_rerun.csv")));
  // --jobs and --json-dir are excluded from the config hash, so the files match byte for byte.
  EXPECT_EQ(read_text(features_), read_text(tmp("f_j3.csv")));
  for (const auto& id : ds_->video_ids) EXPECT_TRUE(fs::exists(tmp("fjson") / (id + ".json"))) << id;
}

TEST_F(Cli, FeaturesMissingFramesNamesTheVideo) {
  write_text(tmp("bad_manifest.csv"),
             "video_id,model_name,prompt,frames_path\nvid0,m,a cat," + (ds_->root / "frames/vid0").string() +
                 "\nghost7,m,a dog," + (ds_->root / "frames/nope").string() + "\n");
  const Result r = run("features --manifest " + quote(tmp("bad_manifest.csv")) + " --niqe-model " +
                       quote(ds_->niqe_model) + " --out " + quote(tmp("bad_features.csv")));
  expect_error_line(r, "io");
  EXPECT_NE(r.err.find("ghost7"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(tmp("bad_features.csv")));
}

TEST_F(Cli, FitNiqeProducesLoadableModel) {
  std::vector<std::string> dirs;
  for (const auto& id : ds_->video_ids) dirs.push_back(quote(ds_->root / "frames" / id));
  const Result r = run("fit-niqe --patch-size 32 --out " + quote(tmp("niqe_cli.json")) + " --frames " + dirs[0] + " " +
                       dirs[1] + " " + dirs[2]);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = nss::load_niqe_model(tmp("niqe_cli.json"));
  EXPECT_EQ(m.patch_size, 32);

  const Result few = run("fit-niqe --patch-size 32 --out " + quote(tmp("niqe_few.json")) + " --frames " +
                         quote(tmp("empty_dir_that_does_not_exist")));
  EXPECT_EQ(few.code, 1);
}

TEST_F(Cli, TextsimStubDeterministic) {
  const auto t = csv::read(textsim_);
  ASSERT_EQ(t.rows.size(), 3u);
  const auto c = *t.column("text_similarity");
  for (const auto& row : t.rows) {
    const double v = std::stod(row[c]);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  ASSERT_EQ(run("textsim --manifest " + quote(ds_->manifest) + " --out " + quote(tmp("x2.csv"))).code, 0);
  EXPECT_EQ(read_text(textsim_), read_text(tmp("x2.csv")));
  EXPECT_EQ(meta_of(textsim_)["provider"], "stub");
}

TEST_F(Cli, TextsimCacheIsReused) {
  const auto cache = tmp("cache");
  const auto args = "textsim --manifest " + quote(ds_->manifest) + " --cache-dir " + quote(cache);
  ASSERT_EQ(run(args + " --out " + quote(tmp("c1.csv"))).code, 0);
  EXPECT_EQ(strip_meta(read_text(tmp("c1.csv"))), strip_meta(read_text(textsim_)));
  ASSERT_TRUE(fs::exists(cache / "vid0.jsonl"));

  // Replace vid0's cached captions with its prompt; a cache hit must raise its score to 1.
  std::string edited;
  for (int f = 0; f < 8; ++f) {
    edited += nlohmann::ordered_json{{"frame", f}, {"caption", "a red balloon rising over a quiet lake at dawn"}}.dump() +
              "\n";
  }
  write_text(cache / "vid0.jsonl", edited);
  ASSERT_EQ(run(args + " --out " + quote(tmp("c2.csv"))).code, 0);
  const auto t = csv::read(tmp("c2.csv"));
  EXPECT_NEAR(std::stod(t.rows[0][*t.column("text_similarity")]), 1.0, 1e-9);
  EXPECT_EQ(t.rows[1], csv::read(tmp("c1.csv")).rows[1]);
}

TEST_F(Cli, TextsimProviderFromEnvironment) {
  const auto args = "textsim --manifest " + quote(ds_->manifest);
  ASSERT_EQ(run(args + " --out " + quote(tmp("e1.csv")), "T2VQA_PROVIDER=stub:7").code, 0);
  ASSERT_EQ(run("--provider stub:7 " + args + " --out " + quote(tmp("e2.csv"))).code, 0);
  EXPECT_EQ(meta_of(tmp("e1.csv"))["provider"], "stub:7");
  EXPECT_EQ(read_text(tmp("e1.csv")), read_text(tmp("e2.csv")));
  EXPECT_NE(strip_meta(read_text(tmp("e1.csv"))), strip_meta(read_text(textsim_)));

  const Result bad = run(args + " --out " + quote(tmp("e3.csv")), "T2VQA_PROVIDER=bogus:1");
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(line_count(bad.err), 1) << bad.err;
}

TEST_F(Cli, TextsimHttpUnreachableIsProviderError) {
  const Result r = run("--provider http://127.0.0.1:1 textsim --manifest " + quote(ds_->manifest) + " --out " +
                       quote(tmp("h.csv")));
  expect_error_line(r, "provider");
  EXPECT_FALSE(fs::exists(tmp("h.csv")));
}

TEST_F(Cli, TextsimEmptyManifestFails) {
  write_text(tmp("empty_manifest.csv"), "video_id,model_name,prompt,frames_path\n");
  const Result r = run("textsim --manifest " + quote(tmp("empty_manifest.csv")) + " --out " + quote(tmp("z.csv")));
  expect_error_line(r, "invalid_input");
}

TEST_F(Cli, TrainClassifierDeterministicWithReport) {
  const auto args = "train-classifier --features " + quote(tmp("train_features.csv")) + " --labels " +
                    quote(tmp("labels.csv")) + " --n-trees 5 --max-depth 2";
  const Result r = run(args + " --report " + quote(tmp("grid.json")) + " --out " + quote(tmp("cls2.json")));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text(classifier_), read_text(tmp("cls2.json")));
  const auto report = nlohmann::json::parse(read_text(tmp("grid.json")));
  EXPECT_TRUE(report.is_object());
  EXPECT_NE(r.out.find("test"), std::string::npos) << r.out;

  const auto model = gbt::load_model(classifier_);
  EXPECT_EQ(model.trees.size(), 5u);
}

TEST_F(Cli, TrainClassifierRejectsUnknownIds) {
  write_text(tmp("labels_bad.csv"), "video_id,label\nnobody,1\n");
  const Result r = run("train-classifier --features " + quote(tmp("train_features.csv")) + " --labels " +
                       quote(tmp("labels_bad.csv")) + " --out " + quote(tmp("cls_bad.json")));
  expect_error_line(r, "invalid_input");
  EXPECT_NE(r.err.find("nobody"), std::string::npos);
}

TEST_F(Cli, ScoreWithNaturalnessOnlyWeights) {
  ensemble::EnsembleWeights w;
  w.intercept = 0.0;
  w.w_naturalness = 1.0;
  w.w_textsim = 0.0;
  ensemble::save_weights(tmp("w_nat.json"), w);
  const auto args = "score --features " + quote(features_) + " --classifier " + quote(classifier_) + " --textsim " +
                    quote(textsim_) + " --weights " + quote(tmp("w_nat.json"));
  const Result r = run(args + " --out " + quote(tmp("s1.csv")));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = csv::read(tmp("s1.csv"));
  ASSERT_EQ(t.rows.size(), 3u);
  for (const auto& row : t.rows) {
    EXPECT_NEAR(std::stod(row[*t.column("ensemble_score")]), std::stod(row[*t.column("naturalness")]), 1e-12);
  }
  ASSERT_EQ(run(args + " --out " + quote(tmp("s2.csv"))).code, 0);
  EXPECT_EQ(read_text(tmp("s1.csv")), read_text(tmp("s2.csv")));
}

TEST_F(Cli, ScoreDisjointIdsListed) {
  const auto x = csv::read(textsim_);
  std::string text = csv::join_row(x.header);
  for (auto row : x.rows) {
    if (row[0] == "vid2") row[0] = "vid9";
    text += csv::join_row(row);
  }
  write_text(tmp("textsim_shifted.csv"), text);
  ensemble::EnsembleWeights w;
  ensemble::save_weights(tmp("w_default.json"), w);
  const Result r = run("score --features " + quote(features_) + " --classifier " + quote(classifier_) +
                       " --textsim " + quote(tmp("textsim_shifted.csv")) + " --weights " + quote(tmp("w_default.json")) +
                       " --out " + quote(tmp("s_bad.csv")));
  expect_error_line(r, "invalid_input");
  EXPECT_NE(r.err.find("vid2"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("vid9"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(tmp("s_bad.csv")));
}

TEST_F(Cli, TrainEnsembleRecoversLinearTarget) {
  // The synthetic training set gives two naturalness levels; a noiseless
  // linear target in naturalness and similarity must be fitted exactly.
  const auto features = csv::read(tmp("train_features.csv"));
  const auto model = gbt::load_model(classifier_);
  std::string textsim = "video_id,model_name,text_similarity\n", human = "video_id,combined\n";
  for (std::size_t i = 0; i < features.rows.size(); ++i) {
    const auto& row = features.rows[i];
    std::map<std::string, std::optional<double>> named;
    for (std::size_t c = 2; c < row.size(); ++c) {
      named[features.header[c]] = row[c].empty() ? std::nullopt : std::optional<double>(std::stod(row[c]));
    }
    const double nat = gbt::predict_naturalness(model, named);
    const double sim = 0.05 + 0.9 * static_cast<double>((i * 7) % 40) / 39.0;
    textsim += row[0] + "," + row[1] + "," + num(sim) + "\n";
    human += row[0] + "," + num(0.1 + 0.3 * nat + 0.5 * sim) + "\n";
  }
  human += "unseen,0.4\n";
  write_text(tmp("ens_textsim.csv"), textsim);
  write_text(tmp("human.csv"), human);
  const Result r = run("train-ensemble --features " + quote(tmp("train_features.csv")) + " --classifier " +
                       quote(classifier_) + " --textsim " + quote(tmp("ens_textsim.csv")) + " --human " +
                       quote(tmp("human.csv")) + " --dataset-id synth --out " + quote(tmp("weights.json")));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto w = ensemble::load_weights(tmp("weights.json"));
  EXPECT_NEAR(w.intercept, 0.1, 1e-9);
  EXPECT_NEAR(w.w_naturalness, 0.3, 1e-9);
  EXPECT_NEAR(w.w_textsim, 0.5, 1e-9);
  for (const char* key : {"tool_version", "seed", "config_hash", "dataset_id", "rows", "unrated_videos"}) {
    EXPECT_TRUE(w.meta.contains(key)) << key;
  }
  EXPECT_EQ(w.meta["dataset_id"], "synth");
  EXPECT_EQ(w.meta["rows"], 40);

  const Result s = run("score --features " + quote(tmp("train_features.csv")) + " --classifier " +
                       quote(classifier_) + " --textsim " + quote(tmp("ens_textsim.csv")) + " --weights " +
                       quote(tmp("weights.json")) + " --out " + quote(tmp("ens_scores.csv")));
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(csv::read(tmp("ens_scores.csv")).rows.size(), 40u);
}

TEST_F(Cli, TrainEnsembleRankDeficientIsInvalidInput) {
  // The real synthetic videos all fall on one side of the classifier's split.
  std::string human = "video_id,combined\n";
  for (int i = 0; i < 3; ++i) human += ds_->video_ids[i] + "," + num(0.2 + 0.3 * i) + "\n";
  write_text(tmp("human3.csv"), human);
  const Result r = run("train-ensemble --features " + quote(features_) + " --classifier " + quote(classifier_) +
                       " --textsim " + quote(textsim_) + " --human " + quote(tmp("human3.csv")) + " --out " +
                       quote(tmp("w3.json")));
  expect_error_line(r, "invalid_input");
  EXPECT_FALSE(fs::exists(tmp("w3.json")));
}

TEST_F(Cli, AnalyzeFiveModels) {
  write_ratings(tmp("ratings.csv"));
  const auto args = "analyze --ratings " + quote(tmp("ratings.csv"));
  ASSERT_EQ(run(args + " --out-dir " + quote(tmp("report1"))).code, 0);
  ASSERT_EQ(run(args + " --out-dir " + quote(tmp("report2"))).code, 0);
  const auto tukey = csv::read(tmp("report1") / "tukey.csv");
  EXPECT_EQ(tukey.rows.size(), 10u);
  EXPECT_EQ(csv::read(tmp("report1") / "model_stats.csv").rows.size(), 5u);
  for (const auto& entry : fs::directory_iterator(tmp("report1"))) {
    EXPECT_EQ(read_text(entry.path()), read_text(tmp("report2") / entry.path().filename())) << entry.path();
  }
  const auto svg = read_text(tmp("report1") / "tukey_intervals.svg");
  EXPECT_TRUE(svg.starts_with("<svg") || svg.starts_with("<?xml")) << svg.substr(0, 40);
}

TEST_F(Cli, AnalyzeBadRatingsLeavesNoOutput) {
  write_text(tmp("ratings_empty.csv"), "video_id,model_name,prompt,annotator_id,aspect,score\n");
  expect_error_line(run("analyze --ratings " + quote(tmp("ratings_empty.csv")) + " --out-dir " + quote(tmp("r_e"))),
                    "invalid_input");
  EXPECT_FALSE(fs::exists(tmp("r_e")));

  write_text(tmp("ratings_bad.csv"),
             "video_id,model_name,prompt,annotator_id,aspect,score\nv,m,p,a,alignment,11\n");
  expect_error_line(run("analyze --ratings " + quote(tmp("ratings_bad.csv")) + " --out-dir " + quote(tmp("r_b"))),
                    "invalid_input");
  EXPECT_FALSE(fs::exists(tmp("r_b")));

  expect_error_line(run("analyze --ratings " + quote(tmp("no_such.csv")) + " --out-dir " + quote(tmp("r_m"))), "io");
}

TEST_F(Cli, ConfigFileAndFlagOverride) {
  write_ratings(tmp("ratings_cfg.csv"));
  write_text(tmp("run.toml"), "seed = 7\n[analyze]\nk-outlier = 2.5\n");
  const auto args = "--config " + quote(tmp("run.toml")) + " analyze --ratings " + quote(tmp("ratings_cfg.csv"));
  ASSERT_EQ(run(args + " --out-dir " + quote(tmp("cfg1"))).code, 0);
  const auto meta = meta_of(tmp("cfg1") / "model_stats.csv");
  EXPECT_EQ(meta["seed"], 7);
  EXPECT_EQ(meta["k_outlier"], 2.5);

  ASSERT_EQ(run("--seed 9 " + args + " --k-outlier 4 --out-dir " + quote(tmp("cfg2"))).code, 0);
  const auto over = meta_of(tmp("cfg2") / "model_stats.csv");
  EXPECT_EQ(over["seed"], 9);
  EXPECT_EQ(over["k_outlier"], 4.0);
  EXPECT_NE(over["config_hash"], meta["config_hash"]);
}

}  // namespace
