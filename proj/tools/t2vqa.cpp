#include <CLI11.hpp>

#include <iostream>
#include <set>

#include "t2vqa/pipeline.hpp"

namespace {

using namespace t2vqa;
namespace fs = std::filesystem;

struct Global {
  std::uint64_t seed = 42;
  int jobs = default_jobs();
  std::string provider;  // empty: $T2VQA_PROVIDER, then stub
};

// Options that do not change output content stay out of config_hash.
const std::set<std::string> kUnhashed = {"--out", "--out-dir", "--jobs", "--config", "--json-dir", "--report",
                                         "--cache-dir", "--help"};

RunMeta run_meta(const CLI::App& sub, const Global& g) {
  nlohmann::ordered_json canonical;
  canonical["subcommand"] = sub.get_name();
  canonical["seed"] = g.seed;
  const char* env = std::getenv("T2VQA_PROVIDER");
  canonical["provider"] = !g.provider.empty() ? g.provider : env && *env ? env : "stub";
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name();
    if (kUnhashed.contains(name) || opt->count() == 0) continue;
    canonical[name] = opt->results();
  }
  return RunMeta{T2VQA_VERSION, g.seed, config_hash(canonical)};
}

csv::Table read_csv(const fs::path& p) { return csv::read(p); }

std::string single_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

// ------------------------------------------------------------------ features

struct FeaturesArgs {
  fs::path manifest, niqe_model, brisque_model, probs_dir, json_dir, out;
  bool provider_probs = false;
  std::string spectral_mode = "fourier";
};

void run_features(const FeaturesArgs& a, const Global& g, const RunMeta& meta) {
  pipeline::FeaturesRequest req;
  req.manifest = load_manifest(a.manifest);
  req.niqe = nss::load_niqe_model(a.niqe_model);
  if (!a.brisque_model.empty()) req.brisque = nss::load_brisque_model(a.brisque_model);
  std::unique_ptr<provider::Provider> prov;
  if (!a.probs_dir.empty() && a.provider_probs) throw InvalidInput("--probs-dir and --provider-probs are exclusive");
  if (!a.probs_dir.empty()) {
    req.probs = pipeline::ProbsSource::files;
    req.probs_dir = a.probs_dir;
  } else if (a.provider_probs) {
    prov = provider::make_provider(g.provider);
    req.probs = pipeline::ProbsSource::provider;
    req.provider = prov.get();
  }
  req.options.seed = g.seed;
  req.options.spectral_mode =
      a.spectral_mode == "channel-stats" ? features::SpectralMode::ChannelStats : features::SpectralMode::Fourier;
  req.jobs = g.jobs;
  const auto rows = pipeline::extract_features(req);
  if (!a.json_dir.empty()) {
    const auto run_meta = meta.to_json();
    for (const auto& r : rows) {
      auto j = nlohmann::ordered_json::parse(r.features.to_json().dump());
      nlohmann::ordered_json ordered;
      for (const auto& name : feature_schema()) ordered[name] = j[name];
      ordered["meta"] = j["meta"];
      for (const auto& [k, v] : run_meta.items()) ordered["meta"][k] = v;
      write_file(a.json_dir / (r.video_id + ".json"), ordered.dump(2) + "\n");
    }
  }
  write_file(a.out, pipeline::features_csv(rows, meta.to_json()));
}

// ------------------------------------------------------------------ fit-niqe

struct FitNiqeArgs {
  std::vector<fs::path> frames;
  int patch_size = 96;
  fs::path out;
};

void run_fit_niqe(const FitNiqeArgs& a) {
  std::vector<GrayFrame> gray;
  for (const auto& dir : a.frames) {
    for (const auto& f : load_frames(dir).frames) gray.push_back(to_grayscale(f));
  }
  nss::save_niqe_model(a.out, nss::fit_niqe_model(gray, a.patch_size));
}

// ------------------------------------------------------------------ train-classifier

struct TrainArgs {
  fs::path features, labels, out, report;
  gbt::Grid grid;
};

void run_train(TrainArgs a, const Global& g, const RunMeta& meta) {
  const csv::Table joined =
      pipeline::join_labels(read_csv(a.features), a.features.string(), read_csv(a.labels), a.labels.string());
  gbt::LabelledSet data = gbt::labelled_set_from_table(joined, a.features.string());
  pipeline::assign_missing_splits(data, g.seed);
  a.grid.base.seed = g.seed;
  const gbt::GridResult result = gbt::grid_search(data, a.grid, g.jobs);
  nlohmann::ordered_json model = gbt::to_json(result.model);
  model["meta"] = meta.to_json();
  model["meta"]["train_f1"] = result.report.train_f1;
  model["meta"]["val_f1"] = result.report.val_f1;
  model["meta"]["test_f1"] = result.report.test_f1;
  write_file(a.out, model.dump(2) + "\n");
  if (!a.report.empty()) {
    nlohmann::ordered_json report = pipeline::grid_report_json(result.report);
    report["meta"] = meta.to_json();
    write_file(a.report, report.dump(2) + "\n");
  }
  std::cout << "train_f1=" << num(result.report.train_f1) << " val_f1=" << num(result.report.val_f1)
            << " test_f1=" << num(result.report.test_f1) << "\n";
}

// ------------------------------------------------------------------ textsim

struct TextsimArgs {
  fs::path manifest, cache_dir, out;
  text::SimilarityWeights weights;
};

void run_textsim(const TextsimArgs& a, const Global& g, const RunMeta& meta) {
  auto prov = provider::make_provider(g.provider);
  pipeline::TextsimRequest req;
  req.manifest = load_manifest(a.manifest);
  req.provider = prov.get();
  if (!a.cache_dir.empty()) req.cache_dir = a.cache_dir;
  req.weights = a.weights;
  req.jobs = g.jobs;
  auto m = meta.to_json();
  m["provider"] = prov->name();
  write_file(a.out, pipeline::textsim_csv(pipeline::text_similarity(req), m));
}

// ------------------------------------------------------------------ train-ensemble / score

struct EnsembleArgs {
  fs::path features, classifier, textsim, human, weights, out;
  std::string human_column = "combined";
  std::string dataset_id;
};

std::vector<pipeline::ScoredVideo> scored_videos(const EnsembleArgs& a) {
  return pipeline::join_scores(read_csv(a.features), a.features.string(), read_csv(a.textsim), a.textsim.string(),
                               gbt::load_model(a.classifier));
}

void run_train_ensemble(const EnsembleArgs& a, const RunMeta& meta) {
  const auto data = pipeline::ensemble_rows(scored_videos(a), read_csv(a.human), a.human.string(), a.human_column);
  ensemble::EnsembleWeights w = ensemble::fit_ensemble(data.rows);
  nlohmann::ordered_json m = meta.to_json();
  m["dataset_id"] = a.dataset_id.empty() ? a.human.filename().string() : a.dataset_id;
  m["rows"] = data.rows.size();
  m["unrated_videos"] = data.unrated.size();
  w.meta = m;
  write_file(a.out, ensemble::to_json(w).dump(2) + "\n");
}

void run_score(const EnsembleArgs& a, const RunMeta& meta) {
  const ensemble::EnsembleWeights w = ensemble::load_weights(a.weights);
  write_file(a.out, pipeline::score_csv(scored_videos(a), w, meta.to_json()));
}

// ------------------------------------------------------------------ analyze

struct AnalyzeArgs {
  fs::path ratings, metric_scores, out_dir;
  double k_outlier = 3.0;
  std::string adjust_group = "per-annotator";
  double alpha = 0.05;
};

void run_analyze(const AnalyzeArgs& a, const RunMeta& meta) {
  ratings::AdjustOptions opt{a.k_outlier, ratings::parse_adjust_group(a.adjust_group)};
  std::vector<ratings::MetricScores> metrics;
  if (!a.metric_scores.empty()) {
    metrics = ratings::metrics_from_table(read_csv(a.metric_scores), a.metric_scores.string());
  }
  const auto report = ratings::analyze(ratings::read_ratings(a.ratings), opt, std::move(metrics), a.alpha);
  ratings::emit_report(report, a.out_dir, meta.to_json());
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ProviderError*>(&e)) return "provider";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const InvalidInput*>(&e)) return "invalid_input";
  if (dynamic_cast<const Error*>(&e)) return "error";
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Naturalness and text-alignment quality metrics for text-to-video output"};
  app.set_version_flag("--version", T2VQA_VERSION);
  app.set_config("--config", "", "Read options from a key=value file ([subcommand] sections)");
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--seed", g.seed, "Seed for every randomized step")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads across videos")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--provider", g.provider, "stub | stub:<seed> | file:<dir> | http:<url> (default $T2VQA_PROVIDER, then stub)");

  FeaturesArgs fa;
  auto* features = app.add_subcommand("features", "Extract per-video natural features");
  features->add_option("--manifest", fa.manifest, "Dataset manifest CSV")->required();
  features->add_option("--niqe-model", fa.niqe_model, "NIQE model JSON")->required();
  features->add_option("--brisque-model", fa.brisque_model, "BRISQUE model JSON");
  features->add_option("--probs-dir", fa.probs_dir, "Class probabilities as <dir>/<video_id>.json");
  features->add_flag("--provider-probs", fa.provider_probs, "Fetch class probabilities from the provider");
  features->add_option("--spectral-mode", fa.spectral_mode)
      ->check(CLI::IsMember({"fourier", "channel-stats"}))
      ->capture_default_str();
  features->add_option("--json-dir", fa.json_dir, "Also write <dir>/<video_id>.json");
  features->add_option("--out", fa.out, "Features CSV")->required();

  FitNiqeArgs na;
  auto* fit_niqe = app.add_subcommand("fit-niqe", "Fit a NIQE model from pristine frame directories");
  fit_niqe->add_option("--frames", na.frames, "Frame directories")->required();
  fit_niqe->add_option("--patch-size", na.patch_size)->capture_default_str()->check(CLI::Range(8, 4096));
  fit_niqe->add_option("--out", na.out, "NIQE model JSON")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train-classifier", "Grid-search a boosted-tree naturalness classifier");
  train->add_option("--features", ta.features, "Features CSV")->required();
  train->add_option("--labels", ta.labels, "CSV with video_id,label[,split]")->required();
  train->add_option("--n-trees", ta.grid.n_trees)->capture_default_str()->delimiter(',');
  train->add_option("--max-depth", ta.grid.max_depth)->capture_default_str()->delimiter(',');
  train->add_option("--learning-rate", ta.grid.learning_rate)->capture_default_str()->delimiter(',');
  train->add_option("--l2-reg", ta.grid.l2_reg)->capture_default_str()->delimiter(',');
  train->add_option("--subsample", ta.grid.base.subsample)->capture_default_str();
  train->add_option("--min-child-weight", ta.grid.base.min_child_weight)->capture_default_str();
  train->add_option("--min-split-gain", ta.grid.base.min_split_gain)->capture_default_str();
  train->add_option("--report", ta.report, "Grid report JSON");
  train->add_option("--out", ta.out, "Model JSON")->required();

  TextsimArgs xa;
  auto* textsim = app.add_subcommand("textsim", "Prompt-to-caption similarity per video");
  textsim->add_option("--manifest", xa.manifest, "Dataset manifest CSV")->required();
  textsim->add_option("--cache-dir", xa.cache_dir, "Caption cache directory");
  textsim->add_option("--cos-weight", xa.weights.cosine)->capture_default_str();
  textsim->add_option("--emb-weight", xa.weights.embedding)->capture_default_str();
  textsim->add_option("--fallback-weight", xa.weights.fallback)->capture_default_str();
  textsim->add_option("--out", xa.out, "Similarity CSV")->required();

  EnsembleArgs ea;
  auto* train_ens = app.add_subcommand("train-ensemble", "Fit the linear ensemble to human scores");
  auto* score = app.add_subcommand("score", "Final quality score per video");
  for (auto* sub : {train_ens, score}) {
    sub->add_option("--features", ea.features, "Features CSV")->required();
    sub->add_option("--classifier", ea.classifier, "Classifier model JSON")->required();
    sub->add_option("--textsim", ea.textsim, "Similarity CSV")->required();
  }
  train_ens->add_option("--human", ea.human, "Per-video human scores (analyze video_scores.csv)")->required();
  train_ens->add_option("--human-column", ea.human_column)->capture_default_str();
  train_ens->add_option("--dataset-id", ea.dataset_id);
  train_ens->add_option("--out", ea.out, "Weights JSON")->required();
  score->add_option("--weights", ea.weights, "Weights JSON")->required();
  score->add_option("--out", ea.out, "Scores CSV")->required();

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Human-rating statistics, Tukey HSD and plots");
  analyze->add_option("--ratings", aa.ratings, "Ratings CSV")->required();
  analyze->add_option("--metric-scores", aa.metric_scores, "CSV of model_name plus one column per metric");
  analyze->add_option("--k-outlier", aa.k_outlier)->capture_default_str();
  analyze->add_option("--adjust-group", aa.adjust_group)
      ->check(CLI::IsMember({"per-annotator", "global", "none"}))
      ->capture_default_str();
  analyze->add_option("--alpha", aa.alpha)->check(CLI::IsMember({0.05, 0.01}))->capture_default_str();
  analyze->add_option("--out-dir", aa.out_dir, "Report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help, --version
  } catch (const CLI::ParseError& e) {
    std::cerr << "t2vqa: error[usage]: " << single_line(e.what()) << "\n";
    return 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  try {
    const RunMeta meta = run_meta(*sub, g);
    if (sub == features) run_features(fa, g, meta);
    if (sub == fit_niqe) run_fit_niqe(na);
    if (sub == train) run_train(ta, g, meta);
    if (sub == textsim) run_textsim(xa, g, meta);
    if (sub == train_ens) run_train_ensemble(ea, meta);
    if (sub == score) run_score(ea, meta);
    if (sub == analyze) run_analyze(aa, meta);
  } catch (const std::exception& e) {
    std::cerr << "t2vqa: error[" << error_kind(e) << "]: " << single_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
