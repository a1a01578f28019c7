#include "movekit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "movekit/dataset.hpp"
#include "movekit/eval.hpp"
#include "movekit/hpo.hpp"
#include "movekit/lda.hpp"
#include "movekit/simd.hpp"
#include "movekit/train.hpp"

namespace movekit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// --config supplies defaults for flags the user did not pass; flags win.
struct FlagOverlay {
  json cfg = json::object();
  std::vector<std::function<void()>> appliers;
  std::set<std::string> known;

  void load(const fs::path& path) {
    if (!fs::exists(path)) fail(Errc::missing_file, "config file not found: " + path.string());
    std::ifstream in(path);
    try {
      in >> cfg;
    } catch (const std::exception& e) {
      fail(Errc::io_error, "config parse error: " + std::string(e.what()));
    }
    if (!cfg.is_object()) fail(Errc::io_error, "config file must hold a JSON object");
  }

  template <class T>
  void reg(CLI::Option* opt, T* value, const std::string& name) {
    known.insert(name);
    appliers.push_back([this, opt, value, name]() {
      if (opt->count() == 0 && cfg.contains(name)) {
        try {
          *value = cfg.at(name).get<T>();
        } catch (const std::exception&) {
          fail(Errc::invalid_argument, "config key '" + name + "' has the wrong type");
        }
      }
    });
  }

  void apply() {
    for (const auto& [k, v] : cfg.items())
      if (!known.count(k)) fail(Errc::invalid_argument, "unknown config key: " + k);
    for (auto& f : appliers) f();
  }
};

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

EmbeddingDataset load_dataset(const fs::path& manifest, const fs::path& annotations) {
  EmbeddingDataset ds = load_manifest(manifest);
  if (!annotations.empty()) attach_annotations(ds, load_annotations(annotations));
  return ds;
}

PoolMode parse_pool(const std::string& s) {
  if (s == "mean") return PoolMode::mean;
  if (s == "max") return PoolMode::max;
  fail(Errc::invalid_argument, "pool must be mean or max, got " + s);
}

Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  fail(Errc::invalid_argument, "optimizer must be sgd or adam, got " + s);
}

OverlapRule parse_rule(const std::string& s) {
  if (s == "nearest-center") return OverlapRule::nearest_center;
  if (s == "latest-window") return OverlapRule::latest_window;
  fail(Errc::invalid_argument, "rule must be nearest-center or latest-window, got " + s);
}

FrameCountMode parse_count_mode(const std::string& s) {
  if (s == "all") return FrameCountMode::all_frames;
  if (s == "annotated") return FrameCountMode::annotated_only;
  fail(Errc::invalid_argument, "count-mode must be all or annotated, got " + s);
}

json confusion_to_json(const AccuracyReport& r) {
  json rows = json::array();
  for (int g = 0; g < 4; ++g) {
    json row = json::array();
    for (int p = 0; p < 4; ++p) row.push_back(r.confusion[g][p]);
    rows.push_back(row);
  }
  return rows;
}

json accuracy_to_json(const AccuracyReport& r) {
  AccuracySummary summary = format_accuracy_summary(r);
  return {{"overall", r.overall},
          {"summary", {{"overall", summary.overall}, {"per_video", summary.per_video}}},
          {"per_video_mean", r.per_video_mean},
          {"per_video_std", r.per_video_std},
          {"total_frames", r.total_frames},
          {"correct_frames", r.correct_frames},
          {"num_videos", r.num_videos},
          {"confusion", confusion_to_json(r)},
          {"parse_failures", r.parse_failures},
          {"count_mode", r.mode == FrameCountMode::all_frames ? "all" : "annotated"},
          {"std_normalization", "population"}};
}

std::vector<WindowPrediction> predictions_from_eval(const SplitEval& ev) {
  std::vector<WindowPrediction> out;
  out.reserve(ev.windows.size());
  for (const auto& w : ev.windows) {
    WindowPrediction p;
    p.video_id = w.video_id;
    p.start_sec = w.start_sec;
    p.end_sec = w.end_sec;
    p.pred = w.pred;
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions(const fs::path& path, const SplitEval& ev) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
  for (const auto& w : ev.windows) {
    json rec = {{"video_id", w.video_id},
                {"start_sec", w.start_sec},
                {"end_sec", w.end_sec},
                {"pred", label_name(w.pred)},
                {"logits", w.logits}};
    out << rec.dump() << "\n";
  }
}

AccuracyReport frame_report(const SplitEval& ev, const EmbeddingDataset& data,
                            OverlapRule rule, FrameCountMode mode) {
  auto preds = predictions_from_eval(ev);
  std::vector<FrameSeries> series;
  for (const auto& v : data.videos)
    series.push_back(windows_to_frames(preds, {v.video_id, v.fps, v.duration_sec},
                                       data.annotations, rule));
  return frame_accuracy(series, mode);
}

json split_eval_to_json(const SplitEval& ev) {
  json j;
  j["count"] = ev.count;
  if (ev.count == 0)
    j["window_accuracy"] = "undefined";
  else
    j["window_accuracy"] = ev.accuracy;
  return j;
}

struct DataFlags {
  std::string manifest;
  std::string annotations;
  std::string split_file;

  void add(CLI::App* cmd, FlagOverlay& ov) {
    // presence is validated after the config overlay lands, not by CLI11
    ov.reg(cmd->add_option("--manifest", manifest, "manifest.json path"), &manifest,
           "manifest");
    ov.reg(cmd->add_option("--annotations", annotations, "annotations.csv path"),
           &annotations, "annotations");
    ov.reg(cmd->add_option("--split-file", split_file, "test video ids, one per line"),
           &split_file, "split-file");
  }
};

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  int classes = 4;
  std::size_t d = 64;
  std::size_t videos = 20;
  std::size_t windows = 24;
  double sep = 50.0;
  double test_fraction = 0.2;
};

int run_synth(const SynthArgs& a, std::uint64_t seed, const fs::path& out_dir) {
  EmbeddingDataset ds =
      gen_synthetic(a.classes, a.d, a.videos, a.windows, a.sep, seed);
  fs::create_directories(out_dir);
  write_manifest(ds, out_dir / "manifest.json");
  write_annotations(ds.annotations, out_dir / "annotations.csv");

  std::vector<std::string> ids;
  for (const auto& v : ds.videos) ids.push_back(v.video_id);
  Rng split_rng(substream_seed(seed, "split"));
  split_rng.shuffle(ids);
  auto n_test = static_cast<std::size_t>(
      std::floor(a.test_fraction * static_cast<double>(ids.size())));
  std::vector<std::string> test_ids(ids.begin(), ids.begin() + n_test);
  std::sort(test_ids.begin(), test_ids.end());
  write_split_file(test_ids, out_dir / "split.txt");

  json cfg = {{"subcommand", "synth"}, {"classes", a.classes},   {"d", a.d},
              {"videos", a.videos},    {"windows", a.windows},   {"sep", a.sep},
              {"test_fraction", a.test_fraction}, {"seed", seed}};
  write_json_file(out_dir / "synth_config.json", cfg);
  std::cout << cfg.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  DataFlags data;
  int n_h = 1;
  int n_c = 1;
  double scale = 2.0;
  bool global_residual = false;
  double margin = 0.5;
  double pair_weight = 1.0;
  double weight_decay = 0.0;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  int epochs = 50;
  std::size_t pairs_per_batch = 16;
  std::string optimizer = "adam";
  int patience = 10;
  double val_fraction = 0.15;
  double min_coverage = 0.5;
  std::string pool = "mean";
  std::string rule = "nearest-center";
  std::string count_mode = "all";
};

json resolved_train_config(const TrainArgs& a, std::uint64_t seed) {
  return {{"subcommand", "train"},
          {"manifest", a.data.manifest},
          {"annotations", a.data.annotations},
          {"split-file", a.data.split_file},
          {"n-h", a.n_h},
          {"n-c", a.n_c},
          {"scale", a.scale},
          {"global-residual", a.global_residual},
          {"margin", a.margin},
          {"pair-weight", a.pair_weight},
          {"weight-decay", a.weight_decay},
          {"lr", a.lr},
          {"batch-size", a.batch_size},
          {"epochs", a.epochs},
          {"pairs-per-batch", a.pairs_per_batch},
          {"optimizer", a.optimizer},
          {"patience", a.patience},
          {"val-fraction", a.val_fraction},
          {"min-coverage", a.min_coverage},
          {"pool", a.pool},
          {"rule", a.rule},
          {"count-mode", a.count_mode},
          {"seed", seed}};
}

int run_train(const TrainArgs& a, std::uint64_t seed, const fs::path& out_dir) {
  EmbeddingDataset full = load_dataset(a.data.manifest, a.data.annotations);
  EmbeddingDataset train_set = std::move(full);
  EmbeddingDataset test_set;
  bool have_test = false;
  if (!a.data.split_file.empty()) {
    auto ids = load_split_file(a.data.split_file);
    SplitResult sr = split_train_test(train_set, ids);
    train_set = std::move(sr.train);
    test_set = std::move(sr.test);
    have_test = !test_set.videos.empty();
  }

  HeadConfig head_cfg;
  head_cfg.d = train_set.dim;
  head_cfg.n_h = a.n_h;
  head_cfg.n_c = a.n_c;
  head_cfg.scale = a.scale;
  head_cfg.global_residual = a.global_residual;
  head_cfg.seed = seed;

  LossConfig loss_cfg{a.margin, a.pair_weight, a.weight_decay};

  TrainConfig tc;
  tc.learning_rate = a.lr;
  tc.batch_size = a.batch_size;
  tc.epochs = a.epochs;
  tc.pairs_per_batch = a.pairs_per_batch;
  tc.optimizer = parse_optimizer(a.optimizer);
  tc.patience = a.patience;
  tc.seed = seed;
  tc.val_fraction = a.val_fraction;
  tc.min_coverage = a.min_coverage;
  tc.pool = parse_pool(a.pool);
  tc.overlap_rule = parse_rule(a.rule);
  tc.count_mode = parse_count_mode(a.count_mode);

  FitResult fit_res = fit(train_set, head_cfg, loss_cfg, tc);

  fs::create_directories(out_dir);
  save_checkpoint(out_dir / "checkpoint.mkc", fit_res.params,
                  fit_res.report.best_epoch);

  json cfg = resolved_train_config(a, seed);
  json report;
  report["config"] = cfg;
  report["best_epoch"] = fit_res.report.best_epoch;
  report["best_val_accuracy"] = fit_res.report.best_val_accuracy;
  report["wall_clock_sec"] = fit_res.report.wall_clock_sec;
  report["val_videos"] = fit_res.report.val_video_ids;
  report["train_windows"] = fit_res.report.train_windows;
  report["val_windows"] = fit_res.report.val_windows;
  json hist = json::array();
  for (const auto& e : fit_res.report.history)
    hist.push_back({{"total", e.loss.total},
                    {"reg", e.loss.reg},
                    {"hinge", e.loss.hinge},
                    {"contrastive", e.loss.contrastive},
                    {"val_accuracy", e.val_accuracy}});
  report["history"] = hist;

  SplitEval train_eval = evaluate_split(fit_res.params, train_set, tc.min_coverage, tc.pool);
  report["train_eval"] = split_eval_to_json(train_eval);
  write_predictions(out_dir / "predictions_train.jsonl", train_eval);
  AccuracyReport fr_train = frame_report(train_eval, train_set, tc.overlap_rule, tc.count_mode);
  report["frame_train"] = accuracy_to_json(fr_train);

  if (have_test) {
    SplitEval test_eval = evaluate_split(fit_res.params, test_set, tc.min_coverage, tc.pool);
    report["test_eval"] = split_eval_to_json(test_eval);
    write_predictions(out_dir / "predictions_test.jsonl", test_eval);
    AccuracyReport fr_test = frame_report(test_eval, test_set, tc.overlap_rule, tc.count_mode);
    report["frame_test"] = accuracy_to_json(fr_test);
    // convenience keys for aggregation across runs
    report["overall"] = fr_test.overall;
    report["per_video_mean"] = fr_test.per_video_mean;
  } else {
    report["overall"] = fr_train.overall;
    report["per_video_mean"] = fr_train.per_video_mean;
  }

  write_json_file(out_dir / "report.json", report);
  std::cout << cfg.dump(2) << "\n";
  std::cout << "best_epoch=" << fit_res.report.best_epoch
            << " best_val_accuracy=" << fit_res.report.best_val_accuracy << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

struct TuneArgs {
  DataFlags data;
  int budget = 32;
  double eta = 4.0;
  int r_min = 2;
  int r_max = 32;
  int parallel = 1;
  bool resume = false;
  double val_fraction = 0.15;
  double min_coverage = 0.5;
  std::string pool = "mean";
  std::size_t pairs_per_batch = 16;
};

int run_tune(const TuneArgs& a, std::uint64_t seed, const fs::path& out_dir) {
  EmbeddingDataset train_set = load_dataset(a.data.manifest, a.data.annotations);
  if (!a.data.split_file.empty()) {
    auto ids = load_split_file(a.data.split_file);
    train_set = split_train_test(train_set, ids).train;
  }
  if (train_set.videos.empty()) fail(Errc::empty_dataset, "tune: no training videos");

  PoolMode pool = parse_pool(a.pool);

  auto evaluate = [&](const TrialConfig& cfg, std::uint64_t trial_seed,
                      int epochs) -> double {
    HeadConfig hc;
    hc.d = train_set.dim;
    hc.n_h = cfg.n_h;
    hc.n_c = cfg.n_c;
    hc.scale = cfg.scale;
    hc.seed = trial_seed;
    LossConfig lc{cfg.margin, cfg.pair_weight, cfg.weight_decay};
    TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = cfg.batch_size;
    tc.epochs = epochs;
    tc.pairs_per_batch = a.pairs_per_batch;
    tc.patience = 0;  // rung length is the budget; ASHA does the stopping
    tc.seed = trial_seed;
    tc.val_fraction = a.val_fraction;
    tc.min_coverage = a.min_coverage;
    tc.pool = pool;
    return fit(train_set, hc, lc, tc).report.best_val_accuracy;
  };

  fs::create_directories(out_dir);
  SearchSpace space;
  SearchOptions opts;
  opts.budget = a.budget;
  opts.eta = a.eta;
  opts.r_min = a.r_min;
  opts.r_max = a.r_max;
  opts.parallelism = a.parallel;
  opts.seed = seed;
  opts.ledger_path = out_dir / "ledger.jsonl";
  opts.resume = a.resume;

  SearchResult res = run_search(evaluate, space, opts);
  if (res.best_trial_id < 0) fail(Errc::numerical_failure, "tune: every trial failed");
  const TrialRecord& best = res.best();

  // Retrain the winner to the full resource and keep its parameters.
  HeadConfig hc;
  hc.d = train_set.dim;
  hc.n_h = best.config.n_h;
  hc.n_c = best.config.n_c;
  hc.scale = best.config.scale;
  hc.seed = best.seed;
  LossConfig lc{best.config.margin, best.config.pair_weight, best.config.weight_decay};
  TrainConfig tc;
  tc.learning_rate = best.config.learning_rate;
  tc.batch_size = best.config.batch_size;
  tc.epochs = a.r_max;
  tc.pairs_per_batch = a.pairs_per_batch;
  tc.patience = 0;
  tc.seed = best.seed;
  tc.val_fraction = a.val_fraction;
  tc.min_coverage = a.min_coverage;
  tc.pool = pool;
  FitResult best_fit = fit(train_set, hc, lc, tc);
  save_checkpoint(out_dir / "best_checkpoint.mkc", best_fit.params,
                  best_fit.report.best_epoch);

  json cfg = {{"subcommand", "tune"}, {"budget", a.budget},   {"eta", a.eta},
              {"r-min", a.r_min},     {"r-max", a.r_max},     {"parallel", a.parallel},
              {"resume", a.resume},   {"seed", seed},         {"pool", a.pool},
              {"val-fraction", a.val_fraction}, {"min-coverage", a.min_coverage},
              {"pairs-per-batch", a.pairs_per_batch}};
  json report;
  report["config"] = cfg;
  report["best_trial"] = best.trial_id;
  report["best_objective"] = best.last_objective();
  report["best_trial_config"] = {{"n_h", best.config.n_h},
                                 {"n_c", best.config.n_c},
                                 {"scale", best.config.scale},
                                 {"margin", best.config.margin},
                                 {"pair_weight", best.config.pair_weight},
                                 {"weight_decay", best.config.weight_decay},
                                 {"learning_rate", best.config.learning_rate},
                                 {"batch_size", best.config.batch_size}};
  report["trials"] = res.trials.size();
  write_json_file(out_dir / "tune_report.json", report);
  std::cout << cfg.dump(2) << "\n";
  std::cout << "best_trial=" << best.trial_id
            << " best_objective=" << best.last_objective() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// lda
// ---------------------------------------------------------------------------

struct LdaArgs {
  DataFlags data;
  std::string split = "train";
  double ridge = -1.0;
  double min_coverage = 0.5;
  std::string pool = "mean";
};

int run_lda(const LdaArgs& a, std::uint64_t seed, const fs::path& out_dir) {
  (void)seed;
  EmbeddingDataset ds = load_dataset(a.data.manifest, a.data.annotations);
  if (a.split != "all" && a.split != "train" && a.split != "test")
    fail(Errc::invalid_argument, "split must be train, test, or all");
  if (a.split != "all") {
    if (a.data.split_file.empty())
      fail(Errc::invalid_argument, "--split-file required for split=" + a.split);
    SplitResult sr = split_train_test(ds, load_split_file(a.data.split_file));
    ds = a.split == "train" ? std::move(sr.train) : std::move(sr.test);
  }

  auto windows = labeled_windows(ds, a.min_coverage, parse_pool(a.pool));
  if (windows.empty()) fail(Errc::empty_dataset, "lda: no windows in selected split");

  Mat x(windows.size(), ds.dim);
  std::vector<int> y(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    std::copy(windows[i].embedding.begin(), windows[i].embedding.end(), x.row(i));
    y[i] = static_cast<int>(windows[i].label);
  }

  SeparabilityScores scores = separability_scores(x, y, a.ridge);
  Mat proj = project2d(x, scores);

  fs::create_directories(out_dir);
  json cfg = {{"subcommand", "lda"},      {"split", a.split},
              {"ridge", a.ridge},         {"min-coverage", a.min_coverage},
              {"pool", a.pool},           {"manifest", a.data.manifest}};
  json report;
  report["config"] = cfg;
  report["encoder"] = ds.encoder_name;
  report["j1"] = scores.j1;
  report["j2"] = scores.j2;
  report["j2_defined"] = scores.j2_defined;
  report["ridge"] = scores.ridge;
  report["windows"] = windows.size();
  report["class_counts"] = {{"powermove", scores.class_counts[0]},
                            {"footwork", scores.class_counts[1]},
                            {"toprock", scores.class_counts[2]},
                            {"none", scores.class_counts[3]}};
  write_json_file(out_dir / "lda_report.json", report);

  std::ofstream csv(out_dir / "projection.csv", std::ios::trunc);
  if (!csv) fail(Errc::io_error, "cannot write projection.csv");
  csv << "x,y,label,video_id\n";
  csv.precision(17);
  for (std::size_t i = 0; i < windows.size(); ++i)
    csv << proj(i, 0) << ',' << proj(i, 1) << ',' << label_name(windows[i].label) << ','
        << windows[i].video_id << '\n';

  std::cout << cfg.dump(2) << "\n";
  std::cout << "j1=" << scores.j1 << " j2=" << scores.j2
            << (scores.j2_defined ? "" : " (j2 undefined)") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  DataFlags data;
  std::string predictions;
  std::string split = "test";
  std::string rule = "nearest-center";
  std::string count_mode = "all";
  std::vector<std::string> aggregate;
};

std::vector<WindowPrediction> load_predictions(const fs::path& path,
                                               std::size_t& parse_failures) {
  if (!fs::exists(path)) fail(Errc::missing_file, "predictions not found: " + path.string());
  std::ifstream in(path);
  std::vector<WindowPrediction> preds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const std::exception& e) {
      fail(Errc::io_error,
           "predictions line " + std::to_string(lineno) + ": " + e.what());
    }
    WindowPrediction p;
    p.video_id = rec.at("video_id").get<std::string>();
    p.start_sec = rec.at("start_sec").get<double>();
    p.end_sec = rec.at("end_sec").get<double>();
    if (!(p.end_sec > p.start_sec))
      fail(Errc::io_error, "predictions line " + std::to_string(lineno) + ": bad span");
    if (rec.contains("raw_text")) {
      p.from_decoder = true;
      p.raw_text = rec.at("raw_text").get<std::string>();
      ParsedLabel pl = parse_decoder_output(p.raw_text);
      p.pred = pl.label;
      p.parse_ok = pl.ok;
      if (!pl.ok) ++parse_failures;
    } else {
      if (!try_parse_label(rec.at("pred").get<std::string>(), p.pred))
        fail(Errc::io_error,
             "predictions line " + std::to_string(lineno) + ": unknown label");
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

int run_eval(const EvalArgs& a, std::uint64_t seed, const fs::path& out_dir) {
  (void)seed;
  fs::create_directories(out_dir);

  if (!a.aggregate.empty()) {
    std::vector<std::map<std::string, double>> runs;
    for (const auto& f : a.aggregate) {
      if (!fs::exists(f)) fail(Errc::missing_file, "run report not found: " + f);
      std::ifstream in(f);
      json j;
      try {
        in >> j;
      } catch (const std::exception& e) {
        fail(Errc::io_error, std::string("run report parse error: ") + e.what());
      }
      std::map<std::string, double> metrics;
      for (const char* key : {"overall", "per_video_mean"}) {
        if (!j.contains(key))
          fail(Errc::io_error, std::string("run report missing metric: ") + key);
        metrics[key] = j.at(key).get<double>();
      }
      runs.push_back(std::move(metrics));
    }
    auto table = aggregate_runs(runs);
    json out = {{"runs", a.aggregate.size()}};
    for (const auto& [k, v] : table) {
      out[k] = v;
      std::cout << k << ": " << v << "\n";
    }
    write_json_file(out_dir / "aggregate.json", out);
    return 0;
  }

  if (a.predictions.empty())
    fail(Errc::invalid_argument, "eval needs --predictions (or --aggregate)");

  EmbeddingDataset ds = load_dataset(a.data.manifest, a.data.annotations);
  if (a.split != "all") {
    if (a.data.split_file.empty())
      fail(Errc::invalid_argument, "--split-file required for split=" + a.split);
    SplitResult sr = split_train_test(ds, load_split_file(a.data.split_file));
    ds = a.split == "train" ? std::move(sr.train) : std::move(sr.test);
  }

  std::size_t parse_failures = 0;
  auto preds = load_predictions(a.predictions, parse_failures);

  OverlapRule rule = parse_rule(a.rule);
  FrameCountMode mode = parse_count_mode(a.count_mode);

  // With no split file the evaluation universe is the predicted videos.
  std::set<std::string> predicted;
  for (const auto& p : preds) predicted.insert(p.video_id);
  std::vector<FrameSeries> series;
  for (const auto& v : ds.videos) {
    if (a.split == "all" && a.data.split_file.empty() && !predicted.count(v.video_id))
      continue;
    series.push_back(windows_to_frames(preds, {v.video_id, v.fps, v.duration_sec},
                                       ds.annotations, rule));
  }
  if (series.empty()) fail(Errc::empty_dataset, "eval: no videos to score");

  AccuracyReport r = frame_accuracy(series, mode);
  r.parse_failures = parse_failures;

  json cfg = {{"subcommand", "eval"},   {"predictions", a.predictions},
              {"split", a.split},       {"rule", a.rule},
              {"count-mode", a.count_mode}, {"manifest", a.data.manifest}};
  json report = accuracy_to_json(r);
  report["config"] = cfg;
  report["overlap_rule"] = a.rule;
  report["simd_backend"] = simd::active_name();
  write_json_file(out_dir / "report.json", report);
  std::cout << cfg.dump(2) << "\n";
  char buf[128];
  std::snprintf(buf, sizeof(buf), "overall=%.4f per_video=%.4f +/- %.4f", r.overall,
                r.per_video_mean, r.per_video_std);
  std::cout << buf << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"windowed-move classification toolkit"};
  app.require_subcommand(1);
  // let --seed/--out-dir/--config appear after the subcommand too
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string config_path;
  FlagOverlay overlay;

  auto* seed_opt = app.add_option("--seed", seed, "root seed for all substreams");
  auto* out_opt = app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--config", config_path, "JSON config overlay (flags win)");
  overlay.reg(seed_opt, &seed, "seed");
  overlay.reg(out_opt, &out_dir, "out-dir");
  overlay.known.insert("config");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->fallthrough();
  overlay.reg(synth->add_option("--classes", synth_args.classes, "classes (<= 4)"),
              &synth_args.classes, "classes");
  overlay.reg(synth->add_option("--d", synth_args.d, "embedding dim"), &synth_args.d, "d");
  overlay.reg(synth->add_option("--videos", synth_args.videos, "video count"),
              &synth_args.videos, "videos");
  overlay.reg(synth->add_option("--windows", synth_args.windows, "windows per video"),
              &synth_args.windows, "windows");
  overlay.reg(synth->add_option("--sep", synth_args.sep, "class mean separation"),
              &synth_args.sep, "sep");
  overlay.reg(synth->add_option("--test-fraction", synth_args.test_fraction,
                                "fraction of videos in the test split"),
              &synth_args.test_fraction, "test-fraction");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a head on embeddings");
  train_cmd->fallthrough();
  train_args.data.add(train_cmd, overlay);
  overlay.reg(train_cmd->add_option("--n-h", train_args.n_h, "feature-map blocks"),
              &train_args.n_h, "n-h");
  overlay.reg(train_cmd->add_option("--n-c", train_args.n_c, "classifier hidden layers"),
              &train_args.n_c, "n-c");
  overlay.reg(train_cmd->add_option("--scale", train_args.scale, "width shrink factor"),
              &train_args.scale, "scale");
  overlay.reg(train_cmd->add_flag("--global-residual", train_args.global_residual,
                                  "extra skip from head input to block output"),
              &train_args.global_residual, "global-residual");
  overlay.reg(train_cmd->add_option("--margin", train_args.margin, "contrastive margin"),
              &train_args.margin, "margin");
  overlay.reg(train_cmd->add_option("--pair-weight", train_args.pair_weight,
                                    "contrastive term weight"),
              &train_args.pair_weight, "pair-weight");
  overlay.reg(train_cmd->add_option("--weight-decay", train_args.weight_decay,
                                    "L2 coefficient on weights"),
              &train_args.weight_decay, "weight-decay");
  overlay.reg(train_cmd->add_option("--lr", train_args.lr, "learning rate"),
              &train_args.lr, "lr");
  overlay.reg(train_cmd->add_option("--batch-size", train_args.batch_size, "batch size"),
              &train_args.batch_size, "batch-size");
  overlay.reg(train_cmd->add_option("--epochs", train_args.epochs, "max epochs"),
              &train_args.epochs, "epochs");
  overlay.reg(train_cmd->add_option("--pairs-per-batch", train_args.pairs_per_batch,
                                    "contrastive pairs per batch"),
              &train_args.pairs_per_batch, "pairs-per-batch");
  overlay.reg(train_cmd->add_option("--optimizer", train_args.optimizer, "sgd|adam"),
              &train_args.optimizer, "optimizer");
  overlay.reg(train_cmd->add_option("--patience", train_args.patience,
                                    "early-stop patience (<=0 disables)"),
              &train_args.patience, "patience");
  overlay.reg(train_cmd->add_option("--val-fraction", train_args.val_fraction,
                                    "fraction of training videos held out"),
              &train_args.val_fraction, "val-fraction");
  overlay.reg(train_cmd->add_option("--min-coverage", train_args.min_coverage,
                                    "window label coverage threshold"),
              &train_args.min_coverage, "min-coverage");
  overlay.reg(train_cmd->add_option("--pool", train_args.pool, "mean|max"),
              &train_args.pool, "pool");
  overlay.reg(train_cmd->add_option("--rule", train_args.rule,
                                    "nearest-center|latest-window"),
              &train_args.rule, "rule");
  overlay.reg(train_cmd->add_option("--count-mode", train_args.count_mode,
                                    "all|annotated"),
              &train_args.count_mode, "count-mode");

  TuneArgs tune_args;
  auto* tune_cmd = app.add_subcommand("tune", "ASHA hyperparameter search");
  tune_cmd->fallthrough();
  tune_args.data.add(tune_cmd, overlay);
  overlay.reg(tune_cmd->add_option("--budget", tune_args.budget, "max trials"),
              &tune_args.budget, "budget");
  overlay.reg(tune_cmd->add_option("--eta", tune_args.eta, "reduction factor"),
              &tune_args.eta, "eta");
  overlay.reg(tune_cmd->add_option("--r-min", tune_args.r_min, "first rung epochs"),
              &tune_args.r_min, "r-min");
  overlay.reg(tune_cmd->add_option("--r-max", tune_args.r_max, "max epochs per trial"),
              &tune_args.r_max, "r-max");
  overlay.reg(tune_cmd->add_option("--parallel", tune_args.parallel, "worker threads"),
              &tune_args.parallel, "parallel");
  overlay.reg(tune_cmd->add_flag("--resume", tune_args.resume,
                                 "resume from an existing ledger"),
              &tune_args.resume, "resume");
  overlay.reg(tune_cmd->add_option("--val-fraction", tune_args.val_fraction,
                                   "fraction of training videos held out"),
              &tune_args.val_fraction, "val-fraction");
  overlay.reg(tune_cmd->add_option("--min-coverage", tune_args.min_coverage,
                                   "window label coverage threshold"),
              &tune_args.min_coverage, "min-coverage");
  overlay.reg(tune_cmd->add_option("--pool", tune_args.pool, "mean|max"),
              &tune_args.pool, "pool");
  overlay.reg(tune_cmd->add_option("--pairs-per-batch", tune_args.pairs_per_batch,
                                   "contrastive pairs per batch"),
              &tune_args.pairs_per_batch, "pairs-per-batch");

  LdaArgs lda_args;
  auto* lda_cmd = app.add_subcommand("lda", "embedding separability analysis");
  lda_cmd->fallthrough();
  lda_args.data.add(lda_cmd, overlay);
  overlay.reg(lda_cmd->add_option("--split", lda_args.split, "train|test|all"),
              &lda_args.split, "split");
  overlay.reg(lda_cmd->add_option("--ridge", lda_args.ridge,
                                  "ridge on S_W (negative -> auto)"),
              &lda_args.ridge, "ridge");
  overlay.reg(lda_cmd->add_option("--min-coverage", lda_args.min_coverage,
                                  "window label coverage threshold"),
              &lda_args.min_coverage, "min-coverage");
  overlay.reg(lda_cmd->add_option("--pool", lda_args.pool, "mean|max"),
              &lda_args.pool, "pool");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "score window predictions");
  eval_cmd->fallthrough();
  eval_args.data.add(eval_cmd, overlay);
  overlay.reg(eval_cmd->add_option("--predictions", eval_args.predictions,
                                   "predictions.jsonl"),
              &eval_args.predictions, "predictions");
  overlay.reg(eval_cmd->add_option("--split", eval_args.split, "train|test|all"),
              &eval_args.split, "split");
  overlay.reg(eval_cmd->add_option("--rule", eval_args.rule,
                                   "nearest-center|latest-window"),
              &eval_args.rule, "rule");
  overlay.reg(eval_cmd->add_option("--count-mode", eval_args.count_mode, "all|annotated"),
              &eval_args.count_mode, "count-mode");
  overlay.reg(eval_cmd->add_option("--aggregate", eval_args.aggregate,
                                   "report.json files to aggregate as mean(std)"),
              &eval_args.aggregate, "aggregate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (!config_path.empty()) overlay.load(config_path);
    overlay.apply();

    if (synth->parsed()) return run_synth(synth_args, seed, out_dir);
    if (train_cmd->parsed()) {
      if (train_args.data.manifest.empty())
        fail(Errc::invalid_argument, "train needs --manifest");
      return run_train(train_args, seed, out_dir);
    }
    if (tune_cmd->parsed()) {
      if (tune_args.data.manifest.empty())
        fail(Errc::invalid_argument, "tune needs --manifest");
      return run_tune(tune_args, seed, out_dir);
    }
    if (lda_cmd->parsed()) {
      if (lda_args.data.manifest.empty())
        fail(Errc::invalid_argument, "lda needs --manifest");
      return run_lda(lda_args, seed, out_dir);
    }
    if (eval_cmd->parsed()) {
      if (eval_args.aggregate.empty() && eval_args.data.manifest.empty())
        fail(Errc::invalid_argument, "eval needs --manifest");
      return run_eval(eval_args, seed, out_dir);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace movekit
