#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "movekit/cli.hpp"
#include "support/quiet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("movekit_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str(const std::string& sub) const { return (path / sub).string(); }
};

int run(const std::vector<std::string>& args) {
  std::vector<std::string> full = {"movekit"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& s : full) argv.push_back(s.c_str());
  movekit::testsupport::QuietStdout quiet;
  return movekit::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_json(const fs::path& p) {
  json j;
  std::ifstream in(p);
  in >> j;
  return j;
}

// tiny synthetic dataset most subcommand tests share
void make_dataset(const TempDir& dir, const std::string& sep = "8",
                  const std::string& classes = "4") {
  REQUIRE(run({"synth", "--classes", classes, "--d", "8", "--videos", "6", "--windows",
               "8", "--sep", sep, "--seed", "5", "--out-dir", dir.path.string()}) == 0);
}

}  // namespace

TEST_CASE("cli synth: loadable output, deterministic files, validation") {
  TempDir a, b;
  make_dataset(a);
  CHECK(fs::exists(a.path / "manifest.json"));
  CHECK(fs::exists(a.path / "annotations.csv"));
  CHECK(fs::exists(a.path / "split.txt"));

  make_dataset(b);
  CHECK(slurp(a.path / "manifest.json") == slurp(b.path / "manifest.json"));
  CHECK(slurp(a.path / "annotations.csv") == slurp(b.path / "annotations.csv"));
  CHECK(slurp(a.path / "synth_000.emb") == slurp(b.path / "synth_000.emb"));

  // class cap produces a usage error
  TempDir c;
  CHECK(run({"synth", "--classes", "5", "--out-dir", c.path.string()}) == 2);
}

TEST_CASE("cli: exit codes for usage, data, and numerical errors") {
  CHECK(run({"definitely-not-a-subcommand"}) == 2);
  CHECK(run({"train", "--no-such-flag"}) == 2);
  TempDir dir;
  CHECK(run({"train", "--manifest", dir.str("missing.json"), "--out-dir",
             dir.str("out")}) == 3);
  CHECK(run({"train", "--out-dir", dir.str("out")}) == 2);  // manifest required

  make_dataset(dir);
  CHECK(run({"train", "--manifest", dir.str("manifest.json"), "--annotations",
             dir.str("annotations.csv"), "--optimizer", "sgd", "--lr", "1e200",
             "--weight-decay", "1", "--epochs", "3", "--seed", "1", "--out-dir",
             dir.str("blowup")}) == 4);  // diverged loss
}

TEST_CASE("cli train: checkpoint, report, determinism") {
  TempDir dir;
  make_dataset(dir);
  auto common = std::vector<std::string>{
      "train",           "--manifest",    dir.str("manifest.json"),
      "--annotations",   dir.str("annotations.csv"),
      "--split-file",    dir.str("split.txt"),
      "--epochs",        "4",
      "--batch-size",    "16",
      "--lr",            "0.003",
      "--seed",          "9"};

  auto run1 = common;
  run1.push_back("--out-dir");
  run1.push_back(dir.str("run1"));
  REQUIRE(run(run1) == 0);
  CHECK(fs::exists(dir.path / "run1" / "checkpoint.mkc"));
  CHECK(fs::exists(dir.path / "run1" / "predictions_test.jsonl"));

  auto rep = load_json(dir.path / "run1" / "report.json");
  CHECK(rep.at("config").at("lr").get<double>() == 0.003);
  CHECK(rep.at("config").at("seed").get<int>() == 9);
  CHECK(rep.at("history").size() == 4);
  CHECK(rep.contains("frame_test"));
  CHECK(rep.at("frame_test").at("std_normalization") == "population");

  auto run2 = common;
  run2.push_back("--out-dir");
  run2.push_back(dir.str("run2"));
  REQUIRE(run(run2) == 0);
  CHECK(slurp(dir.path / "run1" / "checkpoint.mkc") ==
        slurp(dir.path / "run2" / "checkpoint.mkc"));
  auto rep2 = load_json(dir.path / "run2" / "report.json");
  CHECK(rep.at("history") == rep2.at("history"));
}

TEST_CASE("cli train + eval: predictions round through the scorer") {
  TempDir dir;
  make_dataset(dir);
  REQUIRE(run({"train", "--manifest", dir.str("manifest.json"), "--annotations",
               dir.str("annotations.csv"), "--split-file", dir.str("split.txt"),
               "--epochs", "6", "--batch-size", "16", "--lr", "0.003", "--seed", "3",
               "--out-dir", dir.str("model")}) == 0);

  REQUIRE(run({"eval", "--manifest", dir.str("manifest.json"), "--annotations",
               dir.str("annotations.csv"), "--split-file", dir.str("split.txt"),
               "--predictions", dir.str("model/predictions_test.jsonl"), "--split",
               "test", "--out-dir", dir.str("scored")}) == 0);

  auto rep = load_json(dir.path / "scored" / "report.json");
  double overall = rep.at("overall").get<double>();
  CHECK(overall >= 0.0);
  CHECK(overall <= 1.0);
  // the train report's frame_test must agree with the standalone scorer
  auto trep = load_json(dir.path / "model" / "report.json");
  CHECK(trep.at("frame_test").at("overall").get<double>() ==
        doctest::Approx(overall));
}

TEST_CASE("cli eval: decoder-format predictions are parsed and scored") {
  TempDir dir;
  make_dataset(dir);

  // predictions in the fine-tuned decoder's answer format on video synth_000
  std::ofstream preds(dir.str("decoder.jsonl"));
  for (int w = 0; w < 8; ++w) {
    json rec = {{"video_id", "synth_000"},
                {"start_sec", 10.0 * w},
                {"end_sec", 10.0 * w + 10.0},
                {"raw_text", w == 3 ? std::string("mumbling, no answer")
                                    : std::string("Analyzing this video this is the "
                                                  "Move :: powermove")}};
    preds << rec.dump() << "\n";
  }
  preds.close();

  REQUIRE(run({"eval", "--manifest", dir.str("manifest.json"), "--annotations",
               dir.str("annotations.csv"), "--predictions", dir.str("decoder.jsonl"),
               "--split", "all", "--out-dir", dir.str("scored")}) == 0);
  auto rep = load_json(dir.path / "scored" / "report.json");
  CHECK(rep.at("parse_failures").get<int>() == 1);
  CHECK(rep.at("num_videos").get<int>() == 1);  // only the predicted video scored
}

TEST_CASE("cli eval --aggregate: mean(std) table") {
  TempDir dir;
  for (int i = 0; i < 3; ++i) {
    json j = {{"overall", 0.60 + 0.02 * i}, {"per_video_mean", 0.55 + 0.02 * i}};
    std::ofstream(dir.str("r" + std::to_string(i) + ".json")) << j.dump();
  }
  REQUIRE(run({"eval", "--aggregate", dir.str("r0.json"), dir.str("r1.json"),
               dir.str("r2.json"), "--out-dir", dir.str("agg")}) == 0);
  auto rep = load_json(dir.path / "agg" / "aggregate.json");
  CHECK(rep.at("overall") == "62.00(1.63)");
  CHECK(rep.at("per_video_mean") == "57.00(1.63)");
}

TEST_CASE("cli tune: single-trial budget, ledger, resume appends") {
  TempDir dir;
  make_dataset(dir);
  auto base = std::vector<std::string>{
      "tune",        "--manifest", dir.str("manifest.json"),
      "--annotations", dir.str("annotations.csv"),
      "--r-min",     "1",          "--r-max",
      "4",           "--eta",      "4",
      "--seed",      "12",         "--out-dir",
      dir.str("tune")};

  auto one = base;
  one.push_back("--budget");
  one.push_back("1");
  REQUIRE(run(one) == 0);
  CHECK(fs::exists(dir.path / "tune" / "ledger.jsonl"));
  CHECK(fs::exists(dir.path / "tune" / "best_checkpoint.mkc"));

  std::set<int> trial_ids;
  std::ifstream ledger(dir.str("tune/ledger.jsonl"));
  std::string line;
  std::size_t first_lines = 0;
  while (std::getline(ledger, line)) {
    if (line.empty()) continue;
    ++first_lines;
    trial_ids.insert(json::parse(line).at("trial").get<int>());
  }
  CHECK(trial_ids.size() == 1);

  // resume with a larger budget: old events stay, new ones append
  std::string before = slurp(dir.path / "tune" / "ledger.jsonl");
  auto more = base;
  more.insert(more.end(), {"--budget", "3", "--resume"});
  REQUIRE(run(more) == 0);
  std::string after = slurp(dir.path / "tune" / "ledger.jsonl");
  CHECK(after.size() > before.size());
  CHECK(after.substr(0, before.size()) == before);
}

TEST_CASE("cli tune: parallel search self-check against the ledger") {
  TempDir dir;
  make_dataset(dir);
  REQUIRE(run({"tune", "--manifest", dir.str("manifest.json"), "--annotations",
               dir.str("annotations.csv"), "--budget", "6", "--r-min", "1", "--r-max",
               "4", "--eta", "4", "--parallel", "4", "--seed", "2", "--out-dir",
               dir.str("tune")}) == 0);

  auto rep = load_json(dir.path / "tune" / "tune_report.json");
  double best = rep.at("best_objective").get<double>();

  std::vector<double> first_rung;
  std::ifstream ledger(dir.str("tune/ledger.jsonl"));
  std::string line;
  while (std::getline(ledger, line)) {
    if (line.empty()) continue;
    json e = json::parse(line);
    if (e.at("event") == "report" && e.at("rung").get<int>() == 1)
      first_rung.push_back(e.at("objective").get<double>());
  }
  REQUIRE(!first_rung.empty());
  std::sort(first_rung.begin(), first_rung.end());
  double median = first_rung[first_rung.size() / 2];
  CHECK(best >= median);
}

TEST_CASE("cli lda: separability tracks class separation; flags honored") {
  TempDir d1, d2, d3;
  make_dataset(d1, "1");
  make_dataset(d2, "2");
  make_dataset(d3, "4");
  double j1[3];
  const TempDir* dirs[3] = {&d1, &d2, &d3};
  for (int i = 0; i < 3; ++i) {
    REQUIRE(run({"lda", "--manifest", dirs[i]->str("manifest.json"), "--annotations",
                 dirs[i]->str("annotations.csv"), "--split", "all", "--out-dir",
                 dirs[i]->str("lda")}) == 0);
    auto rep = load_json(dirs[i]->path / "lda" / "lda_report.json");
    j1[i] = rep.at("j1").get<double>();
    CHECK(rep.at("j2_defined").get<bool>());
    CHECK(fs::exists(dirs[i]->path / "lda" / "projection.csv"));
  }
  CHECK(j1[0] < j1[1]);
  CHECK(j1[1] < j1[2]);

  // two-class data: J2 flagged undefined
  TempDir d2c;
  make_dataset(d2c, "6", "2");
  REQUIRE(run({"lda", "--manifest", d2c.str("manifest.json"), "--annotations",
               d2c.str("annotations.csv"), "--split", "all", "--out-dir",
               d2c.str("lda")}) == 0);
  CHECK(load_json(d2c.path / "lda" / "lda_report.json").at("j2_defined") == false);

  // split=train vs split=all differ in scored window counts
  REQUIRE(run({"lda", "--manifest", d1.str("manifest.json"), "--annotations",
               d1.str("annotations.csv"), "--split-file", d1.str("split.txt"),
               "--split", "train", "--out-dir", d1.str("lda_train")}) == 0);
  auto all_rep = load_json(d1.path / "lda" / "lda_report.json");
  auto train_rep = load_json(d1.path / "lda_train" / "lda_report.json");
  CHECK(train_rep.at("windows").get<int>() < all_rep.at("windows").get<int>());
}

TEST_CASE("cli --config overlay: file supplies defaults, flags win") {
  TempDir dir;
  make_dataset(dir);
  std::ofstream(dir.str("conf.json"))
      << R"({"epochs": 2, "lr": 0.001, "batch-size": 16})";

  REQUIRE(run({"train", "--manifest", dir.str("manifest.json"), "--annotations",
               dir.str("annotations.csv"), "--config", dir.str("conf.json"),
               "--seed", "4", "--out-dir", dir.str("a")}) == 0);
  CHECK(load_json(dir.path / "a" / "report.json").at("history").size() == 2);

  REQUIRE(run({"train", "--manifest", dir.str("manifest.json"), "--annotations",
               dir.str("annotations.csv"), "--config", dir.str("conf.json"),
               "--epochs", "1", "--seed", "4", "--out-dir", dir.str("b")}) == 0);
  CHECK(load_json(dir.path / "b" / "report.json").at("history").size() == 1);

  std::ofstream(dir.str("bad.json")) << R"({"no-such-option": 1})";
  CHECK(run({"train", "--manifest", dir.str("manifest.json"), "--annotations",
             dir.str("annotations.csv"), "--config", dir.str("bad.json"),
             "--out-dir", dir.str("c")}) == 2);
}
