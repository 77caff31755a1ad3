#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <srlp/events.hpp>
#include <srlp/predictions.hpp>
#include <srlp/returns.hpp>

#include "cli.hpp"
#include "manifest.hpp"
#include "testkit.hpp"

namespace fs = std::filesystem;
using namespace srlp;

namespace {

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome srlp_run(std::vector<std::string> args) {
  args.insert(args.begin(), "srlp");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(testkit::read_file(p)); }

const fs::path kEvents10 = testkit::data_dir() / "events10";
const fs::path kBacktest60 = testkit::data_dir() / "backtest60";

// A small labeled corpus split on disk, ready for `train`.
fs::path prepared_split(const std::string& name) {
  const auto dir = testkit::temp_dir(name);
  testkit::SyntheticOptions o;
  o.events = 120;
  o.d_tok = 4;
  o.max_frames = 3;
  const auto corpus = testkit::make_synthetic_corpus(o);
  write_events_jsonl(dir / "events.jsonl", corpus);
  write_embeddings(dir / "events.emb", corpus, o.d_tok);
  const auto r = srlp_run({"split", "--events", (dir / "events.jsonl").string(), "--embeddings",
                           (dir / "events.emb").string(), "--seed", "3", "--out", (dir / "split").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  return dir;
}

std::vector<std::string> tiny_train_args(const fs::path& data, const fs::path& out) {
  return {"train", "--data", data.string(), "--out", out.string(), "--epochs", "2", "--set", "model.d_model=8",
          "--set", "model.n_heads=2", "--set", "model.n_layers=1", "--set", "model.ffn_ratio=2"};
}

}  // namespace

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = srlp_run({"train", "--bogus", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("\"Usage\""), std::string::npos);
  EXPECT_EQ(srlp_run({}).code, 2);
  EXPECT_EQ(srlp_run({"frobnicate"}).code, 2);
}

TEST(Cli, HelpExitsZero) {
  const auto r = srlp_run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("backtest"), std::string::npos);
}

TEST(Cli, ValidationFailureWritesErrorRecord) {
  const auto dir = testkit::temp_dir("cli_bad_events");
  {
    std::ofstream f(dir / "bad.jsonl");
    f << "{\"event_id\": \"E1\"}\n";
  }
  const auto r = srlp_run({"validate", "--events", (dir / "bad.jsonl").string(), "--out", dir.string()});
  EXPECT_EQ(r.code, 1);
  const auto line = r.err.substr(r.err.rfind('{', r.err.find("\"error\"")));
  const auto j = nlohmann::json::parse(line.substr(0, line.find('\n')));
  EXPECT_EQ(j["error"]["command"], "validate");
  EXPECT_FALSE(j["error"]["code"].get<std::string>().empty());
  EXPECT_NE(j["error"]["message"].get<std::string>().find("bad.jsonl"), std::string::npos);
}

TEST(Cli, ValidateFixture) {
  const auto out = testkit::temp_dir("cli_validate");
  const auto r = srlp_run({"validate", "--events", (kEvents10 / "events.jsonl").string(), "--embeddings",
                           (kEvents10 / "embeddings.bin").string(), "--prices", (kBacktest60 / "prices").string(),
                           "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read_json(out / "validation.json");
  EXPECT_EQ(j["events"], 10);
  EXPECT_EQ(j["d_tok"], 4);
  EXPECT_EQ(j["events_without_price_series"], 0);
}

TEST(Cli, LabelMatchesOracleOnTenEventFixture) {
  const auto out = testkit::temp_dir("cli_label");
  const auto r = srlp_run({"label", "--events", (kEvents10 / "events.jsonl").string(), "--prices",
                           (kBacktest60 / "prices").string(), "--a", "20", "--b", "40", "--c", "60", "--d", "20",
                           "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;

  // Oracle: returns straight from the price files, then sort-and-slice.
  Corpus corpus = read_events_jsonl(kEvents10 / "events.jsonl");
  const SessionClock clock;
  const auto prices = load_price_dir(kBacktest60 / "prices", clock);
  for (auto& e : corpus) e.return_rate = compute_return(e, prices.at(e.stock_id), ReturnHorizon::next_close(), clock);
  const auto expected = testkit::label_oracle(corpus, LabelThresholds{});

  const auto labeled = read_events_jsonl(out / "labeled.jsonl");
  ASSERT_EQ(labeled.size(), expected.size());
  for (const auto& e : labeled) {
    ASSERT_TRUE(e.label.has_value());
    EXPECT_EQ(*e.label, expected.at(e.event_id)) << e.event_id;
  }
  const auto report = read_json(out / "labels.json");
  EXPECT_EQ(report["total_priced"], 10);
  EXPECT_EQ(report["excluded"].size(), 10 - expected.size());
}

TEST(Cli, LabelCarriesEmbeddingsAlong) {
  const auto out = testkit::temp_dir("cli_label_emb");
  const auto r = srlp_run({"label", "--events", (kEvents10 / "events.jsonl").string(), "--embeddings",
                           (kEvents10 / "embeddings.bin").string(), "--prices", (kBacktest60 / "prices").string(),
                           "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto corpus = parse_events(out / "labeled.jsonl", out / "labeled.emb");
  EXPECT_FALSE(corpus.empty());
  EXPECT_EQ(embedding_dim(corpus), 4u);
}

TEST(Cli, SplitOutOfDistributionKeepsValidationBeforeCutoff) {
  const auto dir = testkit::temp_dir("cli_ood");
  testkit::SyntheticOptions o;
  o.events = 60;
  o.d_tok = 4;
  const auto corpus = testkit::make_synthetic_corpus(o);
  write_events_jsonl(dir / "events.jsonl", corpus);
  const auto cutoff = corpus[40].published_at;
  const auto r = srlp_run({"split", "--events", (dir / "events.jsonl").string(), "--scheme", "ood", "--cutoff",
                           cutoff.to_string(), "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto train = read_events_jsonl(dir / "out" / "train.jsonl");
  const auto val = read_events_jsonl(dir / "out" / "validation.jsonl");
  const auto test = read_events_jsonl(dir / "out" / "test.jsonl");
  EXPECT_EQ(train.size() + val.size(), 40u);
  EXPECT_EQ(val.size(), 4u);
  EXPECT_EQ(test.size(), 20u);
  for (const auto& e : val) EXPECT_LT(e.published_at, cutoff);
  for (const auto& e : train) EXPECT_LE(e.published_at, val.front().published_at);
  for (const auto& e : test) EXPECT_GE(e.published_at, cutoff);
}

TEST(Cli, TrainTwiceGivesIdenticalCheckpointDigests) {
  const auto dir = prepared_split("cli_train_det");
  auto a = tiny_train_args(dir / "split", dir / "a");
  a.insert(a.end(), {"--seed", "7"});
  auto b = tiny_train_args(dir / "split", dir / "b");
  b.insert(b.end(), {"--seed", "7"});
  ASSERT_EQ(srlp_run(a).code, 0);
  ASSERT_EQ(srlp_run(b).code, 0);
  EXPECT_EQ(cli::sha256_file(dir / "a" / "checkpoint.srlp"), cli::sha256_file(dir / "b" / "checkpoint.srlp"));
  EXPECT_EQ(testkit::read_file(dir / "a" / "training_log.jsonl"), testkit::read_file(dir / "b" / "training_log.jsonl"));
  const auto ma = read_json(dir / "a" / "train.manifest.json");
  const auto mb = read_json(dir / "b" / "train.manifest.json");
  EXPECT_EQ(ma["outputs"][0]["sha256"], mb["outputs"][0]["sha256"]);
  EXPECT_EQ(ma["seed"], 7);
}

TEST(Cli, ConfigPrecedenceFlagsOverFileOverDefaults) {
  const auto dir = prepared_split("cli_precedence");
  {
    std::ofstream f(dir / "run.toml");
    f << "# experiment\nseed = 11\n[train]\nepochs = 1\nalpha = 0.5\n[model]\nd_model = 8\nn_heads = 2\n"
         "n_layers = 1\nffn_ratio = 2\n";
  }
  const auto r = srlp_run({"--config", (dir / "run.toml").string(), "train", "--data", (dir / "split").string(),
                           "--alpha", "0.9", "--out", (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = read_json(dir / "o" / "train.manifest.json");
  EXPECT_EQ(m["config"]["train.alpha"], "0.9");           // flag
  EXPECT_EQ(m["config"]["train.epochs"], "1");            // file
  EXPECT_EQ(m["config"]["train.seed"], "11");             // file, top-level seed
  EXPECT_EQ(m["config"]["train.batch_size"], "16");       // default
  EXPECT_EQ(m["config"]["train.mask_roles"], "v");        // default
  const auto log = testkit::read_file(dir / "o" / "training_log.jsonl");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n') > 0, true);
}

TEST(Cli, UnknownConfigKeyIsAnError) {
  const auto dir = testkit::temp_dir("cli_bad_config");
  {
    std::ofstream f(dir / "run.toml");
    f << "[train]\nalhpa = 0.5\n";
  }
  const auto r = srlp_run({"--config", (dir / "run.toml").string(), "train", "--data", dir.string(), "--out",
                           dir.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("train.alhpa"), std::string::npos);
}

TEST(Cli, ManifestDigestsVerifyAndInputsAreUntouched) {
  const auto dir = prepared_split("cli_manifest");
  const auto before = cli::sha256_file(dir / "split" / "train.jsonl");
  ASSERT_EQ(srlp_run(tiny_train_args(dir / "split", dir / "m")).code, 0);
  EXPECT_EQ(cli::sha256_file(dir / "split" / "train.jsonl"), before);
  const auto m = read_json(dir / "m" / "train.manifest.json");
  EXPECT_EQ(m["command"], "train");
  EXPECT_FALSE(m["argv"].empty());
  EXPECT_TRUE(m["timing"].contains("elapsed_seconds"));
  ASSERT_EQ(m["inputs"].size(), 4u);
  for (const auto& section : {"inputs", "outputs"}) {
    for (const auto& f : m[section]) EXPECT_EQ(cli::sha256_file(f["path"].get<std::string>()), f["sha256"]);
  }
  std::set<std::string> outputs;
  for (const auto& f : m["outputs"]) outputs.insert(fs::path(f["path"].get<std::string>()).filename().string());
  for (const auto& entry : fs::directory_iterator(dir / "m")) {
    const auto name = entry.path().filename().string();
    if (name != "train.manifest.json") EXPECT_TRUE(outputs.contains(name)) << name;
  }
}

TEST(Cli, EvalAndPredictFromTrainedCheckpoint) {
  const auto dir = prepared_split("cli_eval");
  ASSERT_EQ(srlp_run(tiny_train_args(dir / "split", dir / "t")).code, 0);
  const auto ckpt = (dir / "t" / "checkpoint.srlp").string();
  const auto test_events = (dir / "split" / "test.jsonl").string();
  const auto test_emb = (dir / "split" / "test.emb").string();
  const auto e = srlp_run({"eval", "--checkpoint", ckpt, "--events", test_events, "--embeddings", test_emb, "--out",
                           (dir / "e").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto report = read_json(dir / "e" / "eval.json");
  EXPECT_EQ(report["total"], 12);
  const auto p = srlp_run({"predict", "--checkpoint", ckpt, "--events", test_events, "--embeddings", test_emb,
                           "--out", (dir / "p").string(), "--dump-matrix", (dir / "p" / "matrix.csv").string()});
  ASSERT_EQ(p.code, 0) << p.err;
  const auto rows = read_predictions_csv(dir / "p" / "predictions.csv");
  EXPECT_EQ(rows.size(), 12u);
  for (const auto& row : rows) EXPECT_NEAR(row.probabilities[0] + row.probabilities[1] + row.probabilities[2], 1.0, 1e-9);
  EXPECT_FALSE(testkit::read_file(dir / "p" / "matrix.csv").empty());
  const auto again = srlp_run({"predict", "--checkpoint", ckpt, "--events", test_events, "--embeddings", test_emb,
                               "--out", (dir / "p2").string()});
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(testkit::read_file(dir / "p" / "predictions.csv"), testkit::read_file(dir / "p2" / "predictions.csv"));
}

TEST(Cli, EvalRejectsMismatchedData) {
  const auto dir = prepared_split("cli_eval_mismatch");
  ASSERT_EQ(srlp_run(tiny_train_args(dir / "split", dir / "t")).code, 0);
  const auto r = srlp_run({"eval", "--checkpoint", (dir / "t" / "checkpoint.srlp").string(), "--events",
                           (kEvents10 / "events.jsonl").string(), "--embeddings",
                           (kEvents10 / "embeddings.bin").string(), "--out", (dir / "x").string()});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, BacktestWithEmptyPredictionsIsFlat) {
  const auto dir = testkit::temp_dir("cli_empty_backtest");
  {
    std::ofstream f(dir / "empty.csv");
    write_predictions_csv(f, {});
  }
  const auto r = srlp_run({"backtest", "--predictions", (dir / "empty.csv").string(), "--prices",
                           (kBacktest60 / "prices").string(), "--out", (dir / "bt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(testkit::read_file(dir / "bt" / "backtest_report.csv"),
            "series,annualized_return,max_drawdown,sharpe\nstrategy,0,0,nan\n");
  const auto equity = testkit::read_file(dir / "bt" / "equity.csv");
  EXPECT_EQ(std::count(equity.begin(), equity.end(), '\n'), 61);
}

TEST(Cli, BacktestAndReportReproduceGoldenFixture) {
  const auto dir = testkit::temp_dir("cli_report");
  const auto csi = (kBacktest60 / "indices" / "CSI300.csv").string();
  const auto xin = (kBacktest60 / "indices" / "XIN9.csv").string();
  const auto bt = srlp_run({"backtest", "--predictions", (kBacktest60 / "predictions.csv").string(), "--prices",
                            (kBacktest60 / "prices").string(), "--index", csi, "--index", xin, "--out",
                            (dir / "bt").string()});
  ASSERT_EQ(bt.code, 0) << bt.err;
  EXPECT_EQ(testkit::read_file(dir / "bt" / "equity.csv"), testkit::read_file(kBacktest60 / "golden" / "equity.csv"));

  for (const auto* name : {"r1", "r2"}) {
    const auto r = srlp_run({"report", "--run", (dir / "bt").string(), "--index", csi, "--index", xin, "--out",
                             (dir / name).string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("XIN9"), std::string::npos);
  }
  const auto golden = testkit::read_file(kBacktest60 / "golden" / "report.csv");
  EXPECT_EQ(testkit::read_file(dir / "r1" / "report.csv"), golden);
  EXPECT_EQ(testkit::read_file(dir / "bt" / "backtest_report.csv"), golden);
  EXPECT_EQ(testkit::read_file(dir / "r1" / "report.jsonl"), testkit::read_file(kBacktest60 / "golden" / "report.jsonl"));
  EXPECT_EQ(testkit::read_file(dir / "r1" / "chart.svg"), testkit::read_file(kBacktest60 / "golden" / "chart.svg"));
  for (const auto* f : {"report.csv", "report.jsonl", "chart.svg", "summary.txt"}) {
    EXPECT_EQ(testkit::read_file(dir / "r1" / f), testkit::read_file(dir / "r2" / f)) << f;
  }
}

TEST(Cli, ReportNamesMissingArtifact) {
  const auto dir = testkit::temp_dir("cli_report_missing");
  const auto r = srlp_run({"report", "--run", dir.string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("equity.csv"), std::string::npos);
}

TEST(Cli, StrategyFlagsReachTheSimulation) {
  const auto dir = testkit::temp_dir("cli_strategy_flags");
  const auto r = srlp_run({"backtest", "--predictions", (kBacktest60 / "predictions.csv").string(), "--prices",
                           (kBacktest60 / "prices").string(), "--allow-short", "--cost-bps", "25", "--max-positions",
                           "2", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = read_json(dir / "backtest.manifest.json");
  EXPECT_EQ(m["config"]["strategy.allow_short"], "true");
  EXPECT_EQ(m["config"]["strategy.cost_bps"], "25");
  EXPECT_EQ(m["config"]["strategy.max_positions"], "2");
  EXPECT_NE(testkit::read_file(dir / "trades.csv").find("short"), std::string::npos);
}
