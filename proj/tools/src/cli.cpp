#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <srlp/backtest.hpp>
#include <srlp/dataset.hpp>
#include <srlp/error.hpp>
#include <srlp/events.hpp>
#include <srlp/performance.hpp>
#include <srlp/prices.hpp>
#include <srlp/report.hpp>
#include <srlp/returns.hpp>
#include <srlp/trainer.hpp>

#include "config.hpp"
#include "manifest.hpp"

namespace srlp::cli {
namespace {

namespace fs = std::filesystem;

struct Global {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::vector<std::string> sets;
  Settings flags;  // subcommand flags, already keyed
};

struct Inputs {
  std::string events, embeddings, prices, predictions, checkpoint, data, run, dump_matrix;
  std::vector<std::string> indices;
};

void configure_logging() {
  static const auto logger = [] {
    auto l = spdlog::stderr_color_mt("srlp");
    spdlog::set_default_logger(l);
    return l;
  }();
  const char* level = std::getenv("SRLP_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

Settings effective_settings(const Global& g) {
  Settings s = default_settings();
  if (!g.config.empty()) merge_settings(s, load_config(g.config), g.config);
  Settings flags = g.flags;
  if (g.seed) {
    flags["train.seed"] = std::to_string(*g.seed);
    flags["split.seed"] = std::to_string(*g.seed);
  }
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorCode::InvalidArgument, fmt::format("--set expects key=value, got '{}'", kv));
    flags[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  merge_settings(s, flags, "command line");
  return s;
}

Settings section(const Settings& s, std::initializer_list<std::string_view> prefixes) {
  Settings out;
  for (const auto& [k, v] : s) {
    for (const auto p : prefixes) {
      if (k.rfind(p, 0) == 0) out[k] = v;
    }
  }
  return out;
}

class Run {
 public:
  Run(std::string command, const std::vector<std::string>& args, const Global& g)
      : manifest_(command, args), command_(std::move(command)), out_(g.out) {
    fs::create_directories(out_);
  }

  RunManifest& manifest() { return manifest_; }

  fs::path output(const std::string& name) {
    const auto p = out_ / name;
    manifest_.add_output(p);
    return p;
  }

  std::ofstream open(const std::string& name) {
    const auto p = output(name);
    std::ofstream f(p, std::ios::binary);
    if (!f) fail(ErrorCode::Io, fmt::format("cannot write {}", p.string()));
    return f;
  }

  void finish() { manifest_.write(out_ / (command_ + ".manifest.json")); }

 private:
  RunManifest manifest_;
  std::string command_;
  fs::path out_;
};

fs::path require_file(const std::string& path, std::string_view what) {
  if (path.empty()) fail(ErrorCode::InvalidArgument, fmt::format("missing {}", what));
  if (!fs::exists(path)) fail(ErrorCode::Io, fmt::format("{} not found: {}", what, path));
  return path;
}

Corpus load_corpus(const Inputs& in, Run& run) {
  run.manifest().add_input(require_file(in.events, "events file"));
  if (in.embeddings.empty()) {
    Corpus c = read_events_jsonl(fs::path(in.events));
    sort_canonical(c);
    return c;
  }
  run.manifest().add_input(require_file(in.embeddings, "embeddings file"));
  return parse_events(in.events, in.embeddings);
}

void write_corpus(Run& run, const std::string& stem, const Corpus& corpus, bool with_embeddings) {
  write_events_jsonl(run.output(stem + ".jsonl"), corpus);
  if (with_embeddings) {
    const std::size_t d = embedding_dim(corpus);
    write_embeddings(run.output(stem + ".emb"), corpus, d);
  }
}

std::map<std::string, PriceSeries> load_prices(const std::string& dir, const SessionClock& clock, Run& run) {
  if (dir.empty()) fail(ErrorCode::InvalidArgument, "missing --prices directory");
  if (!fs::is_directory(dir)) fail(ErrorCode::Io, fmt::format("price directory not found: {}", dir));
  run.manifest().add_input(dir);
  return load_price_dir(dir, clock);
}

DatedSeries load_index(const std::string& path, const SessionClock& clock, Run& run) {
  run.manifest().add_input(require_file(path, "index file"));
  PriceSeries s;
  s.stock_id = fs::path(path).stem().string();
  s.daily_bars = read_bars_csv(fs::path(path), clock);
  return to_series(s.stock_id, s, clock);
}

// --- commands -------------------------------------------------------------------

void cmd_validate(const Inputs& in, const Settings& s, Run& run, std::ostream& out) {
  const Corpus corpus = load_corpus(in, run);
  validate_corpus(corpus, !in.embeddings.empty());
  std::size_t sentences = 0, frames = 0, complete = 0, no_complete = 0, missing = 0, labeled = 0;
  std::set<std::string> stocks;
  for (const auto& e : corpus) {
    sentences += e.sentences.size();
    for (const auto& st : e.sentences) {
      frames += st.frames.size();
      for (const auto& f : st.frames) complete += f.complete() ? 1 : 0;
    }
    if (e.complete_frame_count() == 0) ++no_complete;
    missing += e.factors.missing_count();
    if (e.label) ++labeled;
    stocks.insert(e.stock_id);
  }
  nlohmann::ordered_json j;
  j["events"] = corpus.size();
  j["stocks"] = stocks.size();
  j["sentences"] = sentences;
  j["frames"] = frames;
  j["complete_frames"] = complete;
  j["events_without_complete_frames"] = no_complete;
  j["missing_factor_values"] = missing;
  j["labeled_events"] = labeled;
  j["d_tok"] = embedding_dim(corpus);
  if (!in.prices.empty()) {
    const auto prices = load_prices(in.prices, strategy_config(s).clock, run);
    std::size_t unpriced = 0;
    for (const auto& e : corpus) unpriced += prices.contains(e.stock_id) ? 0 : 1;
    j["price_series"] = prices.size();
    j["events_without_price_series"] = unpriced;
  }
  run.open("validation.json") << j.dump(2) << '\n';
  out << j.dump() << '\n';
}

void cmd_label(const Inputs& in, const Settings& s, Run& run, std::ostream& out) {
  Corpus corpus = load_corpus(in, run);
  const auto thresholds = label_thresholds(s);
  std::vector<SkippedEvent> unpriced;
  Corpus priced;
  if (!in.prices.empty()) {
    const auto clock = strategy_config(s).clock;
    const auto prices = load_prices(in.prices, clock, run);
    const auto horizon = label_horizon(s);
    for (auto& e : corpus) {
      const auto it = prices.find(e.stock_id);
      if (it == prices.end()) {
        unpriced.push_back({e.event_id, "no price series"});
        continue;
      }
      try {
        e.return_rate = compute_return(e, it->second, horizon, clock);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::NoEntryPrice && err.code() != ErrorCode::NoExitPrice) throw;
        unpriced.push_back({e.event_id, err.code() == ErrorCode::NoEntryPrice ? "no entry price" : "no exit price"});
        continue;
      }
      priced.push_back(std::move(e));
    }
  } else {
    for (auto& e : corpus) {
      if (!e.return_rate) fail(ErrorCode::Validation, fmt::format("event '{}' has no return_rate and no --prices given", e.event_id));
      priced.push_back(std::move(e));
    }
  }
  for (const auto& u : unpriced) spdlog::warn("event {} not labeled: {}", u.event_id, u.reason);
  const auto labeled = derive_labels(std::move(priced), thresholds);
  write_corpus(run, "labeled", labeled.events, !in.embeddings.empty());
  {
    auto f = run.open("label_skipped.csv");
    write_skipped_csv(f, unpriced);
  }
  nlohmann::ordered_json j;
  j["total_priced"] = labeled.report.total;
  j["outperforming"] = labeled.report.outperforming;
  j["neutral"] = labeled.report.neutral;
  j["underperforming"] = labeled.report.underperforming;
  j["excluded"] = labeled.report.excluded_ids;
  j["unpriced"] = unpriced.size();
  run.open("labels.json") << j.dump(2) << '\n';
  out << fmt::format("labeled {} of {} events ({} / {} / {}), {} in gaps, {} unpriced\n", labeled.events.size(),
                     corpus.size(), labeled.report.outperforming, labeled.report.neutral,
                     labeled.report.underperforming, labeled.report.excluded_ids.size(), unpriced.size());
}

void cmd_split(const Inputs& in, const Settings& s, Run& run, std::ostream& out) {
  const Corpus corpus = load_corpus(in, run);
  const auto& scheme = s.at("split.scheme");
  DatasetSplit split;
  if (scheme == "in") {
    split = split_dataset(corpus, InDistribution{split_seed(s)});
  } else if (scheme == "ood") {
    if (s.at("split.cutoff").empty()) fail(ErrorCode::InvalidArgument, "ood split needs split.cutoff (--cutoff)");
    split = split_dataset(corpus, OutOfDistribution{Timestamp::parse(s.at("split.cutoff"))});
    // Validation comes from the latest tenth of the pre-cutoff events so model
    // selection never sees post-cutoff data.
    const std::size_t n = split.train.size();
    const std::size_t k = std::max<std::size_t>(1, n / 10);
    if (n < 2) fail(ErrorCode::EmptyPartition, "ood train partition too small to carve a validation split");
    split.validation.assign(split.train.end() - static_cast<std::ptrdiff_t>(k), split.train.end());
    split.train.resize(n - k);
  } else {
    fail(ErrorCode::InvalidArgument, fmt::format("unknown split scheme '{}' (in|ood)", scheme));
  }
  const bool emb = !in.embeddings.empty();
  write_corpus(run, "train", split.train, emb);
  write_corpus(run, "validation", split.validation, emb);
  write_corpus(run, "test", split.test, emb);
  nlohmann::ordered_json j;
  j["scheme"] = scheme;
  j["train"] = split.train.size();
  j["validation"] = split.validation.size();
  j["test"] = split.test.size();
  run.open("split.json") << j.dump(2) << '\n';
  out << j.dump() << '\n';
}

Corpus load_partition(const fs::path& dir, const std::string& name, Run& run) {
  Inputs in;
  in.events = (dir / (name + ".jsonl")).string();
  in.embeddings = (dir / (name + ".emb")).string();
  return load_corpus(in, run);
}

void cmd_train(const Inputs& in, const Settings& s, Run& run, std::ostream& out) {
  if (in.data.empty()) fail(ErrorCode::InvalidArgument, "missing --data directory");
  const auto cfg = train_config(s);
  run.manifest().set_seed(cfg.seed);
  const Corpus train_set = load_partition(in.data, "train", run);
  const Corpus validation = load_partition(in.data, "validation", run);
  const auto result = train(train_set, validation, cfg);
  save_checkpoint(run.output("checkpoint.srlp"), result.best);
  {
    auto f = run.open("training_log.jsonl");
    write_training_log(f, result);
  }
  {
    auto f = run.open("train_skipped.csv");
    write_skipped_csv(f, result.skipped);
  }
  out << fmt::format("best epoch {} of {}: validation accuracy {:.4f}{}\n", result.best_epoch, result.epochs.size(),
                     result.best_validation_accuracy, result.stopped_early ? " (stopped early)" : "");
}

Checkpoint load_model(const Inputs& in, Run& run) {
  run.manifest().add_input(require_file(in.checkpoint, "checkpoint"));
  return load_checkpoint(fs::path(in.checkpoint));
}

void cmd_eval(const Inputs& in, const Settings&, Run& run, std::ostream& out) {
  const auto ckpt = load_model(in, run);
  const auto report = evaluate(ckpt, load_corpus(in, run));
  const auto json = to_json(report);
  run.open("eval.json") << json << '\n';
  out << json << '\n';
}

void dump_matrices(const fs::path& path, const Checkpoint& ckpt, const Corpus& events) {
  const auto prepared = prepare_corpus(events, *ckpt.scaler, ckpt.params.config.max_frames);
  std::ofstream f(path);
  if (!f) fail(ErrorCode::Io, fmt::format("cannot write {}", path.string()));
  for (const auto& e : prepared.events) {
    const auto& m = e.matrix.columns();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      f << events[e.index].event_id << ',' << j;
      for (Eigen::Index i = 0; i < m.rows(); ++i) f << ',' << fmt::format("{}", m(i, j));
      f << '\n';
    }
  }
}

void cmd_predict(const Inputs& in, const Settings&, Run& run, std::ostream& out) {
  const auto ckpt = load_model(in, run);
  const Corpus events = load_corpus(in, run);
  const auto p = predict(ckpt, events);
  {
    auto f = run.open("predictions.csv");
    write_predictions_csv(f, p.rows);
  }
  {
    auto f = run.open("predict_skipped.csv");
    write_skipped_csv(f, p.skipped);
  }
  if (!in.dump_matrix.empty()) dump_matrices(in.dump_matrix, ckpt, events);
  out << fmt::format("predicted {} events, skipped {}\n", p.rows.size(), p.skipped.size());
}

void write_metric_table(std::ostream& out, const std::vector<SeriesMetrics>& rows) {
  out << fmt::format("{:<12} {:>18} {:>14} {:>10}\n", "series", "annualized_return", "max_drawdown", "sharpe");
  for (const auto& r : rows) {
    out << fmt::format("{:<12} {:>17.2f}% {:>13.2f}% {:>10}\n", r.series, 100.0 * r.annualized_return,
                       100.0 * r.max_drawdown, r.sharpe ? fmt::format("{:.4f}", *r.sharpe) : "n/a");
  }
}

void cmd_backtest(const Inputs& in, const Settings& s, Run& run, std::ostream& out) {
  const auto cfg = strategy_config(s);
  run.manifest().add_input(require_file(in.predictions, "predictions file"));
  const auto predictions = read_predictions_csv(fs::path(in.predictions));
  const auto prices = load_prices(in.prices, cfg.clock, run);
  const auto result = simulate(predictions, prices, cfg, trading_calendar(prices, cfg.clock));
  std::vector<DatedSeries> indices;
  for (const auto& p : in.indices) indices.push_back(load_index(p, cfg.clock, run));
  const auto rows = benchmark_report(to_series("strategy", result.curve), indices);
  {
    auto f = run.open("equity.csv");
    write_equity_csv(f, result.curve);
  }
  {
    auto f = run.open("trades.csv");
    write_trades_csv(f, result.trades);
  }
  {
    auto f = run.open("backtest_skipped.csv");
    write_skipped_signals_csv(f, result.skipped);
  }
  {
    auto f = run.open("backtest_report.csv");
    write_report_csv(f, rows);
  }
  out << fmt::format("{} trades, {} skipped signals, final equity {}\n", result.trades.size(), result.skipped.size(),
                     result.curve.back().equity);
  write_metric_table(out, rows);
}

void cmd_report(const Inputs& in, const Settings& s, Run& run, std::ostream& out) {
  if (in.run.empty()) fail(ErrorCode::InvalidArgument, "missing --run directory");
  const auto equity_path = fs::path(in.run) / "equity.csv";
  if (!fs::exists(equity_path)) fail(ErrorCode::Io, fmt::format("missing backtest artifact {}", equity_path.string()));
  run.manifest().add_input(equity_path);
  const auto clock = strategy_config(s).clock;
  const auto strategy = read_equity_csv(equity_path, "strategy");
  std::vector<DatedSeries> indices;
  for (const auto& p : in.indices) indices.push_back(load_index(p, clock, run));
  const auto rows = benchmark_report(strategy, indices);
  {
    auto f = run.open("report.csv");
    write_report_csv(f, rows);
  }
  {
    auto f = run.open("report.jsonl");
    write_report_jsonl(f, rows);
  }
  std::vector<DatedSeries> chart = {strategy};
  for (const auto& i : indices) chart.push_back(align_to(i, strategy.dates));
  run.open("chart.svg") << render_svg(chart);
  std::ostringstream table;
  write_metric_table(table, rows);
  run.open("summary.txt") << table.str();
  out << table.str();
}

void print_error(std::ostream& err, std::string_view command, std::string_view code, std::string_view message) {
  nlohmann::ordered_json j;
  j["error"] = {{"command", command}, {"code", code}, {"message", message}};
  err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"Stock movement prediction from SRL features of news: data prep, training and backtesting", "srlp"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  Inputs in;
  app.add_option("--config", g.config, "Key = value settings file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for training and splitting");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--set", g.sets, "Override any setting, e.g. --set train.alpha=0.5");

  auto keyed = [&g](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(name, [&g, key](const std::string& v) { g.flags[key] = v; }, help);
  };
  auto events_opts = [&in](CLI::App* sub, bool embeddings_required) {
    sub->add_option("--events", in.events, "Events file (line-delimited JSON)")->required();
    auto* e = sub->add_option("--embeddings", in.embeddings, "Embeddings file (SRLPEMB1)");
    if (embeddings_required) e->required();
  };

  auto* validate = app.add_subcommand("validate", "Check an events file (and embeddings, prices) for consistency");
  events_opts(validate, false);
  validate->add_option("--prices", in.prices, "Price directory with minute/ and daily/");

  auto* label = app.add_subcommand("label", "Compute returns and derive percentile labels");
  events_opts(label, false);
  label->add_option("--prices", in.prices, "Price directory with minute/ and daily/");
  for (const char* k : {"a", "b", "c", "d"}) keyed(label, std::string("--") + k, std::string("label.") + k, "Cut point in percent");
  keyed(label, "--horizon", "label.horizon", "next_close | close:K | minutes:M");

  auto* split = app.add_subcommand("split", "Split into train / validation / test");
  events_opts(split, false);
  keyed(split, "--scheme", "split.scheme", "in | ood");
  keyed(split, "--cutoff", "split.cutoff", "OOD cutoff timestamp");

  auto* train_cmd = app.add_subcommand("train", "Train the encoder and keep the best checkpoint");
  train_cmd->add_option("--data", in.data, "Directory written by `split`")->required();
  keyed(train_cmd, "--epochs", "train.epochs", "Epochs");
  keyed(train_cmd, "--batch-size", "train.batch_size", "Events per step");
  keyed(train_cmd, "--lr", "train.learning_rate", "Learning rate");
  keyed(train_cmd, "--schedule", "train.schedule", "constant | linear | cosine");
  keyed(train_cmd, "--alpha", "train.alpha", "Weight of the classification loss");
  keyed(train_cmd, "--mask-roles", "train.mask_roles", "v | a0a1 | uniform | wV,wA0,wA1");
  keyed(train_cmd, "--mask-seed", "train.mask_seed", "Seed of the mask sampler only");
  keyed(train_cmd, "--patience", "train.patience", "Early-stopping patience in epochs");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a labeled split");
  eval->add_option("--checkpoint", in.checkpoint, "Checkpoint file")->required();
  events_opts(eval, true);

  auto* predict_cmd = app.add_subcommand("predict", "Write class probabilities for events");
  predict_cmd->add_option("--checkpoint", in.checkpoint, "Checkpoint file")->required();
  events_opts(predict_cmd, true);
  predict_cmd->add_option("--dump-matrix", in.dump_matrix, "Also write every event's feature matrix as CSV");

  auto* backtest = app.add_subcommand("backtest", "Simulate trading on predictions");
  backtest->add_option("--predictions", in.predictions, "Predictions CSV")->required();
  backtest->add_option("--prices", in.prices, "Price directory with minute/ and daily/")->required();
  backtest->add_option("--index", in.indices, "Daily index CSV to benchmark against (repeatable)");
  backtest->add_flag_function("--allow-short", [&g](std::int64_t) { g.flags["strategy.allow_short"] = "true"; },
                              "Act on Underperforming signals");
  keyed(backtest, "--horizon", "strategy.horizon", "next_close | close:K | minutes:M");
  keyed(backtest, "--capital-fraction", "strategy.capital_fraction", "Share of equity per position");
  keyed(backtest, "--max-positions", "strategy.max_positions", "Concurrent positions");
  keyed(backtest, "--cost-bps", "strategy.cost_bps", "Cost per side in basis points");
  keyed(backtest, "--confidence", "strategy.confidence_threshold", "Minimum class probability");

  auto* report = app.add_subcommand("report", "Metric table and chart for a backtest run");
  report->add_option("--run", in.run, "Backtest output directory")->required();
  report->add_option("--index", in.indices, "Daily index CSV (repeatable)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    const std::string command = app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name();
    print_error(err, command, "Usage", e.what());
    err << "run `srlp --help` for usage\n";
    return 2;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    const Settings settings = effective_settings(g);
    Run r(command, args, g);
    auto& out_stream = out;
    if (command == "validate") {
      r.manifest().set_config(section(settings, {"strategy."}));
      cmd_validate(in, settings, r, out_stream);
    } else if (command == "label") {
      r.manifest().set_config(section(settings, {"label.", "strategy."}));
      cmd_label(in, settings, r, out_stream);
    } else if (command == "split") {
      r.manifest().set_config(section(settings, {"split."}));
      r.manifest().set_seed(split_seed(settings));
      cmd_split(in, settings, r, out_stream);
    } else if (command == "train") {
      r.manifest().set_config(section(settings, {"train.", "adam.", "model."}));
      cmd_train(in, settings, r, out_stream);
    } else if (command == "eval") {
      cmd_eval(in, settings, r, out_stream);
    } else if (command == "predict") {
      cmd_predict(in, settings, r, out_stream);
    } else if (command == "backtest") {
      r.manifest().set_config(section(settings, {"strategy."}));
      cmd_backtest(in, settings, r, out_stream);
    } else if (command == "report") {
      r.manifest().set_config(section(settings, {"strategy."}));
      cmd_report(in, settings, r, out_stream);
    }
    r.finish();
  } catch (const Error& e) {
    print_error(err, command, to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, command, "Internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace srlp::cli
