// One PASS/FAIL line per acceptance criterion; non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include <srlp/backtest.hpp>
#include <srlp/checkpoint.hpp>
#include <srlp/dataset.hpp>
#include <srlp/error.hpp>
#include <srlp/performance.hpp>
#include <srlp/report.hpp>
#include <srlp/returns.hpp>
#include <srlp/trainer.hpp>

#include "testkit.hpp"

using namespace srlp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::size_t g_trades_checked = 0;

// Every trade of every simulation in this binary goes through here.
BacktestResult checked_simulate(const std::vector<PredictionRow>& p, const std::map<std::string, PriceSeries>& prices,
                                const StrategyConfig& cfg, const std::vector<Date>& calendar) {
  auto r = simulate(p, prices, cfg, calendar);
  for (const auto& t : r.trades) {
    if (!(t.entry_at > t.signal_at) || !(t.exit_at > t.entry_at)) {
      throw std::runtime_error(fmt::format("lookahead on trade {}", t.event_id));
    }
    ++g_trades_checked;
  }
  return r;
}

// --- gradient correctness ---------------------------------------------------------

Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  ModelConfig c = testkit::tiny_model_config();
  c.d_factors = kFactorCount;
  c.max_frames = 3;
  Rng rng(2024);
  const auto params = testkit::random_params(c, rng, 0.3);
  const auto matrix = testkit::random_event_matrix(rng, 3, c.d_tok, c.d_factors);
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (const double alpha : {0.0, 0.7, 1.0}) {
    for (const Role role : {Role::V, Role::A0, Role::A1}) {
      const auto g = testkit::gradient_check(params, matrix, MaskSpec{1, role}, Label::Underperforming, alpha);
      checked += g.checked;
      if (g.max_rel_error >= worst) {
        worst = g.max_rel_error;
        where = fmt::format("alpha={} role={} {}", alpha, to_string(role), g.worst);
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          fmt::format("{} entries, max rel error {:.3g} (< 1e-4) at {}; {:.1f}s (< 60s)", checked, worst, where, secs)};
}

// --- loss decomposition --------------------------------------------------------------

Corpus learnability_corpus(std::size_t events, std::uint64_t seed) {
  testkit::SyntheticOptions o;
  o.events = events;
  o.seed = seed;
  return testkit::make_synthetic_corpus(o);
}

Verdict loss_decomposition() {
  const auto split = split_dataset(learnability_corpus(300, 11), InDistribution{11});
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto r = train(split.train, split.validation, cfg);
  double worst = 0.0;
  for (const auto& s : r.steps) worst = std::max(worst, std::abs(s.loss - (cfg.alpha * s.loss_cls + (1 - cfg.alpha) * s.loss_ssl)));
  return {r.epochs.size() == 3 && worst <= 1e-9,
          fmt::format("{} steps over {} epochs, max |L - (a*L_cls + (1-a)*L_ssl)| = {:.3g} (<= 1e-9)", r.steps.size(),
                      r.epochs.size(), worst)};
}

// --- label rule oracle ------------------------------------------------------------------

Verdict label_rule_oracle() {
  const auto t0 = Clock::now();
  Rng rng(77);
  const std::vector<LabelThresholds> cuts = {{20, 40, 60, 20}, {10, 45, 55, 10}, {33, 33, 66, 34}, {5, 5, 95, 5},
                                             {30, 35, 50, 25}};
  std::size_t mismatches = 0, ties = 0, labeled = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 5 + rng.uniform_index(496);
    Corpus corpus(n);
    // A coarse grid forces plenty of equal returns.
    const bool coarse = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      corpus[i].event_id = fmt::format("E{:04d}", rng.uniform_index(100000));
      corpus[i].event_id += fmt::format("_{}", i);
      corpus[i].return_rate = coarse ? 0.01 * static_cast<double>(rng.uniform_index(7)) : 0.05 * rng.normal();
    }
    const auto& t = cuts[static_cast<std::size_t>(trial) % cuts.size()];
    const auto expected = testkit::label_oracle(corpus, t);
    const auto got = derive_labels(corpus, t);
    std::map<std::string, Label> got_map;
    for (const auto& e : got.events) got_map[e.event_id] = *e.label;
    if (got_map != expected) ++mismatches;
    if (got.report.excluded_ids.size() + got.events.size() != n) ++mismatches;
    labeled += got.events.size();
    if (coarse) ++ties;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0,
          fmt::format("1000 corpora (sizes 5-500, {} with ties), {} labeled events, {} mismatches; {:.2f}s (< 10s)",
                      ties, labeled, mismatches, secs)};
}

// --- synthetic learnability ---------------------------------------------------------------

double chance_top1(const std::vector<PreparedEvent>& events) {
  double s = 0.0;
  for (const auto& e : events) s += 1.0 / static_cast<double>(e.matrix.frames());
  return s / static_cast<double>(events.size());
}

Verdict synthetic_learnability() {
  const auto t0 = Clock::now();
  const auto split = split_dataset(learnability_corpus(2000, 2024), InDistribution{2024});
  const TrainConfig cfg;  // defaults: 30 epochs, alpha 0.7
  const auto r = train(split.train, split.validation, cfg, [](const EpochLog& e) {
    std::cerr << fmt::format("  epoch {:2d}: loss {:.4f} train acc {:.4f} val acc {:.4f}\n", e.epoch, e.loss,
                             e.train_accuracy, e.validation_accuracy);
  });
  const double train_acc = evaluate(r.best, split.train).accuracy;
  const double test_acc = evaluate(r.best, split.test).accuracy;
  const auto prepared = prepare_corpus(split.test, *r.best.scaler, r.best.params.config.max_frames);
  const double ssl = ssl_top1_accuracy(r.best.params, prepared.events, cfg.mask_roles, 99);
  const double chance = chance_top1(prepared.events);
  const double secs = seconds_since(t0);
  const bool pass = r.epochs.size() <= 30 && train_acc >= 0.95 && test_acc >= 0.90 && ssl >= chance + 0.20 && secs < 600;
  return {pass, fmt::format("{} epochs (best {}), train acc {:.4f} (>= 0.95), held-out acc {:.4f} (>= 0.90), "
                            "SSL top-1 {:.4f} vs chance {:.4f} (+{:.1f} pts, >= 20); {:.0f}s (< 600s)",
                            r.epochs.size(), r.best_epoch, train_acc, test_acc, ssl, chance, 100 * (ssl - chance),
                            secs)};
}

// --- SSL sanity -------------------------------------------------------------------------------

Verdict ssl_sanity() {
  testkit::SyntheticOptions o;
  o.events = 400;
  o.min_frames = 2;
  o.seed = 5;
  const auto corpus = testkit::make_synthetic_corpus(o);
  const auto scaler = FactorScaler::fit(corpus);
  ModelConfig c;
  c.d_tok = o.d_tok;
  Rng rng(Rng(7).fork(1));
  const auto params = ModelParams::initialize(c, rng);
  const auto prepared = prepare_corpus(corpus, scaler, c.max_frames);
  double ln_n = 0.0;
  for (const auto& e : prepared.events) ln_n += std::log(static_cast<double>(e.matrix.frames()));
  ln_n /= static_cast<double>(prepared.events.size());
  bool pass = true;
  std::string detail;
  for (const auto& [name, roles] : {std::pair{"v", MaskRoleDistribution::v_only()},
                                    std::pair{"a0a1", MaskRoleDistribution::a0_a1()}}) {
    const double loss = mean_ssl_loss(params, prepared.events, roles, 3);
    const double rel = std::abs(loss - ln_n) / ln_n;
    pass = pass && rel <= 0.05;
    detail += fmt::format("{}mask={}: {:.4f} vs mean ln N {:.4f} ({:.2f}%)", detail.empty() ? "" : "; ", name, loss,
                          ln_n, 100 * rel);
  }
  return {pass, detail + " (within 5%)"};
}

// --- backtest oracles -------------------------------------------------------------------------

Verdict backtest_oracles() {
  Rng rng(1000);
  std::size_t dd_mismatch = 0;
  double ann_err = 0.0, sharpe_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(999);
    std::vector<double> e(n);
    double v = 1.0;
    for (auto& x : e) x = (v *= std::exp(0.02 * rng.normal()));
    if (max_drawdown(e) != testkit::brute_force_max_drawdown(e)) ++dd_mismatch;
    // Spreadsheet-style recomputation.
    const double ann_ref = std::pow(e.back() / e.front(), 252.0 / static_cast<double>(n - 1)) - 1.0;
    ann_err = std::max(ann_err, std::abs(annualized_return(e) - ann_ref));
    if (n >= 3) {
      std::vector<double> r;
      for (std::size_t i = 1; i < n; ++i) r.push_back(e[i] / e[i - 1] - 1.0);
      const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
      double ss = 0.0;
      for (const double x : r) ss += (x - mean) * (x - mean);
      const double ref = mean / std::sqrt(ss / static_cast<double>(r.size() - 1)) * std::sqrt(252.0);
      sharpe_err = std::max(sharpe_err, std::abs(sharpe(r) - ref));
    }
  }

  // One long trade: entry 10.00, exit 11.00, 10bp per side, all capital.
  const SessionClock clock;
  auto at = [&](const char* d, int hh, int mm) { return Timestamp::at_local(Date::parse(d), hh * 60 + mm, clock.offset_minutes); };
  auto bar = [](Timestamp ts, double px) { return Bar{ts, px, px, px, px, 100.0}; };
  PriceSeries s;
  s.stock_id = "A";
  s.minute_bars = {bar(at("2021-01-04", 9, 30), 9.9), bar(at("2021-01-04", 9, 31), 10.0),
                   bar(at("2021-01-04", 15, 0), 10.4), bar(at("2021-01-05", 15, 0), 11.0)};
  const std::map<std::string, PriceSeries> prices = {{"A", s}};
  PredictionRow sig;
  sig.event_id = "E1";
  sig.stock_id = "A";
  sig.published_at = at("2021-01-04", 9, 30).plus_seconds(15);
  sig.predicted = Label::Outperforming;
  sig.probabilities = {1.0, 0.0, 0.0};
  StrategyConfig cfg;
  cfg.capital_fraction = 1.0;
  const auto bt = checked_simulate({sig}, prices, cfg, trading_calendar(prices, clock));
  const double hand = 1.10 * (1 - 0.001) * (1 - 0.001) - 1.0;
  const double one_trade_err = bt.trades.size() == 1 ? std::abs(bt.trades[0].net_return - hand) : INFINITY;
  const double equity_err = std::abs(bt.curve.back().equity - (1.0 + hand));

  // Random markets: the lookahead check runs inside checked_simulate.
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng mrng(seed);
    std::map<std::string, PriceSeries> m;
    for (int k = 0; k < 4; ++k) {
      const std::string id = fmt::format("S{}", k);
      m[id] = testkit::make_price_series(id, Date::parse("2021-03-01"), 40, 10.0 + k, 0.0, mrng, 15);
    }
    const auto cal = trading_calendar(m, clock);
    std::vector<PredictionRow> sigs;
    for (int i = 0; i < 150; ++i) {
      PredictionRow p;
      p.event_id = fmt::format("E{:03d}", i);
      p.stock_id = fmt::format("S{}", mrng.uniform_index(4));
      p.published_at = Timestamp::at_local(cal[mrng.uniform_index(cal.size())],
                                           9 * 60 + static_cast<int>(mrng.uniform_index(7 * 60)), clock.offset_minutes)
                           .plus_seconds(static_cast<std::int64_t>(mrng.uniform_index(60)));
      p.predicted = static_cast<Label>(mrng.uniform_index(3));
      p.probabilities = {1.0 / 3, 1.0 / 3, 1.0 / 3};
      sigs.push_back(p);
    }
    StrategyConfig c;
    c.allow_short = seed % 2 == 0;
    checked_simulate(sigs, m, c, cal);
  }

  const bool pass = dd_mismatch == 0 && ann_err <= 1e-9 && sharpe_err <= 1e-9 && one_trade_err <= 1e-12 &&
                    equity_err <= 1e-12;
  return {pass, fmt::format("drawdown vs brute force: {} mismatches on 200 curves; annualized err {:.3g}, sharpe err "
                            "{:.3g} (<= 1e-9); one-trade err {:.3g} (<= 1e-12); no lookahead on {} trades so far",
                            dd_mismatch, ann_err, sharpe_err, one_trade_err, g_trades_checked)};
}

// --- determinism --------------------------------------------------------------------------------

struct PipelineBytes {
  std::string checkpoint, log, predictions, report;
};

PipelineBytes run_pipeline() {
  const auto split = split_dataset(learnability_corpus(240, 31), InDistribution{31});
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto r = train(split.train, split.validation, cfg);
  PipelineBytes out;
  std::ostringstream ck, log, pred;
  save_checkpoint(ck, r.best);
  write_training_log(log, r);
  write_predictions_csv(pred, predict(r.best, split.test).rows);
  out.checkpoint = ck.str();
  out.log = log.str();
  out.predictions = pred.str();
  out.report = testkit::run_fixture_backtest(testkit::data_dir() / "backtest60").report_csv;
  return out;
}

Verdict determinism() {
  const auto a = run_pipeline();
  const auto b = run_pipeline();
  const bool pass = a.checkpoint == b.checkpoint && a.log == b.log && a.predictions == b.predictions &&
                    a.report == b.report;
  return {pass, fmt::format("checkpoint {} ({} bytes), training log {}, predictions {}, report {}",
                            a.checkpoint == b.checkpoint ? "identical" : "DIFFERS", a.checkpoint.size(),
                            a.log == b.log ? "identical" : "DIFFERS", a.predictions == b.predictions ? "identical" : "DIFFERS",
                            a.report == b.report ? "identical" : "DIFFERS")};
}

// --- direction of effect -------------------------------------------------------------------------

// Ten stocks sharing a falling market factor; the index is their equal-weight
// average. News events arrive through every session.
struct Market {
  std::map<std::string, PriceSeries> prices;
  DatedSeries index;
  Corpus events;
};

Market declining_market() {
  const SessionClock clock;
  const std::size_t days = 250, stocks = 10;
  const auto sessions = testkit::weekdays(Date::parse("2022-01-03"), days);
  Rng rng(4242);
  Market m;
  std::vector<double> market(days);
  for (auto& x : market) x = -0.0006 + 0.002 * rng.normal();
  std::vector<std::vector<double>> closes(stocks);
  for (std::size_t s = 0; s < stocks; ++s) {
    PriceSeries ps;
    ps.stock_id = fmt::format("S{:02d}", s);
    double px = 10.0 + static_cast<double>(s);
    for (std::size_t d = 0; d < days; ++d) {
      const double day_ret = market[d] + 0.01 * rng.normal();
      std::vector<int> minutes;
      for (int t = 9 * 60 + 30; t <= 11 * 60 + 30; t += 10) minutes.push_back(t);
      for (int t = 13 * 60; t <= 15 * 60; t += 10) minutes.push_back(t);
      const double step = day_ret / static_cast<double>(minutes.size());
      const double open = px;
      for (const int t : minutes) {
        const double prev = px;
        px *= std::exp(step + 0.001 * rng.normal());
        ps.minute_bars.push_back({Timestamp::at_local(sessions[d], t, clock.offset_minutes), prev, std::max(prev, px),
                                  std::min(prev, px), px, 1000.0});
      }
      ps.daily_bars.push_back({clock.close_of(sessions[d]), open, std::max(open, px), std::min(open, px), px, 1e4});
      closes[s].push_back(px);
    }
    m.prices[ps.stock_id] = std::move(ps);
  }
  m.index.name = "INDEX";
  m.index.dates = sessions;
  for (std::size_t d = 0; d < days; ++d) {
    double level = 0.0;
    for (std::size_t s = 0; s < stocks; ++s) level += closes[s][d] / closes[s][0];
    m.index.values.push_back(1000.0 * level / static_cast<double>(stocks));
  }
  for (std::size_t d = 0; d + 1 < days; ++d) {
    for (int k = 0; k < 60; ++k) {
      NewsEvent e;
      e.event_id = fmt::format("N{:03d}{:02d}", d, k);
      e.stock_id = fmt::format("S{:02d}", rng.uniform_index(stocks));
      e.published_at = Timestamp::at_local(sessions[d], 9 * 60 + 30 + static_cast<int>(rng.uniform_index(5 * 60)),
                                           clock.offset_minutes)
                           .plus_seconds(static_cast<std::int64_t>(rng.uniform_index(60)));
      m.events.push_back(std::move(e));
    }
  }
  return m;
}

std::vector<PredictionRow> as_predictions(const Corpus& events, const std::vector<Label>& labels) {
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < events.size(); ++i) {
    PredictionRow r;
    r.event_id = events[i].event_id;
    r.stock_id = events[i].stock_id;
    r.published_at = events[i].published_at;
    r.predicted = labels[i];
    r.probabilities[static_cast<std::size_t>(labels[i])] = 1.0;
    rows.push_back(r);
  }
  return rows;
}

Verdict direction_of_effect() {
  auto m = declining_market();
  const SessionClock clock;
  for (auto& e : m.events) e.return_rate = compute_return(e, m.prices.at(e.stock_id), ReturnHorizon::next_close(), clock);
  const auto labeled = derive_labels(m.events, LabelThresholds{});
  std::map<std::string, Label> truth;
  for (const auto& e : labeled.events) truth[e.event_id] = *e.label;
  // Events in the label gaps carry no signal either way.
  std::vector<Label> labels;
  for (const auto& e : m.events) labels.push_back(truth.contains(e.event_id) ? truth.at(e.event_id) : Label::Neutral);

  const StrategyConfig cfg;
  const auto cal = trading_calendar(m.prices, clock);
  auto strategy_metrics = [&](const std::vector<Label>& l) {
    const auto r = checked_simulate(as_predictions(m.events, l), m.prices, cfg, cal);
    return benchmark_report(to_series("strategy", r.curve), {m.index});
  };
  const auto informed = strategy_metrics(labels);
  const double index_ann = informed[1].annualized_return;
  bool shuffled_loses = true;
  std::string shuffled;
  Rng rng(9);
  for (int k = 0; k < 5; ++k) {
    auto l = labels;
    shuffle(l, rng);
    const auto rows = strategy_metrics(l);
    shuffled_loses = shuffled_loses && !(rows[0].annualized_return > index_ann);
    shuffled += fmt::format("{}{:.2f}%", k ? ", " : "", 100 * rows[0].annualized_return);
  }
  const bool pass = index_ann < 0.0 && informed[0].annualized_return > index_ann && shuffled_loses;
  return {pass, fmt::format("index {:.2f}%/yr; true-label strategy {:.2f}%/yr; shuffled-label strategies [{}]",
                            100 * index_ann, 100 * informed[0].annualized_return, shuffled)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient_correctness", gradient_correctness},
      {"loss_decomposition", loss_decomposition},
      {"label_rule_oracle", label_rule_oracle},
      {"synthetic_learnability", synthetic_learnability},
      {"ssl_sanity", ssl_sanity},
      {"backtest_oracles", backtest_oracles},
      {"determinism", determinism},
      {"direction_of_effect", direction_of_effect},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, fmt::format("threw: {}", e.what())};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
  }
  std::cout << fmt::format("no_lookahead: asserted on {} trades\n", g_trades_checked);
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures),
                           criteria.size());
  return failures == 0 ? 0 : 1;
}
