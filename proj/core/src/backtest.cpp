#include "srlp/backtest.hpp"

#include <algorithm>
#include <optional>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "srlp/error.hpp"

namespace srlp {
namespace {

struct Position {
  Trade trade;
  const PriceSeries* series = nullptr;
};

struct PendingEntry {
  const PredictionRow* signal = nullptr;
  const PriceSeries* series = nullptr;
  Direction direction = Direction::Long;
  Fill entry;
  Fill exit;
};

double value_at(const Position& p, double price) {
  const auto& t = p.trade;
  if (t.direction == Direction::Long) return t.quantity * price;
  return t.quantity * (2.0 * t.entry_price - price);
}

}  // namespace

std::string_view to_string(Direction d) noexcept { return d == Direction::Long ? "long" : "short"; }

void StrategyConfig::validate() const {
  if (!(capital_fraction > 0.0 && capital_fraction <= 1.0)) {
    fail(ErrorCode::InvalidArgument, fmt::format("capital_fraction {} outside (0, 1]", capital_fraction));
  }
  if (max_positions == 0) fail(ErrorCode::InvalidArgument, "max_positions must be positive");
  if (!(cost_bps >= 0.0) || cost_bps >= 10000.0) fail(ErrorCode::InvalidArgument, "cost_bps must be in [0, 10000)");
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "confidence_threshold must be in [0, 1]");
  }
  if (!(initial_equity > 0.0)) fail(ErrorCode::InvalidArgument, "initial_equity must be positive");
  if (horizon.kind == ReturnHorizon::Kind::SessionClose && horizon.sessions < 1) {
    fail(ErrorCode::InvalidArgument, "horizon sessions must be >= 1");
  }
  if (horizon.kind == ReturnHorizon::Kind::Minutes && horizon.minutes < 1) {
    fail(ErrorCode::InvalidArgument, "horizon minutes must be >= 1");
  }
}

std::map<std::string, std::string> StrategyConfig::entries() const {
  return {
      {"strategy.allow_short", allow_short ? "true" : "false"},
      {"strategy.horizon", horizon.to_string()},
      {"strategy.capital_fraction", fmt::format("{}", capital_fraction)},
      {"strategy.max_positions", std::to_string(max_positions)},
      {"strategy.cost_bps", fmt::format("{}", cost_bps)},
      {"strategy.confidence_threshold", fmt::format("{}", confidence_threshold)},
      {"strategy.initial_equity", fmt::format("{}", initial_equity)},
      {"strategy.utc_offset_minutes", std::to_string(clock.offset_minutes)},
      {"strategy.session_close_minute", std::to_string(clock.close_minute_of_day)},
  };
}

std::vector<Date> trading_calendar(const std::map<std::string, PriceSeries>& prices, const SessionClock& clock) {
  std::set<Date> days;
  for (const auto& [id, series] : prices) {
    for (const auto d : series.trading_days(clock)) days.insert(d);
  }
  return {days.begin(), days.end()};
}

BacktestResult simulate(const std::vector<PredictionRow>& predictions,
                        const std::map<std::string, PriceSeries>& prices, const StrategyConfig& config,
                        const std::vector<Date>& calendar) {
  config.validate();
  if (calendar.empty()) fail(ErrorCode::InvalidArgument, "backtest calendar is empty");
  if (!std::is_sorted(calendar.begin(), calendar.end()) ||
      std::adjacent_find(calendar.begin(), calendar.end()) != calendar.end()) {
    fail(ErrorCode::InvalidArgument, "backtest calendar must be strictly increasing");
  }
  const auto& clock = config.clock;
  const double cost = config.cost_bps / 10000.0;
  const Timestamp last_mark = clock.close_of(calendar.back());

  BacktestResult result;
  auto skip = [&](const PredictionRow& s, std::string reason) {
    spdlog::info("signal {} skipped: {}", s.event_id, reason);
    result.skipped.push_back({s.event_id, std::move(reason)});
  };

  std::vector<const PredictionRow*> signals;
  for (const auto& p : predictions) signals.push_back(&p);
  std::stable_sort(signals.begin(), signals.end(), [](const PredictionRow* a, const PredictionRow* b) {
    if (a->published_at != b->published_at) return a->published_at < b->published_at;
    return a->event_id < b->event_id;
  });

  // Resolve fills up front; fills only depend on the price series.
  std::vector<PendingEntry> pending;
  for (const auto* s : signals) {
    if (s->predicted == Label::Neutral) continue;
    if (s->predicted == Label::Underperforming && !config.allow_short) continue;
    if (s->probabilities[static_cast<std::size_t>(s->predicted)] < config.confidence_threshold) {
      skip(*s, "below confidence threshold");
      continue;
    }
    const auto it = prices.find(s->stock_id);
    if (it == prices.end()) {
      skip(*s, "no price series");
      continue;
    }
    PendingEntry e;
    e.signal = s;
    e.series = &it->second;
    e.direction = s->predicted == Label::Outperforming ? Direction::Long : Direction::Short;
    try {
      e.entry = find_entry(it->second, s->published_at.floor_minute(), true, clock);
      e.exit = find_exit(it->second, e.entry, config.horizon, clock);
    } catch (const Error& err) {
      skip(*s, err.code() == ErrorCode::NoEntryPrice ? "no entry bar" : "no exit bar");
      continue;
    }
    if (!(e.entry.ts > s->published_at)) fail(ErrorCode::Validation, "entry fill precedes its signal");
    if (e.exit.ts > last_mark) {
      skip(*s, "exit after calendar end");
      continue;
    }
    pending.push_back(e);
  }
  std::stable_sort(pending.begin(), pending.end(),
                   [](const PendingEntry& a, const PendingEntry& b) { return a.entry.ts < b.entry.ts; });

  double cash = config.initial_equity;
  double marked_equity = config.initial_equity;
  std::vector<Position> open;

  auto close_until = [&](const Timestamp& t) {
    // Exits in (exit time, entry order).
    for (;;) {
      auto next = open.end();
      for (auto it = open.begin(); it != open.end(); ++it) {
        if (it->trade.exit_at <= t && (next == open.end() || it->trade.exit_at < next->trade.exit_at)) next = it;
      }
      if (next == open.end()) return;
      auto& tr = next->trade;
      const double proceeds = value_at(*next, tr.exit_price) * (1.0 - cost);
      cash += proceeds;
      tr.net_return = proceeds / tr.capital - 1.0;
      result.trades.push_back(tr);
      open.erase(next);
    }
  };

  std::size_t next_entry = 0;
  for (const Date day : calendar) {
    const Timestamp mark = clock.close_of(day);
    while (next_entry < pending.size() && pending[next_entry].entry.ts <= mark) {
      const auto& e = pending[next_entry++];
      close_until(e.entry.ts);
      if (open.size() >= config.max_positions) {
        skip(*e.signal, "max positions reached");
        continue;
      }
      const double capital = config.capital_fraction * marked_equity;
      if (capital > cash) {
        skip(*e.signal, "insufficient cash");
        continue;
      }
      Position p;
      p.series = e.series;
      auto& tr = p.trade;
      tr.event_id = e.signal->event_id;
      tr.stock_id = e.signal->stock_id;
      tr.direction = e.direction;
      tr.signal_at = e.signal->published_at;
      tr.entry_at = e.entry.ts;
      tr.entry_price = e.entry.price;
      tr.exit_at = e.exit.ts;
      tr.exit_price = e.exit.price;
      tr.capital = capital;
      tr.quantity = capital * (1.0 - cost) / e.entry.price;
      cash -= capital;
      open.push_back(std::move(p));
    }
    close_until(mark);

    EquityPoint pt;
    pt.date = day;
    pt.cash = cash;
    for (const auto& p : open) {
      const auto price = p.series->last_close_at_or_before(mark);
      pt.positions_value += value_at(p, price.value_or(p.trade.entry_price));
    }
    pt.equity = pt.cash + pt.positions_value;
    if (!(pt.equity > 0.0)) {
      fail(ErrorCode::Ruin, fmt::format("equity {} on {} after {} trades", pt.equity, day.to_string(),
                                        result.trades.size()));
    }
    marked_equity = pt.equity;
    result.curve.push_back(pt);
  }
  // Entries after the last mark never happen: their exits would lie beyond it.
  for (; next_entry < pending.size(); ++next_entry) skip(*pending[next_entry].signal, "entry after calendar end");
  return result;
}

}  // namespace srlp
