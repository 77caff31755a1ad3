#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "srlp/predictions.hpp"
#include "srlp/prices.hpp"
#include "srlp/returns.hpp"

namespace srlp {

enum class Direction { Long, Short };
std::string_view to_string(Direction d) noexcept;

struct StrategyConfig {
  bool allow_short = false;
  ReturnHorizon horizon = ReturnHorizon::next_close();
  /// Share of equity (at the last daily mark) committed per position.
  double capital_fraction = 0.1;
  std::size_t max_positions = 10;
  /// Per side.
  double cost_bps = 10.0;
  /// Minimum probability of the predicted class to act on it.
  double confidence_threshold = 0.0;
  double initial_equity = 1.0;
  SessionClock clock;

  void validate() const;
  std::map<std::string, std::string> entries() const;
};

struct Trade {
  std::string event_id;
  std::string stock_id;
  Direction direction = Direction::Long;
  Timestamp signal_at;
  Timestamp entry_at;
  double entry_price = 0.0;
  Timestamp exit_at;
  double exit_price = 0.0;
  double quantity = 0.0;
  /// Cash committed at entry.
  double capital = 0.0;
  /// Proceeds / capital - 1, costs included.
  double net_return = 0.0;
};

struct EquityPoint {
  Date date;
  double equity = 0.0;
  double cash = 0.0;
  double positions_value = 0.0;
};

using EquityCurve = std::vector<EquityPoint>;

struct SkippedSignal {
  std::string event_id;
  std::string reason;
};

struct BacktestResult {
  std::vector<Trade> trades;
  EquityCurve curve;
  std::vector<SkippedSignal> skipped;
};

/// Sorted union of the trading days of every series.
std::vector<Date> trading_calendar(const std::map<std::string, PriceSeries>& prices, const SessionClock& clock);

/// Event loop over signals in (published_at, event_id) order. At equal
/// timestamps exits run before entries and entries before the daily mark.
/// Equity is marked at the session close of every calendar day.
/// Throws Ruin when equity drops to zero or below.
BacktestResult simulate(const std::vector<PredictionRow>& predictions,
                        const std::map<std::string, PriceSeries>& prices, const StrategyConfig& config,
                        const std::vector<Date>& calendar);

}  // namespace srlp
