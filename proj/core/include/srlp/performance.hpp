#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srlp/backtest.hpp"

namespace srlp {

inline constexpr double kTradingDaysPerYear = 252.0;

/// min_t equity_t / max_{s<=t} equity_s - 1; always <= 0.
double max_drawdown(std::span<const double> equity);

/// (end / start)^(days_per_year / (n - 1)) - 1 over n daily samples.
double annualized_return(std::span<const double> equity, double days_per_year = kTradingDaysPerYear);

/// Simple returns between consecutive samples.
std::vector<double> daily_returns(std::span<const double> equity);

/// mean(r - rf) / sample_std(r - rf) * sqrt(days_per_year). Throws NotDefined
/// for zero variance.
double sharpe(std::span<const double> returns, double risk_free_daily = 0.0,
              double days_per_year = kTradingDaysPerYear);

std::vector<double> equity_values(const EquityCurve& curve);

struct SeriesMetrics {
  std::string series;
  double annualized_return = 0.0;
  double max_drawdown = 0.0;
  /// Empty when the return series has zero variance.
  std::optional<double> sharpe;
};

SeriesMetrics compute_metrics(std::string name, std::span<const double> equity);

/// A daily value series, e.g. an index close or a strategy's equity.
struct DatedSeries {
  std::string name;
  std::vector<Date> dates;
  std::vector<double> values;
};

DatedSeries to_series(std::string name, const EquityCurve& curve);
/// Daily closes; minute bars are ignored.
DatedSeries to_series(std::string name, const PriceSeries& prices, const SessionClock& clock);

/// Restricts `index` to `dates`. Throws Validation naming the series when a
/// date is missing.
DatedSeries align_to(const DatedSeries& index, const std::vector<Date>& dates);

/// Strategy first, then each index over the strategy's dates.
std::vector<SeriesMetrics> benchmark_report(const DatedSeries& strategy, const std::vector<DatedSeries>& indices);

}  // namespace srlp
