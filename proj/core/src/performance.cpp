#include "srlp/performance.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "srlp/error.hpp"

namespace srlp {

double max_drawdown(std::span<const double> equity) {
  if (equity.empty()) fail(ErrorCode::InvalidArgument, "max_drawdown: empty curve");
  double peak = equity[0];
  double worst = 0.0;
  for (const double v : equity) {
    if (!std::isfinite(v) || v <= 0.0) fail(ErrorCode::InvalidArgument, "max_drawdown: equity must be positive");
    peak = std::max(peak, v);
    worst = std::min(worst, v / peak - 1.0);
  }
  return worst;
}

double annualized_return(std::span<const double> equity, double days_per_year) {
  if (equity.size() < 2) fail(ErrorCode::InvalidArgument, "annualized_return: need at least 2 samples");
  if (!(equity.front() > 0.0) || !(equity.back() > 0.0)) {
    fail(ErrorCode::InvalidArgument, "annualized_return: equity must be positive");
  }
  const double days = static_cast<double>(equity.size() - 1);
  return std::pow(equity.back() / equity.front(), days_per_year / days) - 1.0;
}

std::vector<double> daily_returns(std::span<const double> equity) {
  std::vector<double> r;
  for (std::size_t i = 1; i < equity.size(); ++i) r.push_back(equity[i] / equity[i - 1] - 1.0);
  return r;
}

double sharpe(std::span<const double> returns, double risk_free_daily, double days_per_year) {
  if (returns.size() < 2) fail(ErrorCode::InvalidArgument, "sharpe: need at least 2 returns");
  const double n = static_cast<double>(returns.size());
  double mean = 0.0;
  for (const double r : returns) mean += r - risk_free_daily;
  mean /= n;
  double ss = 0.0;
  for (const double r : returns) ss += (r - risk_free_daily - mean) * (r - risk_free_daily - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) fail(ErrorCode::NotDefined, "sharpe: zero variance");
  return mean / sd * std::sqrt(days_per_year);
}

std::vector<double> equity_values(const EquityCurve& curve) {
  std::vector<double> v;
  v.reserve(curve.size());
  for (const auto& p : curve) v.push_back(p.equity);
  return v;
}

SeriesMetrics compute_metrics(std::string name, std::span<const double> equity) {
  SeriesMetrics m;
  m.series = std::move(name);
  m.annualized_return = annualized_return(equity);
  m.max_drawdown = max_drawdown(equity);
  try {
    m.sharpe = sharpe(daily_returns(equity));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotDefined) throw;
  }
  return m;
}

DatedSeries to_series(std::string name, const EquityCurve& curve) {
  DatedSeries s;
  s.name = std::move(name);
  for (const auto& p : curve) {
    s.dates.push_back(p.date);
    s.values.push_back(p.equity);
  }
  return s;
}

DatedSeries to_series(std::string name, const PriceSeries& prices, const SessionClock& clock) {
  DatedSeries s;
  s.name = std::move(name);
  for (const auto& b : prices.daily_bars) {
    s.dates.push_back(clock.date_of(b.ts));
    s.values.push_back(b.close);
  }
  return s;
}

DatedSeries align_to(const DatedSeries& index, const std::vector<Date>& dates) {
  DatedSeries out;
  out.name = index.name;
  for (const Date d : dates) {
    const auto it = std::lower_bound(index.dates.begin(), index.dates.end(), d);
    if (it == index.dates.end() || *it != d) {
      fail(ErrorCode::Validation, fmt::format("series '{}' has no value on {} (covers {} to {})", index.name,
                                              d.to_string(),
                                              index.dates.empty() ? "nothing" : index.dates.front().to_string(),
                                              index.dates.empty() ? "nothing" : index.dates.back().to_string()));
    }
    out.dates.push_back(d);
    out.values.push_back(index.values[static_cast<std::size_t>(it - index.dates.begin())]);
  }
  return out;
}

std::vector<SeriesMetrics> benchmark_report(const DatedSeries& strategy, const std::vector<DatedSeries>& indices) {
  std::vector<SeriesMetrics> out;
  out.push_back(compute_metrics(strategy.name, strategy.values));
  for (const auto& idx : indices) {
    const auto aligned = align_to(idx, strategy.dates);
    out.push_back(compute_metrics(idx.name, aligned.values));
  }
  return out;
}

}  // namespace srlp
