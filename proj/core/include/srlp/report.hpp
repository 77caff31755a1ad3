#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "srlp/backtest.hpp"
#include "srlp/performance.hpp"

namespace srlp {

/// Numbers use the shortest representation that round-trips, so the table
/// carries exactly the computed values. An undefined Sharpe is "nan".
void write_report_csv(std::ostream& out, const std::vector<SeriesMetrics>& rows);
/// Same fields, one JSON object per line; an undefined Sharpe is null.
void write_report_jsonl(std::ostream& out, const std::vector<SeriesMetrics>& rows);

void write_equity_csv(std::ostream& out, const EquityCurve& curve);
/// Reads "date,equity" back into a series named `name`.
DatedSeries read_equity_csv(std::istream& in, std::string name, std::string_view source = "<equity>");
DatedSeries read_equity_csv(const std::filesystem::path& path, std::string name);

void write_trades_csv(std::ostream& out, const std::vector<Trade>& trades);
void write_skipped_signals_csv(std::ostream& out, const std::vector<SkippedSignal>& skipped);

struct ChartOptions {
  int width = 800;
  int height = 520;
};

/// Two panels: return rate of every series (each relative to its first value)
/// and the drawdown of the first series. Output depends only on the inputs.
std::string render_svg(const std::vector<DatedSeries>& series, const ChartOptions& options = {});

}  // namespace srlp
