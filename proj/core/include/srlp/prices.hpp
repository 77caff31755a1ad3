#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "srlp/time.hpp"

namespace srlp {

struct Bar {
  Timestamp ts;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;
};

/// Where a daily bar sits in time when its CSV only carries a date.
struct SessionClock {
  std::int32_t offset_minutes = 8 * 60;  // exchange local time, +08:00
  int close_minute_of_day = 15 * 60;     // 15:00

  Timestamp close_of(Date day) const { return Timestamp::at_local(day, close_minute_of_day, offset_minutes); }
  Date date_of(const Timestamp& ts) const { return Timestamp{ts.utc_seconds, offset_minutes}.local_date(); }
};

struct PriceSeries {
  std::string stock_id;
  std::vector<Bar> minute_bars;
  std::vector<Bar> daily_bars;

  /// Throws unless timestamps strictly increase and prices are positive.
  void validate() const;

  /// Sessions with data at either granularity, ascending.
  std::vector<Date> trading_days(const SessionClock& clock) const;

  /// First minute bar with ts >= t (or > t when strict).
  const Bar* first_minute_bar_from(const Timestamp& t, bool strict) const;

  /// Closing price for a session: the daily bar on that date, else the last
  /// minute bar of that date.
  std::optional<Bar> session_close(Date day, const SessionClock& clock) const;

  /// Latest close at or before t across both granularities.
  std::optional<double> last_close_at_or_before(const Timestamp& t) const;
};

/// Parses "timestamp,open,high,low,close,volume" with a header line. Dates
/// without a time are placed at the session close.
std::vector<Bar> read_bars_csv(std::istream& in, std::string_view source, const SessionClock& clock);
std::vector<Bar> read_bars_csv(const std::filesystem::path& path, const SessionClock& clock);
void write_bars_csv(std::ostream& out, const std::vector<Bar>& bars, bool daily, const SessionClock& clock);

/// Loads <dir>/minute/<STOCK>.csv and <dir>/daily/<STOCK>.csv for every stock
/// found in either subdirectory.
std::map<std::string, PriceSeries> load_price_dir(const std::filesystem::path& dir, const SessionClock& clock);

}  // namespace srlp
