#include "srlp/prices.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "srlp/error.hpp"

namespace srlp {
namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_double(std::string_view text, std::string_view source, std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    fail(ErrorCode::Parse, fmt::format("{}:{}: bad number '{}'", source, line_no, text));
  }
  return value;
}

void check_bars(const std::vector<Bar>& bars, std::string_view what) {
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const Bar& b = bars[i];
    if (!(b.open > 0 && b.high > 0 && b.low > 0 && b.close > 0)) {
      fail(ErrorCode::Validation, fmt::format("{} bar {} ({}) has a non-positive price", what, i, b.ts.to_string()));
    }
    if (i > 0 && !(bars[i - 1].ts < b.ts)) {
      fail(ErrorCode::Validation,
           fmt::format("{} bar {} ({}) does not follow its predecessor in time", what, i, b.ts.to_string()));
    }
  }
}

}  // namespace

void PriceSeries::validate() const {
  check_bars(minute_bars, stock_id + " minute");
  check_bars(daily_bars, stock_id + " daily");
}

std::vector<Date> PriceSeries::trading_days(const SessionClock& clock) const {
  std::set<Date> days;
  for (const auto* bars : {&daily_bars, &minute_bars}) {
    for (const auto& bar : *bars) days.insert(clock.date_of(bar.ts));
  }
  return {days.begin(), days.end()};
}

const Bar* PriceSeries::first_minute_bar_from(const Timestamp& t, bool strict) const {
  const auto it = strict ? std::upper_bound(minute_bars.begin(), minute_bars.end(), t,
                                            [](const Timestamp& x, const Bar& b) { return x < b.ts; })
                         : std::lower_bound(minute_bars.begin(), minute_bars.end(), t,
                                            [](const Bar& b, const Timestamp& x) { return b.ts < x; });
  return it == minute_bars.end() ? nullptr : &*it;
}

std::optional<Bar> PriceSeries::session_close(Date day, const SessionClock& clock) const {
  for (const auto& bar : daily_bars) {
    if (clock.date_of(bar.ts) == day) return bar;
  }
  std::optional<Bar> last;
  for (const auto& bar : minute_bars) {
    if (clock.date_of(bar.ts) == day) last = bar;
  }
  return last;
}

std::optional<double> PriceSeries::last_close_at_or_before(const Timestamp& t) const {
  std::optional<Bar> best;
  for (const auto* bars : {&minute_bars, &daily_bars}) {
    auto it = std::upper_bound(bars->begin(), bars->end(), t,
                               [](const Timestamp& x, const Bar& b) { return x < b.ts; });
    if (it == bars->begin()) continue;
    --it;
    // Daily bars win ties: they carry the official close.
    if (!best || best->ts < it->ts || (bars == &daily_bars && best->ts == it->ts)) best = *it;
  }
  if (!best) return std::nullopt;
  return best->close;
}

std::vector<Bar> read_bars_csv(std::istream& in, std::string_view source, const SessionClock& clock) {
  std::vector<Bar> bars;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("timestamp", 0) == 0) continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != 6) {
      fail(ErrorCode::Parse, fmt::format("{}:{}: expected 6 columns, got {}", source, line_no, fields.size()));
    }
    Bar bar;
    try {
      bar.ts = fields[0].size() == 10 ? clock.close_of(Date::parse(fields[0]))
                                      : Timestamp::parse(fields[0], clock.offset_minutes);
    } catch (const Error& e) {
      fail(ErrorCode::Parse, fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
    bar.open = parse_double(fields[1], source, line_no);
    bar.high = parse_double(fields[2], source, line_no);
    bar.low = parse_double(fields[3], source, line_no);
    bar.close = parse_double(fields[4], source, line_no);
    bar.volume = parse_double(fields[5], source, line_no);
    bars.push_back(bar);
  }
  check_bars(bars, source);
  return bars;
}

std::vector<Bar> read_bars_csv(const std::filesystem::path& path, const SessionClock& clock) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, fmt::format("cannot open '{}'", path.string()));
  return read_bars_csv(in, path.string(), clock);
}

void write_bars_csv(std::ostream& out, const std::vector<Bar>& bars, bool daily, const SessionClock& clock) {
  out << "timestamp,open,high,low,close,volume\n";
  for (const auto& b : bars) {
    const std::string ts = daily ? clock.date_of(b.ts).to_string() : b.ts.to_string();
    out << fmt::format("{},{},{},{},{},{}\n", ts, b.open, b.high, b.low, b.close, b.volume);
  }
}

std::map<std::string, PriceSeries> load_price_dir(const std::filesystem::path& dir, const SessionClock& clock) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorCode::Io, fmt::format("price directory '{}' not found", dir.string()));
  std::map<std::string, PriceSeries> out;
  for (const auto* granularity : {"minute", "daily"}) {
    const fs::path sub = dir / granularity;
    if (!fs::is_directory(sub)) continue;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(sub)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const std::string stock = file.stem().string();
      auto& series = out[stock];
      series.stock_id = stock;
      auto bars = read_bars_csv(file, clock);
      if (std::string_view(granularity) == "minute") {
        series.minute_bars = std::move(bars);
      } else {
        series.daily_bars = std::move(bars);
      }
    }
  }
  return out;
}

}  // namespace srlp
