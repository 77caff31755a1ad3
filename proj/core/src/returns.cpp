#include "srlp/returns.hpp"

#include <algorithm>
#include <charconv>

#include <fmt/format.h>

#include "srlp/error.hpp"

namespace srlp {
namespace {

int parse_positive(std::string_view text, std::string_view whole) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || v <= 0) {
    fail(ErrorCode::InvalidArgument, fmt::format("bad horizon '{}'", whole));
  }
  return v;
}

}  // namespace

ReturnHorizon ReturnHorizon::parse(std::string_view text) {
  if (text == "next_close") return next_close();
  if (text.starts_with("close:")) return close_after(parse_positive(text.substr(6), text));
  if (text.starts_with("minutes:")) return after_minutes(parse_positive(text.substr(8), text));
  fail(ErrorCode::InvalidArgument,
       fmt::format("unknown horizon '{}' (expected next_close, close:K or minutes:M)", text));
}

std::string ReturnHorizon::to_string() const {
  if (kind == Kind::Minutes) return fmt::format("minutes:{}", minutes);
  if (sessions == 1) return "next_close";
  return fmt::format("close:{}", sessions);
}

Fill find_entry(const PriceSeries& prices, const Timestamp& from, bool strict, const SessionClock& clock) {
  const Bar* bar = prices.first_minute_bar_from(from, strict);
  if (bar == nullptr) {
    fail(ErrorCode::NoEntryPrice, fmt::format("{}: no minute bar after {}", prices.stock_id, from.to_string()));
  }
  const Date from_day = clock.date_of(from);
  const auto days = prices.trading_days(clock);
  const auto next = std::upper_bound(days.begin(), days.end(), from_day);
  const Date last_allowed = next == days.end() ? from_day : *next;
  if (clock.date_of(bar->ts) > last_allowed) {
    fail(ErrorCode::NoEntryPrice, fmt::format("{}: no minute bar within the session of {} or the next one",
                                              prices.stock_id, from.to_string()));
  }
  return {bar->ts, bar->close};
}

Fill find_exit(const PriceSeries& prices, const Fill& entry, const ReturnHorizon& horizon,
               const SessionClock& clock) {
  if (horizon.kind == ReturnHorizon::Kind::Minutes) {
    const Bar* bar = prices.first_minute_bar_from(entry.ts.plus_seconds(60LL * horizon.minutes), false);
    if (bar == nullptr) {
      fail(ErrorCode::NoExitPrice,
           fmt::format("{}: no minute bar {} minutes after {}", prices.stock_id, horizon.minutes, entry.ts.to_string()));
    }
    return {bar->ts, bar->close};
  }
  const Date entry_day = clock.date_of(entry.ts);
  const auto days = prices.trading_days(clock);
  auto it = std::upper_bound(days.begin(), days.end(), entry_day);
  const auto remaining = std::distance(it, days.end());
  if (remaining < horizon.sessions) {
    fail(ErrorCode::NoExitPrice, fmt::format("{}: fewer than {} sessions after {}", prices.stock_id,
                                             horizon.sessions, entry_day.to_string()));
  }
  std::advance(it, horizon.sessions - 1);
  const auto close = prices.session_close(*it, clock);
  if (!close) {
    fail(ErrorCode::NoExitPrice, fmt::format("{}: no close on {}", prices.stock_id, it->to_string()));
  }
  return {close->ts, close->close};
}

double compute_return(const NewsEvent& event, const PriceSeries& prices, const ReturnHorizon& horizon,
                      const SessionClock& clock) {
  const Fill entry = find_entry(prices, event.published_at, false, clock);
  const Fill exit = find_exit(prices, entry, horizon, clock);
  return (exit.price - entry.price) / entry.price;
}

}  // namespace srlp
