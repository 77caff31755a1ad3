#pragma once

#include <string>
#include <string_view>

#include "srlp/events.hpp"
#include "srlp/prices.hpp"

namespace srlp {

/// How long a position (or a labeled return) is held after entry.
struct ReturnHorizon {
  enum class Kind { SessionClose, Minutes };

  Kind kind = Kind::SessionClose;
  /// SessionClose: exit at the close of the k-th session after the entry session.
  int sessions = 1;
  /// Minutes: exit at the first minute bar at or after entry + minutes.
  int minutes = 0;

  static ReturnHorizon next_close() { return {}; }
  static ReturnHorizon close_after(int k) { return {Kind::SessionClose, k, 0}; }
  static ReturnHorizon after_minutes(int m) { return {Kind::Minutes, 1, m}; }

  /// Accepts "next_close", "close:K", "minutes:M".
  static ReturnHorizon parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const ReturnHorizon&, const ReturnHorizon&) = default;
};

struct Fill {
  Timestamp ts;
  double price = 0.0;
};

/// First minute close at/after `from` (strictly after when `strict`), limited to
/// the publication session or the next one. Throws NoEntryPrice.
Fill find_entry(const PriceSeries& prices, const Timestamp& from, bool strict, const SessionClock& clock);

/// Exit for a position entered at `entry`. Throws NoExitPrice.
Fill find_exit(const PriceSeries& prices, const Fill& entry, const ReturnHorizon& horizon,
               const SessionClock& clock);

/// r = (p_exit - p_entry) / p_entry with entry at or after publication.
double compute_return(const NewsEvent& event, const PriceSeries& prices, const ReturnHorizon& horizon,
                      const SessionClock& clock = {});

}  // namespace srlp
