#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace srlp {

/// Calendar date, stored as days since 1970-01-01.
struct Date {
  std::int32_t days = 0;

  static Date from_ymd(int year, unsigned month, unsigned day);
  /// Parses "YYYY-MM-DD".
  static Date parse(std::string_view text);
  std::string to_string() const;

  friend auto operator<=>(const Date&, const Date&) = default;
};

/// An instant with the UTC offset it was written in. Ordering and equality
/// look at the instant only; the offset is kept so values print back the way
/// they were read.
struct Timestamp {
  std::int64_t utc_seconds = 0;
  std::int32_t offset_minutes = 0;

  /// ISO-8601 "YYYY-MM-DDTHH:MM[:SS](Z|+HH:MM|-HH:MM)". A space may replace
  /// the 'T'. When the offset is absent, default_offset is used if given,
  /// otherwise parsing fails.
  static Timestamp parse(std::string_view text,
                         std::optional<std::int32_t> default_offset = std::nullopt);

  /// Local midnight plus minute_of_day, in the given offset.
  static Timestamp at_local(Date date, int minute_of_day, std::int32_t offset_minutes);

  /// Canonical "YYYY-MM-DDTHH:MM:SS+HH:MM".
  std::string to_string() const;

  /// Calendar date in the timestamp's own offset.
  Date local_date() const;
  /// Minutes since local midnight.
  int local_minute_of_day() const;
  /// Truncated to the start of its minute.
  Timestamp floor_minute() const;
  Timestamp plus_seconds(std::int64_t s) const { return {utc_seconds + s, offset_minutes}; }

  friend bool operator==(const Timestamp& a, const Timestamp& b) {
    return a.utc_seconds == b.utc_seconds;
  }
  friend std::strong_ordering operator<=>(const Timestamp& a, const Timestamp& b) {
    return a.utc_seconds <=> b.utc_seconds;
  }
};

}  // namespace srlp
