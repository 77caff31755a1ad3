#include "srlp/time.hpp"

#include <charconv>
#include <chrono>

#include <fmt/format.h>

#include "srlp/error.hpp"

namespace srlp {
namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

int parse_digits(std::string_view text, std::size_t pos, std::size_t count, std::string_view whole) {
  if (pos + count > text.size()) {
    fail(ErrorCode::Parse, fmt::format("truncated date/time '{}'", whole));
  }
  int value = 0;
  const char* first = text.data() + pos;
  const auto [ptr, ec] = std::from_chars(first, first + count, value);
  if (ec != std::errc{} || ptr != first + count) {
    fail(ErrorCode::Parse, fmt::format("bad digits in date/time '{}'", whole));
  }
  return value;
}

void expect_char(std::string_view text, std::size_t pos, char c, std::string_view whole) {
  if (pos >= text.size() || text[pos] != c) {
    fail(ErrorCode::Parse, fmt::format("expected '{}' at offset {} in '{}'", c, pos, whole));
  }
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) fail(ErrorCode::Parse, fmt::format("invalid date {}-{}-{}", year, month, day));
  return Date{static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count())};
}

Date Date::parse(std::string_view text) {
  const int y = parse_digits(text, 0, 4, text);
  expect_char(text, 4, '-', text);
  const int m = parse_digits(text, 5, 2, text);
  expect_char(text, 7, '-', text);
  const int d = parse_digits(text, 8, 2, text);
  if (text.size() != 10) fail(ErrorCode::Parse, fmt::format("trailing characters in date '{}'", text));
  return from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

std::string Date::to_string() const {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

Timestamp Timestamp::parse(std::string_view text, std::optional<std::int32_t> default_offset) {
  const Date date = Date::parse(text.substr(0, std::min<std::size_t>(10, text.size())));
  if (text.size() < 16) fail(ErrorCode::Parse, fmt::format("timestamp '{}' lacks a time of day", text));
  if (text[10] != 'T' && text[10] != ' ') {
    fail(ErrorCode::Parse, fmt::format("expected 'T' at offset 10 in '{}'", text));
  }
  const int hh = parse_digits(text, 11, 2, text);
  expect_char(text, 13, ':', text);
  const int mm = parse_digits(text, 14, 2, text);
  std::size_t pos = 16;
  int ss = 0;
  if (pos < text.size() && text[pos] == ':') {
    ss = parse_digits(text, pos + 1, 2, text);
    pos += 3;
    // Fractional seconds are accepted and truncated.
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
  }
  if (hh > 23 || mm > 59 || ss > 60) fail(ErrorCode::Parse, fmt::format("time out of range in '{}'", text));

  std::int32_t offset = 0;
  if (pos == text.size()) {
    if (!default_offset) fail(ErrorCode::Parse, fmt::format("timestamp '{}' has no UTC offset", text));
    offset = *default_offset;
  } else if (text[pos] == 'Z') {
    if (pos + 1 != text.size()) fail(ErrorCode::Parse, fmt::format("trailing characters in '{}'", text));
  } else if (text[pos] == '+' || text[pos] == '-') {
    const int sign = text[pos] == '+' ? 1 : -1;
    const int oh = parse_digits(text, pos + 1, 2, text);
    std::size_t next = pos + 3;
    if (next < text.size() && text[next] == ':') ++next;
    const int om = parse_digits(text, next, 2, text);
    if (next + 2 != text.size()) fail(ErrorCode::Parse, fmt::format("trailing characters in '{}'", text));
    offset = sign * (oh * 60 + om);
  } else {
    fail(ErrorCode::Parse, fmt::format("bad UTC offset in '{}'", text));
  }

  const std::int64_t local = static_cast<std::int64_t>(date.days) * kSecondsPerDay + hh * 3600 + mm * 60 + ss;
  return Timestamp{local - static_cast<std::int64_t>(offset) * 60, offset};
}

Timestamp Timestamp::at_local(Date date, int minute_of_day, std::int32_t offset_minutes) {
  const std::int64_t local = static_cast<std::int64_t>(date.days) * kSecondsPerDay + minute_of_day * 60;
  return Timestamp{local - static_cast<std::int64_t>(offset_minutes) * 60, offset_minutes};
}

std::string Timestamp::to_string() const {
  const std::int64_t local = utc_seconds + static_cast<std::int64_t>(offset_minutes) * 60;
  const std::int64_t day = floor_div(local, kSecondsPerDay);
  const std::int64_t sod = local - day * kSecondsPerDay;
  const Date date{static_cast<std::int32_t>(day)};
  const int abs_off = offset_minutes < 0 ? -offset_minutes : offset_minutes;
  return fmt::format("{}T{:02d}:{:02d}:{:02d}{}{:02d}:{:02d}", date.to_string(), sod / 3600, (sod / 60) % 60,
                     sod % 60, offset_minutes < 0 ? '-' : '+', abs_off / 60, abs_off % 60);
}

Date Timestamp::local_date() const {
  const std::int64_t local = utc_seconds + static_cast<std::int64_t>(offset_minutes) * 60;
  return Date{static_cast<std::int32_t>(floor_div(local, kSecondsPerDay))};
}

int Timestamp::local_minute_of_day() const {
  const std::int64_t local = utc_seconds + static_cast<std::int64_t>(offset_minutes) * 60;
  const std::int64_t sod = local - floor_div(local, kSecondsPerDay) * kSecondsPerDay;
  return static_cast<int>(sod / 60);
}

Timestamp Timestamp::floor_minute() const {
  return Timestamp{floor_div(utc_seconds, 60) * 60, offset_minutes};
}

}  // namespace srlp
