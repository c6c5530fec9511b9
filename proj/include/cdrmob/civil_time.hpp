#pragma once

// Local civil time helpers. Timestamps are seconds since 1970-01-01T00:00:00
// on the local wall clock: no time zone and no DST adjustment is applied, so
// hour-of-day values are exactly what the CDR file says.

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace cdrmob {

inline constexpr std::int64_t kSecondsPerDay = 86400;

struct CivilDate {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
};

// Days since 1970-01-01 (proleptic Gregorian), after H. Hinnant's algorithm.
constexpr std::int64_t days_from_civil(int y, int m, int d) noexcept {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr CivilDate civil_from_days(std::int64_t z) noexcept {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

constexpr bool is_leap_year(int y) noexcept {
  return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

constexpr int days_in_month(int y, int m) noexcept {
  constexpr std::array<int, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap_year(y) ? 29 : kDays[static_cast<std::size_t>(m - 1)];
}

constexpr int days_in_year(int y) noexcept { return is_leap_year(y) ? 366 : 365; }

// 0 = Monday ... 6 = Sunday.
constexpr int weekday_from_days(std::int64_t z) noexcept {
  // 1970-01-01 was a Thursday.
  return static_cast<int>(((z % 7) + 7 + 3) % 7);
}

inline constexpr std::array<std::string_view, 7> kWeekdayNames{"Mon", "Tue", "Wed", "Thu",
                                                               "Fri", "Sat", "Sun"};
inline constexpr std::array<std::string_view, 12> kMonthNames{
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
  const std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

constexpr std::int64_t year_start(int year) noexcept {
  return days_from_civil(year, 1, 1) * kSecondsPerDay;
}

constexpr std::int64_t day_of(std::int64_t ts) noexcept { return floor_div(ts, kSecondsPerDay); }

constexpr int second_of_day(std::int64_t ts) noexcept {
  return static_cast<int>(ts - day_of(ts) * kSecondsPerDay);
}

namespace detail {

inline bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t k = pos; k < pos + len; ++k)
    if (s[k] < '0' || s[k] > '9') return false;
  auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return ec == std::errc{} && p == s.data() + pos + len;
}

}  // namespace detail

// Accepts "YYYY-MM-DDTHH:MM[:SS]" or the same with a space separator.
inline std::optional<std::int64_t> parse_timestamp(std::string_view s) {
  int y, mo, d, h, mi, sec = 0;
  if (s.size() != 16 && s.size() != 19) return std::nullopt;
  if (!detail::parse_fixed(s, 0, 4, y) || s[4] != '-' || !detail::parse_fixed(s, 5, 2, mo) ||
      s[7] != '-' || !detail::parse_fixed(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') ||
      !detail::parse_fixed(s, 11, 2, h) || s[13] != ':' || !detail::parse_fixed(s, 14, 2, mi))
    return std::nullopt;
  if (s.size() == 19 && (s[16] != ':' || !detail::parse_fixed(s, 17, 2, sec))) return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > days_in_month(y, mo) || h > 23 || mi > 59 || sec > 59)
    return std::nullopt;
  return days_from_civil(y, mo, d) * kSecondsPerDay + h * 3600 + mi * 60 + sec;
}

inline std::string format_timestamp(std::int64_t ts) {
  const std::int64_t day = day_of(ts);
  const CivilDate c = civil_from_days(day);
  const int sod = static_cast<int>(ts - day * kSecondsPerDay);
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02d-%02dT%02d:%02d:%02d", c.year, c.month, c.day,
                sod / 3600, (sod / 60) % 60, sod % 60);
  return buf.data();
}

// "HH:MM" for a minute-of-day in [0, 1440].
inline std::string format_clock(int minute_of_day) {
  std::array<char, 24> buf{};
  std::snprintf(buf.data(), buf.size(), "%02d:%02d", minute_of_day / 60, minute_of_day % 60);
  return buf.data();
}

inline std::optional<int> parse_clock(std::string_view s) {
  int h, m;
  if (s.size() != 5 || s[2] != ':' || !detail::parse_fixed(s, 0, 2, h) ||
      !detail::parse_fixed(s, 3, 2, m) || m > 59 || h > 24 || (h == 24 && m != 0))
    return std::nullopt;
  return h * 60 + m;
}

// Calendar lookup for one analysis year: day index (0-based) to month / weekday.
class YearCalendar {
 public:
  explicit YearCalendar(int year) : year_(year), start_(cdrmob::year_start(year)) {
    const std::int64_t first_day = days_from_civil(year, 1, 1);
    int idx = 0;
    for (int m = 1; m <= 12; ++m)
      for (int d = 1; d <= days_in_month(year, m); ++d, ++idx) {
        month_[static_cast<std::size_t>(idx)] = static_cast<std::uint8_t>(m - 1);
        weekday_[static_cast<std::size_t>(idx)] =
            static_cast<std::uint8_t>(weekday_from_days(first_day + idx));
      }
    days_ = idx;
  }

  int year() const noexcept { return year_; }
  int days() const noexcept { return days_; }
  std::int64_t start() const noexcept { return start_; }
  std::int64_t end() const noexcept { return start_ + days_ * kSecondsPerDay; }
  bool contains(std::int64_t ts) const noexcept { return ts >= start_ && ts < end(); }

  // Caller guarantees contains(ts).
  int day_index(std::int64_t ts) const noexcept {
    return static_cast<int>((ts - start_) / kSecondsPerDay);
  }
  int month_of_day(int day) const noexcept { return month_[static_cast<std::size_t>(day)]; }
  int weekday_of_day(int day) const noexcept { return weekday_[static_cast<std::size_t>(day)]; }
  std::int64_t day_start(int day) const noexcept { return start_ + day * kSecondsPerDay; }

  std::string day_label(int day) const {
    const CivilDate c = civil_from_days(days_from_civil(year_, 1, 1) + day);
    std::array<char, 40> buf{};
    std::snprintf(buf.data(), buf.size(), "%04d-%02d-%02d", c.year, c.month, c.day);
    return buf.data();
  }

 private:
  int year_;
  std::int64_t start_;
  int days_ = 0;
  std::array<std::uint8_t, 366> month_{};
  std::array<std::uint8_t, 366> weekday_{};
};

}  // namespace cdrmob
