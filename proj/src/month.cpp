#include "wsi/month.hpp"

#include <charconv>

#include <fmt/format.h>

#include "wsi/error.hpp"

namespace wsi {

MonthKey::MonthKey(int year, int month) : year_(year), month_(month) {
  if (month < 1 || month > 12) {
    throw Error(fmt::format("invalid month {} in year {}", month, year));
  }
}

MonthKey MonthKey::from_ordinal(std::int64_t ordinal) {
  // floor division so that negative ordinals still land on month 1..12
  std::int64_t year = ordinal >= 0 ? ordinal / 12 : -((-ordinal + 11) / 12);
  auto month = static_cast<int>(ordinal - year * 12) + 1;
  return MonthKey(static_cast<int>(year), month);
}

namespace {

std::optional<int> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

std::optional<MonthKey> MonthKey::parse(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  std::string_view year_part;
  std::string_view month_part;
  if (text.size() == 6) {
    year_part = text.substr(0, 4);
    month_part = text.substr(4, 2);
  } else if (text.size() == 7 && text[4] == '-') {
    year_part = text.substr(0, 4);
    month_part = text.substr(5, 2);
  } else {
    return std::nullopt;
  }
  auto y = parse_int(year_part);
  auto m = parse_int(month_part);
  if (!y || !m || *m < 1 || *m > 12) return std::nullopt;
  return MonthKey(*y, *m);
}

std::string MonthKey::to_string() const { return fmt::format("{:04d}{:02d}", year_, month_); }

std::string MonthKey::to_iso() const { return fmt::format("{:04d}-{:02d}", year_, month_); }

}  // namespace wsi
