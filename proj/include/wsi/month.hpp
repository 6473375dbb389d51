#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace wsi {

/// Calendar year-month. Ordered lexicographically on (year, month).
class MonthKey {
 public:
  constexpr MonthKey() = default;
  /// Throws wsi::Error when month is outside 1..12.
  MonthKey(int year, int month);

  constexpr int year() const noexcept { return year_; }
  constexpr int month() const noexcept { return month_; }

  /// Months since year 0 January; handy for distances and hashing.
  constexpr std::int64_t ordinal() const noexcept {
    return static_cast<std::int64_t>(year_) * 12 + (month_ - 1);
  }
  static MonthKey from_ordinal(std::int64_t ordinal);

  MonthKey plus(std::int64_t k) const { return from_ordinal(ordinal() + k); }
  MonthKey minus(std::int64_t k) const { return from_ordinal(ordinal() - k); }
  MonthKey next() const { return plus(1); }

  /// Accepts "YYYYMM" and "YYYY-MM"; nullopt on anything else, including month 13.
  static std::optional<MonthKey> parse(std::string_view text);
  /// "YYYYMM", the canonical file representation.
  std::string to_string() const;
  /// "YYYY-MM", used on chart axes.
  std::string to_iso() const;

  friend constexpr auto operator<=>(const MonthKey&, const MonthKey&) = default;

 private:
  int year_ = 2000;
  int month_ = 1;
};

/// Number of months from `a` to `b` (b - a).
inline std::int64_t months_between(MonthKey a, MonthKey b) {
  return b.ordinal() - a.ordinal();
}

/// Inclusive month range [first, last].
struct MonthRange {
  MonthKey first;
  MonthKey last;

  bool empty() const { return last < first; }
  std::int64_t size() const { return empty() ? 0 : months_between(first, last) + 1; }
  bool contains(MonthKey m) const { return !(m < first) && !(last < m); }
};

}  // namespace wsi

template <>
struct std::hash<wsi::MonthKey> {
  std::size_t operator()(const wsi::MonthKey& m) const noexcept {
    return std::hash<std::int64_t>{}(m.ordinal());
  }
};
