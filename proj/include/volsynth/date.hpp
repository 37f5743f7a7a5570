#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace volsynth {

// Calendar day with no timezone. Stored as days since the Unix epoch so that
// ordering and one-day stepping are plain integer operations.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days d) : days_(d.time_since_epoch().count()) {}

  static Date from_ymd(int y, unsigned m, unsigned d);
  // Accepts YYYY-MM-DD only.
  static std::optional<Date> parse(std::string_view text);

  std::string iso() const;
  std::chrono::sys_days sys() const { return std::chrono::sys_days{std::chrono::days{days_}}; }
  constexpr long serial() const { return days_; }

  Date next() const { return plus_days(1); }
  Date plus_days(long n) const;

  friend constexpr auto operator<=>(const Date&, const Date&) = default;
  friend constexpr long operator-(const Date& a, const Date& b) { return a.days_ - b.days_; }

 private:
  long days_ = 0;
};

}  // namespace volsynth
