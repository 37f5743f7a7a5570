#include "volsynth/date.hpp"

#include <charconv>
#include <cstdio>

namespace volsynth {

namespace {

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

Date Date::from_ymd(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  return Date(sys_days{year{y} / month{m} / day{d}});
}

std::optional<Date> Date::parse(std::string_view text) {
  using namespace std::chrono;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto y = parse_int(text.substr(0, 4));
  auto m = parse_int(text.substr(5, 2));
  auto d = parse_int(text.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  year_month_day ymd{year{*y}, month{static_cast<unsigned>(*m)}, day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date(sys_days{ymd});
}

std::string Date::iso() const {
  using namespace std::chrono;
  year_month_day ymd{sys()};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Date Date::plus_days(long n) const {
  Date out = *this;
  out.days_ += n;
  return out;
}

}  // namespace volsynth
