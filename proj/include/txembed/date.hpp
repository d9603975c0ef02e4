#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace txembed {

/// A calendar day. Arithmetic is in whole days.
using Day = std::chrono::sys_days;

/// Parses YYYY-MM-DD. Throws ParseError for malformed or impossible dates.
Day parse_iso_date(std::string_view text);
std::string format_iso_date(Day day);

inline Day add_days(Day d, long n) { return d + std::chrono::days{n}; }
inline long days_between(Day from, Day to) { return (to - from).count(); }

/// Whole years elapsed from `birth` to `at` (floor).
int age_in_years(Day birth, Day at);

}  // namespace txembed
