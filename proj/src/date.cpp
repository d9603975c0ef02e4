#include "txembed/date.hpp"

#include <cstdio>

#include "txembed/error.hpp"

namespace txembed {

namespace {

bool all_digits(std::string_view s) {
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return !s.empty();
}

int to_int(std::string_view s) {
    int v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    return v;
}

}  // namespace

Day parse_iso_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !all_digits(text.substr(0, 4)) ||
        !all_digits(text.substr(5, 2)) || !all_digits(text.substr(8, 2)))
        throw ParseError("malformed date '" + std::string(text) + "' (expected YYYY-MM-DD)");
    using namespace std::chrono;
    year_month_day ymd{year{to_int(text.substr(0, 4))}, month{static_cast<unsigned>(to_int(text.substr(5, 2)))},
                       day{static_cast<unsigned>(to_int(text.substr(8, 2)))}};
    if (!ymd.ok()) throw ParseError("invalid calendar date '" + std::string(text) + "'");
    return sys_days{ymd};
}

std::string format_iso_date(Day d) {
    using namespace std::chrono;
    year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

int age_in_years(Day birth, Day at) {
    using namespace std::chrono;
    year_month_day b{birth}, a{at};
    int years = static_cast<int>(a.year()) - static_cast<int>(b.year());
    if (a.month() < b.month() || (a.month() == b.month() && a.day() < b.day())) --years;
    return years;
}

}  // namespace txembed
