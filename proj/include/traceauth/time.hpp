#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace traceauth {

// Timestamps throughout the library are civil (wall-clock) seconds since
// 1970-01-01 00:00:00. Traces carry local time; nothing converts to UTC.
using CivilSeconds = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::int64_t kSecondsPerWeek = 7 * kSecondsPerDay;

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

inline std::int64_t day_index(CivilSeconds t) {
    return floor_div(t, kSecondsPerDay);
}

inline int second_of_day(CivilSeconds t) {
    return static_cast<int>(t - day_index(t) * kSecondsPerDay);
}

// 0 = Sunday ... 6 = Saturday (1970-01-01 was a Thursday).
inline int weekday_of(CivilSeconds t) {
    return static_cast<int>(((day_index(t) + 4) % 7 + 7) % 7);
}

inline CivilSeconds civil_seconds(int year, unsigned month, unsigned day,
                                  int hour = 0, int minute = 0, int second = 0) {
    const std::chrono::year_month_day ymd{std::chrono::year{year},
                                          std::chrono::month{month},
                                          std::chrono::day{day}};
    if (!ymd.ok())
        throw std::invalid_argument("invalid calendar date");
    const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
    return static_cast<CivilSeconds>(days) * kSecondsPerDay +
           hour * 3600 + minute * 60 + second;
}

struct CivilParts {
    int year;
    unsigned month;
    unsigned day;
    int hour;
    int minute;
    int second;
};

inline CivilParts civil_parts(CivilSeconds t) {
    const std::chrono::year_month_day ymd{
        std::chrono::sys_days{std::chrono::days{day_index(t)}}};
    const int sod = second_of_day(t);
    return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
            static_cast<unsigned>(ymd.day()), sod / 3600, (sod / 60) % 60, sod % 60};
}

// "2009-04-22T10:46:00"; a space separator is accepted on input.
inline std::string format_iso8601(CivilSeconds t) {
    const CivilParts p = civil_parts(t);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d",
                  p.year, p.month, p.day, p.hour, p.minute, p.second);
    return buf;
}

inline CivilSeconds parse_iso8601(const std::string& s) {
    int y, mo, d, h, mi, se;
    char sep;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &se) != 7 ||
        (sep != 'T' && sep != ' '))
        throw std::invalid_argument("malformed timestamp: " + s);
    if (h < 0 || h > 23 || mi < 0 || mi > 59 || se < 0 || se > 60)
        throw std::invalid_argument("malformed timestamp: " + s);
    return civil_seconds(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, se);
}

} // namespace traceauth
