#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace ueba {

// Civil-time <-> epoch conversions, UTC only, seconds resolution.
// Self-contained (no timezone database, no locale) so that parsing and
// formatting are identical on every host.

struct CivilTime {
    int year;
    int month;   // 1..12
    int day;     // 1..31
    int hour;    // 0..23
    int minute;  // 0..59
    int second;  // 0..59
};

namespace detail {

// days since 1970-01-01 for a civil date (Howard Hinnant's algorithm)
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

}  // namespace detail

inline std::int64_t to_epoch(const CivilTime& c) {
    return detail::days_from_civil(c.year, c.month, c.day) * 86400 + c.hour * 3600 +
           c.minute * 60 + c.second;
}

inline CivilTime from_epoch(std::int64_t t) {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    CivilTime c{};
    detail::civil_from_days(days, c.year, c.month, c.day);
    c.hour = static_cast<int>(rem / 3600);
    c.minute = static_cast<int>((rem % 3600) / 60);
    c.second = static_cast<int>(rem % 60);
    return c;
}

// "2017-05-02T09:08:19Z"
inline std::string format_iso(std::int64_t t) {
    const CivilTime c = from_epoch(t);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", c.year, c.month, c.day,
                  c.hour, c.minute, c.second);
    return buf;
}

inline std::int64_t parse_iso(const std::string& s) {
    CivilTime c{};
    char sep = 0, z = 0;
    const int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d%c", &c.year, &c.month, &c.day, &sep,
                              &c.hour, &c.minute, &c.second, &z);
    const bool sep_ok = (sep == 'T' || sep == ' ');
    if (n < 7 || !sep_ok || c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31 ||
        c.hour > 23 || c.minute > 59 || c.second > 59) {
        throw std::invalid_argument("parse_iso: bad timestamp '" + s + "'");
    }
    if (n == 8 && z != 'Z') throw std::invalid_argument("parse_iso: bad timezone suffix in '" + s + "'");
    return to_epoch(c);
}

// 0 = Monday .. 6 = Sunday
inline int weekday(std::int64_t t) {
    std::int64_t days = t / 86400;
    if (t % 86400 < 0) --days;
    return static_cast<int>(((days % 7) + 10) % 7);  // 1970-01-01 was a Thursday
}

inline bool is_weekend(std::int64_t t) { return weekday(t) >= 5; }

// hour of day as a fraction, e.g. 14.5 for 14:30
inline double hour_of_day(std::int64_t t) {
    std::int64_t rem = t % 86400;
    if (rem < 0) rem += 86400;
    return static_cast<double>(rem) / 3600.0;
}

constexpr std::int64_t kDay = 86400;
constexpr std::int64_t kHour = 3600;

}  // namespace ueba
