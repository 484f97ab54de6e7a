#include "traffic/timeutil.hpp"

#include <cstdio>

namespace traffic {

namespace {

// Civil <-> day-count conversions for a proleptic Gregorian calendar,
// after Howard Hinnant's chrono algorithms.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
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

std::int64_t floordiv(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t floormod(std::int64_t a, std::int64_t b) {
    return a - floordiv(a, b) * b;
}

}  // namespace

std::optional<std::int64_t> parse_iso8601(const std::string& text) {
    int y, mo, d, h, mi, s;
    char zone = 0, tail = 0;
    int n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c%c",
                        &y, &mo, &d, &h, &mi, &s, &zone, &tail);
    if (n != 7 || zone != 'Z') return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
    if (h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59) return std::nullopt;
    return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_iso8601(std::int64_t ts) {
    int y, mo, d;
    civil_from_days(floordiv(ts, 86400), y, mo, d);
    const int sod = static_cast<int>(floormod(ts, 86400));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ",
                  y, mo, d, sod / 3600, (sod / 60) % 60, sod % 60);
    return buf;
}

int minute_of_day(std::int64_t ts) {
    return static_cast<int>(floormod(ts, 86400) / 60);
}

int weekday(std::int64_t ts) {
    // 1970-01-01 was a Thursday (index 3 when Monday = 0).
    return static_cast<int>(floormod(floordiv(ts, 86400) + 3, 7));
}

}  // namespace traffic
