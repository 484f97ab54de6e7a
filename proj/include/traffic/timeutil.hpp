#ifndef TRAFFIC_TIMEUTIL_HPP
#define TRAFFIC_TIMEUTIL_HPP

#include <cstdint>
#include <optional>
#include <string>

namespace traffic {

// Unix timestamps (seconds, UTC) everywhere. No timezone arithmetic.

// Parses "YYYY-MM-DDTHH:MM:SSZ". Returns nullopt on malformed input.
std::optional<std::int64_t> parse_iso8601(const std::string& text);

// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601(std::int64_t ts);

// Minute of day in [0, 1440).
int minute_of_day(std::int64_t ts);

// 0 = Monday .. 6 = Sunday.
int weekday(std::int64_t ts);

inline bool is_weekend(std::int64_t ts) { return weekday(ts) >= 5; }

}  // namespace traffic

#endif
