#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>

namespace panelwatch {

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::year_month_day;

inline constexpr std::chrono::minutes kSampleInterval{5};
inline constexpr std::size_t kSlotsPerDay = 24 * 60 / 5;
inline constexpr double kSampleHours = 5.0 / 60.0;

/// Missing observations are stored as quiet NaN throughout the data plane.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Accepts `YYYY-MM-DDTHH:MM[:SS][Z|+00:00]` (a space may replace `T`).
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

Date parse_date(std::string_view text);
std::string format_date(Date d);

/// Calendar date of `t` on a clock shifted by `utc_offset` from UTC.
Date local_date(Timestamp t, std::chrono::minutes utc_offset);

/// Index of the 5-minute slot of the local day, in [0, kSlotsPerDay).
std::size_t slot_of_day(Timestamp t, std::chrono::minutes utc_offset);

/// UTC instant at which local `date` begins.
Timestamp day_start(Date date, std::chrono::minutes utc_offset);

inline Date previous_day(Date d) { return Date{std::chrono::sys_days{d} - std::chrono::days{1}}; }
inline Date next_day(Date d) { return Date{std::chrono::sys_days{d} + std::chrono::days{1}}; }

}  // namespace panelwatch
