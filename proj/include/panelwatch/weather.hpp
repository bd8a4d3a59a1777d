#pragma once

#include <chrono>
#include <optional>
#include <vector>

#include "panelwatch/time.hpp"

namespace panelwatch {

struct WeatherSample {
    Timestamp timestamp;
    double cloud_cover = 0.0;  // fraction in [0,1]
    double snow_depth_cm = 0.0;
    bool is_forecast = false;

    friend bool operator==(const WeatherSample&, const WeatherSample&) = default;
};

/// Site weather; samples are strictly increasing in time.
class WeatherSeries {
public:
    WeatherSeries() = default;
    /// Throws NonMonotonicTimestamps or InvalidArgument on out-of-range values.
    explicit WeatherSeries(std::vector<WeatherSample> samples);

    const std::vector<WeatherSample>& samples() const { return samples_; }
    bool empty() const { return samples_.empty(); }

    /// Linear interpolation of cloud cover at `t`. Returns nullopt when the
    /// nearest samples bracketing `t` are more than `max_gap` apart (or `t`
    /// lies further than `max_gap` beyond either end).
    std::optional<double> cloud_cover_at(Timestamp t,
                                         std::chrono::minutes max_gap = std::chrono::minutes{60}) const;

    /// Largest snow depth reported on local `date`; nullopt if no sample falls on it.
    std::optional<double> max_snow_depth(Date date, std::chrono::minutes utc_offset) const;

    /// True when at least one sample lies in [from, to).
    bool covers(Timestamp from, Timestamp to) const;

    friend bool operator==(const WeatherSeries&, const WeatherSeries&) = default;

private:
    std::vector<WeatherSample> samples_;
};

}  // namespace panelwatch
