#include "panelwatch/weather.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "panelwatch/error.hpp"

namespace panelwatch {

WeatherSeries::WeatherSeries(std::vector<WeatherSample> samples) : samples_(std::move(samples)) {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        if (i > 0 && s.timestamp <= samples_[i - 1].timestamp) {
            throw Error(ErrorCode::NonMonotonicTimestamps, format_timestamp(s.timestamp));
        }
        if (!(s.cloud_cover >= 0.0 && s.cloud_cover <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument,
                        fmt::format("cloud_cover {} outside [0,1] at {}", s.cloud_cover, format_timestamp(s.timestamp)));
        }
        if (!(s.snow_depth_cm >= 0.0)) {
            throw Error(ErrorCode::InvalidArgument,
                        fmt::format("negative snow depth at {}", format_timestamp(s.timestamp)));
        }
    }
}

std::optional<double> WeatherSeries::cloud_cover_at(Timestamp t, std::chrono::minutes max_gap) const {
    if (samples_.empty()) return std::nullopt;
    const auto after = std::lower_bound(samples_.begin(), samples_.end(), t,
                                        [](const WeatherSample& s, Timestamp v) { return s.timestamp < v; });
    if (after != samples_.end() && after->timestamp == t) return after->cloud_cover;
    if (after == samples_.begin()) {
        if (after->timestamp - t > max_gap) return std::nullopt;
        return after->cloud_cover;
    }
    const auto before = std::prev(after);
    if (after == samples_.end()) {
        if (t - before->timestamp > max_gap) return std::nullopt;
        return before->cloud_cover;
    }
    if (after->timestamp - before->timestamp > max_gap) return std::nullopt;
    const double span = std::chrono::duration<double>(after->timestamp - before->timestamp).count();
    const double w = std::chrono::duration<double>(t - before->timestamp).count() / span;
    return before->cloud_cover + w * (after->cloud_cover - before->cloud_cover);
}

std::optional<double> WeatherSeries::max_snow_depth(Date date, std::chrono::minutes utc_offset) const {
    const Timestamp from = day_start(date, utc_offset);
    const Timestamp to = from + std::chrono::days{1};
    std::optional<double> best;
    for (const auto& s : samples_) {
        if (s.timestamp < from || s.timestamp >= to) continue;
        best = std::max(best.value_or(0.0), s.snow_depth_cm);
    }
    return best;
}

bool WeatherSeries::covers(Timestamp from, Timestamp to) const {
    return std::any_of(samples_.begin(), samples_.end(),
                       [&](const WeatherSample& s) { return s.timestamp >= from && s.timestamp < to; });
}

}  // namespace panelwatch
