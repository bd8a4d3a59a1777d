#include "panelwatch/forecaster.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "panelwatch/error.hpp"

namespace panelwatch {

const std::vector<double>& ForecastModel::profile_for(unsigned month) const {
    if (profiles.empty()) throw Error(ErrorCode::InsufficientHistory, fmt::format("{} has no profile", panel_id));
    if (auto it = profiles.find(month); it != profiles.end()) return it->second;
    const std::vector<double>* best = nullptr;
    unsigned best_distance = 13;
    for (const auto& [m, profile] : profiles) {
        const unsigned diff = m > month ? m - month : month - m;
        const unsigned distance = std::min(diff, 12 - diff);
        if (distance < best_distance) {
            best_distance = distance;
            best = &profile;
        }
    }
    return *best;
}

ForecastModel fit_forecaster(std::string_view panel_id, std::span<const DaySlice> history,
                             const WeatherSeries& weather, double capacity_w) {
    if (history.size() < 3) {
        throw Error(ErrorCode::InsufficientHistory, fmt::format("{} training days, need 3", history.size()));
    }
    std::vector<const DaySlice*> covered;
    for (const auto& day : history) {
        const Timestamp from = day_start(day.date, day.all_rows.utc_offset());
        if (weather.covers(from, from + std::chrono::days{1})) covered.push_back(&day);
    }
    if (covered.empty()) throw Error(ErrorCode::NoWeatherOverlap, fmt::format("no weather for {}", panel_id));
    if (covered.size() < 3) {
        throw Error(ErrorCode::InsufficientHistory,
                    fmt::format("{} training days with weather, need 3", covered.size()));
    }

    ForecastModel model;
    model.panel_id = std::string(panel_id);
    model.capacity_w = capacity_w;
    for (const DaySlice* day : covered) {
        const auto& rows = day->all_rows;
        const std::size_t col = rows.require_index(panel_id);
        auto& profile = model.profiles[unsigned(day->date.month())];
        profile.resize(kSlotsPerDay, 0.0);
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            const double v = rows(r, col);
            if (is_missing(v)) continue;
            auto& slot = profile[slot_of_day(rows.timestamps()[r], rows.utc_offset())];
            slot = std::max(slot, v);
        }
    }

    // least squares for c in: profile - observed = c * profile * cloud
    double num = 0.0;
    double den = 0.0;
    double scale = 0.0;
    for (const DaySlice* day : covered) {
        const auto& rows = day->all_rows;
        const std::size_t col = rows.require_index(panel_id);
        const auto& profile = model.profiles.at(unsigned(day->date.month()));
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            const double obs = rows(r, col);
            const double p = profile[slot_of_day(rows.timestamps()[r], rows.utc_offset())];
            if (is_missing(obs) || p <= 0.0) continue;
            const auto cloud = weather.cloud_cover_at(rows.timestamps()[r]);
            if (!cloud) continue;
            const double a = p * *cloud;
            num += a * (p - obs);
            den += a * a;
            scale += p * p;
        }
    }
    if (den <= 1e-9 * scale || den == 0.0) {
        model.cloud_response = kDefaultCloudResponse;
        model.cloud_response_defaulted = true;
    } else {
        model.cloud_response = std::clamp(num / den, 0.0, 1.5);
    }
    return model;
}

std::vector<double> forecast(const ForecastModel& model, Date date, std::chrono::minutes utc_offset,
                             const WeatherSeries& weather) {
    const auto& profile = model.profile_for(unsigned(date.month()));
    const Timestamp start = day_start(date, utc_offset);
    std::vector<double> out(kSlotsPerDay, 0.0);
    for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
        if (profile[s] <= 0.0) continue;
        const Timestamp t = start + kSampleInterval * static_cast<int>(s);
        const auto cloud = weather.cloud_cover_at(t);
        if (!cloud) {
            throw Error(ErrorCode::WeatherGap, fmt::format("no weather within 60 minutes of {}", format_timestamp(t)));
        }
        const double v = profile[s] * std::max(0.0, 1.0 - model.cloud_response * *cloud);
        out[s] = std::clamp(v, 0.0, model.capacity_w);
    }
    return out;
}

std::string_view to_string(InputQuality q) { return q == InputQuality::Normal ? "Normal" : "Noisy"; }

std::vector<InputLabel> label_inputs(const DaySlice& day, const std::map<std::string, std::vector<double>>& forecasts,
                                     const std::map<std::string, double>& capacities, const LabelConfig& config) {
    const auto& rows = day.all_rows;
    std::vector<InputLabel> labels;
    for (std::size_t c = 0; c < rows.cols(); ++c) {
        const std::string& id = rows.panel_ids()[c];
        const auto f = forecasts.find(id);
        const auto cap = capacities.find(id);
        if (f == forecasts.end() || cap == capacities.end()) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("no forecast or capacity for {}", id));
        }
        if (f->second.size() != kSlotsPerDay) throw Error(ErrorCode::LengthMismatch, "forecast must cover every slot");
        double observed = 0.0;
        double expected = 0.0;
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            const double v = rows(r, c);
            if (is_missing(v)) continue;
            observed += v * kSampleHours;
            expected += f->second[slot_of_day(rows.timestamps()[r], rows.utc_offset())] * kSampleHours;
        }
        const double floor = config.floor_fraction * nominal_daily_energy_wh(cap->second);
        const double divergence = std::max(0.0, expected - observed) / std::max(expected, floor);
        labels.push_back(InputLabel{id, day.date,
                                    divergence > config.noisy_threshold ? InputQuality::Noisy : InputQuality::Normal,
                                    divergence});
    }
    return labels;
}

}  // namespace panelwatch
