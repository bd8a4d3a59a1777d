#pragma once

#include <chrono>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panelwatch/ingest.hpp"
#include "panelwatch/weather.hpp"

namespace panelwatch {

/// Envelope-times-attenuation forecaster for one panel:
/// forecast(t) = profile[month][slot(t)] * max(0, 1 - cloud_response * cloud_cover(t)).
struct ForecastModel {
    std::string panel_id;
    double capacity_w = 0.0;
    std::map<unsigned, std::vector<double>> profiles;  // calendar month -> watts per slot
    double cloud_response = 0.75;
    bool cloud_response_defaulted = false;

    /// Profile of `month`, or of the nearest fitted month (ties go to the earlier one).
    const std::vector<double>& profile_for(unsigned month) const;
};

inline constexpr double kDefaultCloudResponse = 0.75;

/// Fits from fault-free history. Throws InsufficientHistory with fewer than
/// three days covered by weather, NoWeatherOverlap when no day is covered.
ForecastModel fit_forecaster(std::string_view panel_id, std::span<const DaySlice> history,
                             const WeatherSeries& weather, double capacity_w);

/// Forecast for every 5-minute slot of local `date`. Throws WeatherGap when a
/// slot with a non-zero profile is further than 60 minutes from weather data.
std::vector<double> forecast(const ForecastModel& model, Date date, std::chrono::minutes utc_offset,
                             const WeatherSeries& weather);

enum class InputQuality { Normal, Noisy };
std::string_view to_string(InputQuality q);

struct InputLabel {
    std::string panel_id;
    Date date;
    InputQuality label = InputQuality::Normal;
    double divergence = 0.0;
};

struct LabelConfig {
    double noisy_threshold = 0.35;
    /// Denominator floor as a fraction of the panel's nominal daily nameplate energy.
    double floor_fraction = 0.02;
};

/// Nominal daily energy of a panel in Wh: nameplate over a 12-hour day.
inline double nominal_daily_energy_wh(double capacity_w) { return capacity_w * 12.0; }

/// Labels every panel of `day`. divergence = max(0, E_forecast - E_observed) /
/// max(E_forecast, floor) over the day's rows with an observation.
/// `forecasts` maps panel id to a per-slot forecast; `capacities` panel id to nameplate.
std::vector<InputLabel> label_inputs(const DaySlice& day, const std::map<std::string, std::vector<double>>& forecasts,
                                     const std::map<std::string, double>& capacities, const LabelConfig& config = {});

}  // namespace panelwatch
