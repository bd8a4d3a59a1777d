#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "panelwatch/layout.hpp"
#include "panelwatch/panel_matrix.hpp"
#include "panelwatch/weather.hpp"

namespace panelwatch {

enum class WeatherProfile { Sunny, Overcast, Scattered };
enum class FaultKind { Snow, Occlusion, OpenCircuit, WaterDrops };

std::string_view to_string(WeatherProfile v);
std::string_view to_string(FaultKind v);
WeatherProfile parse_weather_profile(std::string_view text);
FaultKind parse_fault_kind(std::string_view text);

struct FaultSpec {
    std::string panel_id;
    Date date;
    FaultKind kind = FaultKind::Occlusion;
    double severity = 1.0;
    /// Local time-of-day window; the whole day when unset.
    std::optional<std::chrono::minutes> start;
    std::optional<std::chrono::minutes> end;
};

/// Recurring static shade on one panel, applied every simulated day.
struct ShadeSpec {
    std::string panel_id;
    std::chrono::minutes start{0};
    std::chrono::minutes end{0};
    double depth = 0.0;  // fraction of output removed inside the window
};

struct TruthLabel {
    std::string panel_id;
    Date date;
    FaultKind kind;
    double severity;

    friend bool operator==(const TruthLabel&, const TruthLabel&) = default;
};

struct SimOptions {
    double noise_sigma = 0.02;
    double gain_low = 0.93;
    double gain_high = 1.07;
    std::vector<ShadeSpec> shades;
    /// Per-date weather override; when non-empty it must match `dates` in length.
    std::vector<WeatherProfile> daily_profiles;
};

struct SimOutput {
    PanelMatrix matrix;
    WeatherSeries weather;
    std::vector<TruthLabel> truth;
    ArrayLayout layout;        // input layout with every panel gain resolved
    std::vector<bool> sun_up;  // per matrix row
};

/// Deterministic per-panel power for whole local days on the 5-minute grid.
///
/// power = clear_sky * weather * shade * fault * (1 + noise_sigma * N(0,1)).
/// Every random stream is keyed by (seed, purpose, date, panel) so adding a
/// fault to one panel never perturbs another panel's column.
SimOutput simulate(const ArrayLayout& layout, const std::vector<Date>& dates, WeatherProfile profile,
                   const std::vector<FaultSpec>& faults, std::uint64_t seed, const SimOptions& options = {});

std::vector<Date> consecutive_dates(Date first, int count);

/// Daily profiles drawn half Sunny, 30% Scattered, 20% Overcast.
std::vector<WeatherProfile> draw_profiles(std::mt19937_64& rng, std::size_t count);

void write_truth_csv(std::ostream& out, const std::vector<TruthLabel>& truth);
void write_truth_csv(const std::filesystem::path& path, const std::vector<TruthLabel>& truth);
std::vector<TruthLabel> parse_truth_csv(const std::filesystem::path& path);

namespace layouts {

inline constexpr Location kWesternMassachusetts{42.4, -72.5};
inline constexpr std::chrono::minutes kEasternStandard{-300};

/// `count` identical-geometry panels ("P01".."Pnn") on one plane.
ArrayLayout single_plane(int count, double tilt_deg = 30.0, double azimuth_deg = 180.0);

/// Twelve panels on four planes of three (east, west, south, lower).
ArrayLayout four_plane_home();

/// Panels A, B, C, D on one plane.
ArrayLayout abcd();

}  // namespace layouts

}  // namespace panelwatch
