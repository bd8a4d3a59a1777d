#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panelwatch/layout.hpp"
#include "panelwatch/panel_matrix.hpp"
#include "panelwatch/weather.hpp"

namespace panelwatch {

// ---------------------------------------------------------------------------
// File formats

/// `timestamp,<panel_id_1>,...` with ISO-8601 UTC timestamps. Off-grid
/// timestamps snap to the nearest 5-minute point; duplicates average; empty
/// cells are missing; values in [-1, 0) clamp to 0.
PanelMatrix parse_power_csv(std::istream& in, std::chrono::minutes utc_offset = std::chrono::minutes{0});
PanelMatrix parse_power_csv(const std::filesystem::path& path,
                            std::chrono::minutes utc_offset = std::chrono::minutes{0});
void write_power_csv(std::ostream& out, const PanelMatrix& matrix);
void write_power_csv(const std::filesystem::path& path, const PanelMatrix& matrix);

/// `timestamp,cloud_cover,snow_depth,is_forecast`.
WeatherSeries parse_weather_csv(std::istream& in);
WeatherSeries parse_weather_csv(const std::filesystem::path& path);
void write_weather_csv(std::ostream& out, const WeatherSeries& weather);
void write_weather_csv(const std::filesystem::path& path, const WeatherSeries& weather);

/// `panel_id,roof_plane,tilt_deg,azimuth_deg,capacity_w`, optionally preceded
/// by `# latitude=`, `# longitude=` and `# utc_offset_min=` comment lines.
ArrayLayout parse_layout(std::istream& in);
ArrayLayout parse_layout(const std::filesystem::path& path);
void write_layout(std::ostream& out, const ArrayLayout& layout);
void write_layout(const std::filesystem::path& path, const ArrayLayout& layout);

/// Rejects any cell above twice the panel nameplate (a unit error guard).
void check_power_bounds(const PanelMatrix& matrix, const ArrayLayout& layout);

// ---------------------------------------------------------------------------
// Day segmentation

struct DaylightRule {
    double array_nameplate_w = 0.0;
    double epsilon_fraction = 0.01;
    /// When set, a row is daylight iff the sun is above the horizon at this
    /// location, replacing the power threshold.
    std::optional<Location> sun_geometry;
};

DaylightRule daylight_rule_for(const ArrayLayout& layout);

struct DaySlice {
    Date date;
    PanelMatrix matrix;               // daylight rows only
    PanelMatrix all_rows;             // every row of the local date
    std::vector<bool> daylight_mask;  // one entry per row of all_rows

    bool no_daylight() const { return matrix.empty(); }
};

std::vector<DaySlice> segment_days(const PanelMatrix& matrix, const DaylightRule& rule);

// ---------------------------------------------------------------------------
// Day labels

enum class CapacityLevel { High, Low };
enum class CorrelationLevel { Strong, Moderate, Low };
enum class DayCondition { Normal, PartialShaded, ObjectCover, LowPowerDefect, ProductionIssue, UnknownIssue };

std::string_view to_string(CapacityLevel v);
std::string_view to_string(CorrelationLevel v);
std::string_view to_string(DayCondition v);

struct LabelThresholds {
    double capacity_high = 0.6;
    double corr_strong = 0.9;
    double corr_moderate = 0.6;
};

struct CapacityResult {
    CapacityLevel level;
    double ratio;
};

struct CorrelationResult {
    CorrelationLevel level;
    double r_mean;
};

/// Ingest never assigns `condition`; it is filled by the classifier or ground truth.
struct DayLabel {
    CapacityLevel capacity_level;
    CorrelationLevel correlation_level;
    std::optional<DayCondition> condition;
};

/// Throws AllMissing when the panel has no daylight sample.
CapacityResult capacity_level(const DaySlice& day, std::string_view panel_id, double nameplate_w,
                              const LabelThresholds& thresholds = {});

/// Mean pairwise-complete Pearson r against every other panel. Throws
/// InsufficientOverlap when some pair shares fewer than 3 samples.
CorrelationResult correlation_level(const DaySlice& day, std::string_view panel_id,
                                    const LabelThresholds& thresholds = {});

DayLabel label_day(const DaySlice& day, std::string_view panel_id, double nameplate_w,
                   const LabelThresholds& thresholds = {});

/// Pearson r over pairwise-complete samples; 0 when either side has zero
/// variance. Throws InsufficientOverlap below `min_overlap` pairs.
double pearson(std::span<const double> x, std::span<const double> y, std::size_t min_overlap = 3);

}  // namespace panelwatch
