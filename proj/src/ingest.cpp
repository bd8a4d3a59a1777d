#include "panelwatch/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "csv.hpp"
#include "panelwatch/error.hpp"
#include "panelwatch/solar.hpp"

namespace panelwatch {

// ---------------------------------------------------------------------------
// Power CSV

PanelMatrix parse_power_csv(std::istream& in, std::chrono::minutes utc_offset) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedHeader, "empty power file");
    const auto header = csv::split(line);
    if (header.size() < 3 || header[0] != "timestamp") {
        throw Error(ErrorCode::MalformedHeader, "expected 'timestamp,<panel_id>,<panel_id>,...'");
    }
    std::vector<PowerSeries> series(header.size() - 1);
    for (std::size_t p = 0; p < series.size(); ++p) {
        if (header[p + 1].empty()) throw Error(ErrorCode::MalformedHeader, "empty panel id");
        series[p].panel_id = std::string(header[p + 1]);
    }

    std::size_t line_no = 1;
    std::optional<Timestamp> previous;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto cells = csv::split(line);
        if (cells.size() != header.size()) {
            throw Error(ErrorCode::MalformedRow,
                        fmt::format("line {}: {} cells, header has {}", line_no, cells.size(), header.size()));
        }
        const Timestamp t = parse_timestamp(cells[0]);
        if (previous && t <= *previous) {
            throw Error(ErrorCode::NonMonotonicTimestamps, fmt::format("line {}: {}", line_no, cells[0]));
        }
        previous = t;
        for (std::size_t p = 0; p < series.size(); ++p) {
            double w = kMissing;
            if (auto v = csv::parse_number(cells[p + 1], line_no)) {
                w = *v;
                if (w < -1.0) {
                    throw Error(ErrorCode::NegativePower, fmt::format("line {}: {} W", line_no, w));
                }
                if (w < 0.0) w = 0.0;
            }
            series[p].timestamps.push_back(t);
            series[p].watts.push_back(w);
        }
    }
    if (!previous) throw Error(ErrorCode::EmptyInput, "power file has no rows");
    return align_series(series, utc_offset);
}

PanelMatrix parse_power_csv(const std::filesystem::path& path, std::chrono::minutes utc_offset) {
    auto in = csv::open_in(path);
    return parse_power_csv(in, utc_offset);
}

void write_power_csv(std::ostream& out, const PanelMatrix& matrix) {
    out << "timestamp";
    for (const auto& id : matrix.panel_ids()) out << ',' << id;
    out << '\n';
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        out << format_timestamp(matrix.timestamps()[r]);
        for (std::size_t c = 0; c < matrix.cols(); ++c) {
            out << ',';
            const double v = matrix(r, c);
            if (!is_missing(v)) out << fmt::format("{}", v);
        }
        out << '\n';
    }
}

void write_power_csv(const std::filesystem::path& path, const PanelMatrix& matrix) {
    auto out = csv::open_out(path);
    write_power_csv(out, matrix);
}

// ---------------------------------------------------------------------------
// Weather CSV

WeatherSeries parse_weather_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) return WeatherSeries{};
    const auto header = csv::split(line);
    const std::vector<std::string_view> expected{"timestamp", "cloud_cover", "snow_depth", "is_forecast"};
    if (header != expected) {
        throw Error(ErrorCode::MalformedHeader, "expected 'timestamp,cloud_cover,snow_depth,is_forecast'");
    }
    std::vector<WeatherSample> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto cells = csv::split(line);
        if (cells.size() != 4) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 4 cells", line_no));
        WeatherSample s;
        s.timestamp = parse_timestamp(cells[0]);
        s.cloud_cover = csv::require_number(cells[1], line_no);
        s.snow_depth_cm = csv::require_number(cells[2], line_no);
        const auto flag = cells[3];
        if (flag == "1" || flag == "true") {
            s.is_forecast = true;
        } else if (flag == "0" || flag == "false" || flag.empty()) {
            s.is_forecast = false;
        } else {
            throw Error(ErrorCode::MalformedRow, fmt::format("line {}: bad is_forecast '{}'", line_no, flag));
        }
        samples.push_back(s);
    }
    return WeatherSeries(std::move(samples));
}

WeatherSeries parse_weather_csv(const std::filesystem::path& path) {
    auto in = csv::open_in(path);
    return parse_weather_csv(in);
}

void write_weather_csv(std::ostream& out, const WeatherSeries& weather) {
    out << "timestamp,cloud_cover,snow_depth,is_forecast\n";
    for (const auto& s : weather.samples()) {
        out << fmt::format("{},{},{},{}\n", format_timestamp(s.timestamp), s.cloud_cover, s.snow_depth_cm,
                           s.is_forecast ? 1 : 0);
    }
}

void write_weather_csv(const std::filesystem::path& path, const WeatherSeries& weather) {
    auto out = csv::open_out(path);
    write_weather_csv(out, weather);
}

// ---------------------------------------------------------------------------
// Layout file

ArrayLayout parse_layout(std::istream& in) {
    ArrayLayout layout;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto text = csv::trim(line);
        if (text.empty()) continue;
        if (text.front() == '#') {
            text.remove_prefix(1);
            const auto eq = text.find('=');
            if (eq == std::string_view::npos) continue;
            const auto key = csv::trim(text.substr(0, eq));
            const double value = csv::require_number(text.substr(eq + 1), line_no);
            if (key == "latitude") {
                layout.location.latitude_deg = value;
            } else if (key == "longitude") {
                layout.location.longitude_deg = value;
            } else if (key == "utc_offset_min") {
                layout.utc_offset = std::chrono::minutes{static_cast<long>(std::lround(value))};
            }
            continue;
        }
        const auto cells = csv::split(text);
        if (!header_seen) {
            const std::vector<std::string_view> expected{"panel_id", "roof_plane", "tilt_deg", "azimuth_deg",
                                                         "capacity_w"};
            if (cells != expected) {
                throw Error(ErrorCode::MalformedHeader,
                            "expected 'panel_id,roof_plane,tilt_deg,azimuth_deg,capacity_w'");
            }
            header_seen = true;
            continue;
        }
        if (cells.size() != 5) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 5 cells", line_no));
        PanelSpec p;
        p.id = std::string(cells[0]);
        p.roof_plane = std::string(cells[1]);
        p.tilt_deg = csv::require_number(cells[2], line_no);
        p.azimuth_deg = csv::require_number(cells[3], line_no);
        p.capacity_w = csv::require_number(cells[4], line_no);
        layout.panels.push_back(std::move(p));
    }
    if (!header_seen) throw Error(ErrorCode::MalformedHeader, "layout file has no header");
    layout.validate();
    return layout;
}

ArrayLayout parse_layout(const std::filesystem::path& path) {
    auto in = csv::open_in(path);
    return parse_layout(in);
}

void write_layout(std::ostream& out, const ArrayLayout& layout) {
    out << fmt::format("# latitude={}\n# longitude={}\n# utc_offset_min={}\n", layout.location.latitude_deg,
                       layout.location.longitude_deg, layout.utc_offset.count());
    out << "panel_id,roof_plane,tilt_deg,azimuth_deg,capacity_w\n";
    for (const auto& p : layout.panels) {
        out << fmt::format("{},{},{},{},{}\n", p.id, p.roof_plane, p.tilt_deg, p.azimuth_deg, p.capacity_w);
    }
}

void write_layout(const std::filesystem::path& path, const ArrayLayout& layout) {
    auto out = csv::open_out(path);
    write_layout(out, layout);
}

void check_power_bounds(const PanelMatrix& matrix, const ArrayLayout& layout) {
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
        const double limit = 2.0 * layout.panel(matrix.panel_ids()[c]).capacity_w;
        for (std::size_t r = 0; r < matrix.rows(); ++r) {
            const double v = matrix(r, c);
            if (!is_missing(v) && v > limit) {
                throw Error(ErrorCode::InvalidArgument,
                            fmt::format("{} reports {} W at {}, above twice its nameplate", matrix.panel_ids()[c], v,
                                        format_timestamp(matrix.timestamps()[r])));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Segmentation

DaylightRule daylight_rule_for(const ArrayLayout& layout) {
    DaylightRule rule;
    rule.array_nameplate_w = layout.total_capacity_w();
    return rule;
}

std::vector<DaySlice> segment_days(const PanelMatrix& matrix, const DaylightRule& rule) {
    if (matrix.empty()) throw Error(ErrorCode::EmptyInput, "cannot segment an empty matrix");
    if (!rule.sun_geometry && !(rule.array_nameplate_w > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "daylight rule needs a positive array nameplate");
    }
    const double threshold = rule.epsilon_fraction * rule.array_nameplate_w;

    std::vector<DaySlice> days;
    std::size_t start = 0;
    while (start < matrix.rows()) {
        const Date date = local_date(matrix.timestamps()[start], matrix.utc_offset());
        std::size_t end = start;
        while (end < matrix.rows() && local_date(matrix.timestamps()[end], matrix.utc_offset()) == date) ++end;

        std::vector<std::size_t> all;
        std::vector<std::size_t> lit;
        std::vector<bool> mask;
        for (std::size_t r = start; r < end; ++r) {
            all.push_back(r);
            bool daylight = false;
            if (rule.sun_geometry) {
                daylight = sun_position(matrix.timestamps()[r], *rule.sun_geometry).above_horizon();
            } else {
                double total = 0.0;
                for (std::size_t c = 0; c < matrix.cols(); ++c) {
                    if (!is_missing(matrix(r, c))) total += matrix(r, c);
                }
                daylight = total > threshold;
            }
            mask.push_back(daylight);
            if (daylight) lit.push_back(r);
        }
        days.push_back(DaySlice{date, matrix.select_rows(lit), matrix.select_rows(all), std::move(mask)});
        start = end;
    }
    return days;
}

// ---------------------------------------------------------------------------
// Labels

std::string_view to_string(CapacityLevel v) { return v == CapacityLevel::High ? "High" : "Low"; }

std::string_view to_string(CorrelationLevel v) {
    switch (v) {
        case CorrelationLevel::Strong: return "Strong";
        case CorrelationLevel::Moderate: return "Moderate";
        case CorrelationLevel::Low: return "Low";
    }
    return "Low";
}

std::string_view to_string(DayCondition v) {
    switch (v) {
        case DayCondition::Normal: return "Normal";
        case DayCondition::PartialShaded: return "PartialShaded";
        case DayCondition::ObjectCover: return "ObjectCover";
        case DayCondition::LowPowerDefect: return "LowPowerDefect";
        case DayCondition::ProductionIssue: return "ProductionIssue";
        case DayCondition::UnknownIssue: return "UnknownIssue";
    }
    return "Normal";
}

double pearson(std::span<const double> x, std::span<const double> y, std::size_t min_overlap) {
    if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "pearson inputs differ in length");
    std::size_t n = 0;
    double mx = 0.0;
    double my = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (is_missing(x[i]) || is_missing(y[i])) continue;
        ++n;
        mx += x[i];
        my += y[i];
        scale = std::max({scale, std::abs(x[i]), std::abs(y[i])});
    }
    if (n < min_overlap) {
        throw Error(ErrorCode::InsufficientOverlap, fmt::format("{} overlapping samples, need {}", n, min_overlap));
    }
    if (n == 0) return 0.0;
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (is_missing(x[i]) || is_missing(y[i])) continue;
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    // rounding residue of a constant series is not variance
    const double floor = static_cast<double>(n) * std::pow(1e-12 * scale, 2);
    if (sxx <= floor || syy <= floor) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CapacityResult capacity_level(const DaySlice& day, std::string_view panel_id, double nameplate_w,
                              const LabelThresholds& thresholds) {
    if (!(nameplate_w > 0.0)) throw Error(ErrorCode::InvalidArgument, "nameplate must be positive");
    const std::size_t col = day.all_rows.require_index(panel_id);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < day.matrix.rows(); ++r) {
        const double v = day.matrix(r, col);
        if (!is_missing(v)) best = std::max(best, v);
    }
    if (!std::isfinite(best)) {
        throw Error(ErrorCode::AllMissing, fmt::format("{} has no daylight samples on {}", panel_id, format_date(day.date)));
    }
    const double ratio = best / nameplate_w;
    return {ratio >= thresholds.capacity_high ? CapacityLevel::High : CapacityLevel::Low, ratio};
}

CorrelationResult correlation_level(const DaySlice& day, std::string_view panel_id,
                                    const LabelThresholds& thresholds) {
    const std::size_t col = day.all_rows.require_index(panel_id);
    if (day.matrix.cols() < 2) throw Error(ErrorCode::InsufficientOverlap, "need at least two panels");
    const auto x = day.matrix.column(col);
    double sum = 0.0;
    for (std::size_t c = 0; c < day.matrix.cols(); ++c) {
        if (c == col) continue;
        sum += pearson(x, day.matrix.column(c));
    }
    const double r_mean = sum / static_cast<double>(day.matrix.cols() - 1);
    CorrelationLevel level = CorrelationLevel::Low;
    if (r_mean >= thresholds.corr_strong) {
        level = CorrelationLevel::Strong;
    } else if (r_mean >= thresholds.corr_moderate) {
        level = CorrelationLevel::Moderate;
    }
    return {level, r_mean};
}

DayLabel label_day(const DaySlice& day, std::string_view panel_id, double nameplate_w,
                   const LabelThresholds& thresholds) {
    return DayLabel{capacity_level(day, panel_id, nameplate_w, thresholds).level,
                    correlation_level(day, panel_id, thresholds).level, std::nullopt};
}

}  // namespace panelwatch
