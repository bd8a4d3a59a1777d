#include "panelwatch/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <set>

#include <fmt/format.h>

#include "csv.hpp"
#include "panelwatch/error.hpp"
#include "panelwatch/solar.hpp"

namespace panelwatch {
namespace {

enum class Stream : std::uint32_t { Gain = 1, Noise, SnowTrickle, ArrayWeather, PanelWeather, SnowDepth };

std::mt19937_64 stream(std::uint64_t seed, Stream purpose, std::int64_t date_key = 0, std::uint64_t panel = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(date_key),
                      static_cast<std::uint32_t>(date_key >> 32), static_cast<std::uint32_t>(panel)};
    return std::mt19937_64(seq);
}

std::int64_t date_key(Date d) { return std::chrono::sys_days{d}.time_since_epoch().count(); }

/// Stationary unit-variance AR(1) with correlation length `corr_minutes`.
std::vector<double> ar1(std::mt19937_64& rng, std::size_t n, double corr_minutes) {
    const double phi = std::exp(-static_cast<double>(kSampleInterval.count()) / corr_minutes);
    const double innovation = std::sqrt(1.0 - phi * phi);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z(n);
    double state = normal(rng);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = state;
        state = phi * state + innovation * normal(rng);
    }
    return z;
}

bool in_window(std::chrono::minutes tod, std::optional<std::chrono::minutes> start,
               std::optional<std::chrono::minutes> end) {
    const auto from = start.value_or(std::chrono::minutes{0});
    const auto to = end.value_or(std::chrono::minutes{24 * 60});
    return tod >= from && tod < to;
}

struct DayWeather {
    std::vector<double> cover;                 // array-level cloud cover per slot
    std::vector<std::vector<double>> factor;  // per panel, per slot
};

DayWeather day_weather(WeatherProfile profile, std::size_t panels, std::uint64_t seed, Date date) {
    DayWeather w;
    w.cover.assign(kSlotsPerDay, 0.0);
    w.factor.assign(panels, std::vector<double>(kSlotsPerDay, 1.0));
    auto array_rng = stream(seed, Stream::ArrayWeather, date_key(date));
    switch (profile) {
        case WeatherProfile::Sunny:
            break;
        case WeatherProfile::Overcast: {
            const auto z = ar1(array_rng, kSlotsPerDay, 60.0);
            for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
                const double f = std::clamp(0.25 + 0.02 * z[s], 0.15, 0.35);
                w.cover[s] = std::clamp((1.0 - f) / 0.75, 0.0, 1.0);
                for (auto& col : w.factor) col[s] = f;
            }
            break;
        }
        case WeatherProfile::Scattered: {
            const auto z = ar1(array_rng, kSlotsPerDay, 30.0);
            for (std::size_t s = 0; s < kSlotsPerDay; ++s) w.cover[s] = std::clamp(0.35 + 0.45 * z[s], 0.0, 1.0);
            for (std::size_t p = 0; p < panels; ++p) {
                auto panel_rng = stream(seed, Stream::PanelWeather, date_key(date), p);
                const auto jitter = ar1(panel_rng, kSlotsPerDay, 30.0);
                for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
                    w.factor[p][s] = std::clamp((1.0 - 0.75 * w.cover[s]) * (1.0 + 0.05 * jitter[s]), 0.1, 1.0);
                }
            }
            break;
        }
    }
    return w;
}

}  // namespace

std::string_view to_string(WeatherProfile v) {
    switch (v) {
        case WeatherProfile::Sunny: return "Sunny";
        case WeatherProfile::Overcast: return "Overcast";
        case WeatherProfile::Scattered: return "Scattered";
    }
    return "Sunny";
}

std::string_view to_string(FaultKind v) {
    switch (v) {
        case FaultKind::Snow: return "Snow";
        case FaultKind::Occlusion: return "Occlusion";
        case FaultKind::OpenCircuit: return "OpenCircuit";
        case FaultKind::WaterDrops: return "WaterDrops";
    }
    return "Occlusion";
}

WeatherProfile parse_weather_profile(std::string_view text) {
    for (auto v : {WeatherProfile::Sunny, WeatherProfile::Overcast, WeatherProfile::Scattered}) {
        if (to_string(v) == text) return v;
    }
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown weather profile '{}'", text));
}

FaultKind parse_fault_kind(std::string_view text) {
    for (auto v : {FaultKind::Snow, FaultKind::Occlusion, FaultKind::OpenCircuit, FaultKind::WaterDrops}) {
        if (to_string(v) == text) return v;
    }
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown fault kind '{}'", text));
}

std::vector<WeatherProfile> draw_profiles(std::mt19937_64& rng, std::size_t count) {
    std::discrete_distribution<int> pick({5.0, 3.0, 2.0});
    std::vector<WeatherProfile> out;
    for (std::size_t i = 0; i < count; ++i) {
        const int k = pick(rng);
        out.push_back(k == 0 ? WeatherProfile::Sunny : k == 1 ? WeatherProfile::Scattered : WeatherProfile::Overcast);
    }
    return out;
}

std::vector<Date> consecutive_dates(Date first, int count) {
    std::vector<Date> out;
    for (int i = 0; i < count; ++i) out.push_back(Date{std::chrono::sys_days{first} + std::chrono::days{i}});
    return out;
}

SimOutput simulate(const ArrayLayout& layout, const std::vector<Date>& dates, WeatherProfile profile,
                   const std::vector<FaultSpec>& faults, std::uint64_t seed, const SimOptions& options) {
    layout.validate();
    if (dates.empty()) throw Error(ErrorCode::InvalidArgument, "simulation needs at least one date");
    if (!options.daily_profiles.empty() && options.daily_profiles.size() != dates.size()) {
        throw Error(ErrorCode::InvalidArgument, "daily_profiles must match dates");
    }
    std::vector<Date> sorted_dates = dates;
    for (std::size_t i = 1; i < sorted_dates.size(); ++i) {
        if (sorted_dates[i] <= sorted_dates[i - 1]) {
            throw Error(ErrorCode::InvalidArgument, "simulation dates must be strictly increasing");
        }
    }

    const std::size_t n = layout.panels.size();
    SimOutput out;
    out.layout = layout;
    {
        auto rng = stream(seed, Stream::Gain);
        std::uniform_real_distribution<double> gain(options.gain_low, options.gain_high);
        for (auto& p : out.layout.panels) {
            const double g = gain(rng);
            if (std::isnan(p.gain)) p.gain = g;
        }
    }

    // validate faults; group by (date, panel)
    std::map<std::pair<std::int64_t, std::size_t>, std::vector<const FaultSpec*>> by_cell;
    std::set<std::int64_t> snow_dates;
    const std::set<Date> date_set(dates.begin(), dates.end());
    for (const auto& f : faults) {
        const auto idx = layout.index_of(f.panel_id);
        if (!idx) throw Error(ErrorCode::UnknownPanel, f.panel_id);
        if (!date_set.count(f.date)) {
            throw Error(ErrorCode::InvalidArgument,
                        fmt::format("fault on {} is outside the simulated dates", format_date(f.date)));
        }
        if (!(f.severity >= 0.0 && f.severity <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("severity {} outside [0,1]", f.severity));
        }
        if (f.kind == FaultKind::WaterDrops && f.severity > 0.15) {
            throw Error(ErrorCode::InvalidArgument, "water drops severity is at most 0.15");
        }
        by_cell[{date_key(f.date), *idx}].push_back(&f);
        if (f.kind == FaultKind::Snow) snow_dates.insert(date_key(f.date));
        const double severity = f.kind == FaultKind::OpenCircuit ? 1.0 : f.severity;
        out.truth.push_back(TruthLabel{f.panel_id, f.date, f.kind, severity});
    }
    for (const auto& s : options.shades) {
        if (!layout.index_of(s.panel_id)) throw Error(ErrorCode::UnknownPanel, s.panel_id);
    }

    std::vector<Timestamp> timestamps;
    std::vector<double> values;
    std::vector<WeatherSample> weather;
    timestamps.reserve(dates.size() * kSlotsPerDay);
    values.reserve(dates.size() * kSlotsPerDay * n);

    for (std::size_t d = 0; d < dates.size(); ++d) {
        const Date date = dates[d];
        const auto key = date_key(date);
        const WeatherProfile today = options.daily_profiles.empty() ? profile : options.daily_profiles[d];
        const DayWeather w = day_weather(today, n, seed, date);
        const Timestamp start = day_start(date, layout.utc_offset);

        std::vector<std::vector<double>> noise(n);
        std::vector<double> trickle(n);
        for (std::size_t p = 0; p < n; ++p) {
            auto rng = stream(seed, Stream::Noise, key, p);
            std::normal_distribution<double> normal(0.0, 1.0);
            noise[p].resize(kSlotsPerDay);
            for (auto& e : noise[p]) e = normal(rng);
            auto snow_rng = stream(seed, Stream::SnowTrickle, key, p);
            trickle[p] = std::uniform_real_distribution<double>(0.0, 0.05)(snow_rng);
        }

        for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
            const Timestamp t = start + kSampleInterval * static_cast<int>(s);
            const std::chrono::minutes tod = kSampleInterval * static_cast<int>(s);
            timestamps.push_back(t);
            out.sun_up.push_back(sun_position(t, layout.location).above_horizon());
            for (std::size_t p = 0; p < n; ++p) {
                const auto& panel = out.layout.panels[p];
                double watts = clear_sky_power(panel, t, layout.location) * w.factor[p][s];
                for (const auto& shade : options.shades) {
                    if (shade.panel_id == panel.id && tod >= shade.start && tod < shade.end) {
                        watts *= 1.0 - shade.depth;
                    }
                }
                if (auto it = by_cell.find({key, p}); it != by_cell.end()) {
                    for (const FaultSpec* f : it->second) {
                        if (!in_window(tod, f->start, f->end)) continue;
                        switch (f->kind) {
                            case FaultKind::Snow: watts *= 1.0 - f->severity * (1.0 - trickle[p]); break;
                            case FaultKind::Occlusion:
                            case FaultKind::WaterDrops: watts *= 1.0 - f->severity; break;
                            case FaultKind::OpenCircuit: watts = 0.0; break;
                        }
                    }
                }
                values.push_back(std::max(0.0, watts * (1.0 + options.noise_sigma * noise[p][s])));
            }
        }

        double depth = 0.0;
        if (snow_dates.count(key)) {
            auto rng = stream(seed, Stream::SnowDepth, key);
            depth = std::uniform_real_distribution<double>(5.0, 25.0)(rng);
        }
        for (int h = 0; h < 24; ++h) {
            double cover = 0.0;
            for (int k = 0; k < 12; ++k) cover += w.cover[static_cast<std::size_t>(h * 12 + k)];
            weather.push_back(WeatherSample{start + std::chrono::minutes{h * 60 + 30}, cover / 12.0, depth, false});
        }
    }

    out.matrix = PanelMatrix(layout.panel_ids(), std::move(timestamps), std::move(values), layout.utc_offset);
    out.weather = WeatherSeries(std::move(weather));
    return out;
}

void write_truth_csv(std::ostream& out, const std::vector<TruthLabel>& truth) {
    out << "panel_id,date,kind,severity\n";
    for (const auto& t : truth) {
        out << fmt::format("{},{},{},{}\n", t.panel_id, format_date(t.date), to_string(t.kind), t.severity);
    }
}

void write_truth_csv(const std::filesystem::path& path, const std::vector<TruthLabel>& truth) {
    auto out = csv::open_out(path);
    write_truth_csv(out, truth);
}

std::vector<TruthLabel> parse_truth_csv(const std::filesystem::path& path) {
    auto in = csv::open_in(path);
    std::string line;
    std::getline(in, line);
    if (csv::trim(line) != "panel_id,date,kind,severity") {
        throw Error(ErrorCode::MalformedHeader, "expected 'panel_id,date,kind,severity'");
    }
    std::vector<TruthLabel> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto cells = csv::split(line);
        if (cells.size() != 4) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 4 cells", line_no));
        out.push_back(TruthLabel{std::string(cells[0]), parse_date(cells[1]), parse_fault_kind(cells[2]),
                                 csv::require_number(cells[3], line_no)});
    }
    return out;
}

namespace layouts {

ArrayLayout single_plane(int count, double tilt_deg, double azimuth_deg) {
    ArrayLayout layout;
    layout.location = kWesternMassachusetts;
    layout.utc_offset = kEasternStandard;
    for (int i = 0; i < count; ++i) {
        layout.panels.push_back(PanelSpec{fmt::format("P{:02d}", i + 1), "south", tilt_deg, azimuth_deg, 320.0});
    }
    return layout;
}

ArrayLayout four_plane_home() {
    struct Plane {
        const char* name;
        double tilt;
        double azimuth;
    };
    const Plane planes[] = {{"east", 35.0, 95.0}, {"west", 35.0, 275.0}, {"south", 30.0, 185.0}, {"lower", 15.0, 150.0}};
    ArrayLayout layout;
    layout.location = kWesternMassachusetts;
    layout.utc_offset = kEasternStandard;
    int index = 1;
    for (const auto& plane : planes) {
        for (int i = 0; i < 3; ++i) {
            layout.panels.push_back(PanelSpec{fmt::format("P{:02d}", index++), plane.name, plane.tilt, plane.azimuth, 320.0});
        }
    }
    return layout;
}

ArrayLayout abcd() {
    ArrayLayout layout;
    layout.location = kWesternMassachusetts;
    layout.utc_offset = kEasternStandard;
    for (const char* id : {"A", "B", "C", "D"}) layout.panels.push_back(PanelSpec{id, "south", 30.0, 180.0, 320.0});
    return layout;
}

}  // namespace layouts

}  // namespace panelwatch
