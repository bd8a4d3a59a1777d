#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "panelwatch/ingest.hpp"
#include "panelwatch/simulator.hpp"

namespace pwtest {

using namespace panelwatch;

inline Date ymd(int y, unsigned m, unsigned d) { return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}; }

struct SimDays {
    SimOutput sim;
    std::vector<DaySlice> days;
};

inline SimDays sim_days(const ArrayLayout& layout, Date first, int count, WeatherProfile profile,
                        const std::vector<FaultSpec>& faults, std::uint64_t seed, const SimOptions& options = {}) {
    SimDays out{simulate(layout, consecutive_dates(first, count), profile, faults, seed, options), {}};
    out.days = segment_days(out.sim.matrix, daylight_rule_for(out.sim.layout));
    return out;
}

// A one-day slice whose rows all count as daylight, starting 10:00 UTC.
inline DaySlice make_day(std::vector<std::string> ids, const std::vector<std::vector<double>>& cols,
                         Date date = ymd(2019, 6, 1)) {
    const std::size_t rows = cols.front().size();
    std::vector<Timestamp> ts;
    std::vector<double> values;
    const Timestamp start = day_start(date, std::chrono::minutes{0}) + std::chrono::hours{10};
    for (std::size_t r = 0; r < rows; ++r) {
        ts.push_back(start + kSampleInterval * static_cast<int>(r));
        for (const auto& c : cols) values.push_back(c[r]);
    }
    PanelMatrix m(std::move(ids), std::move(ts), std::move(values));
    DaylightRule rule;
    rule.array_nameplate_w = 1.0;
    rule.epsilon_fraction = -1.0;
    return segment_days(m, rule).front();
}

inline std::vector<std::size_t> slots_of(const DaySlice& day) {
    std::vector<std::size_t> out;
    for (auto t : day.matrix.timestamps()) out.push_back(slot_of_day(t, day.matrix.utc_offset()));
    return out;
}

// Pearson straight from the definition, pairwise-complete.
inline double textbook_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    long double sx = 0, sy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(x[i]) || std::isnan(y[i])) continue;
        sx += x[i];
        sy += y[i];
        ++n;
    }
    const long double mx = sx / n, my = sy / n;
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(x[i]) || std::isnan(y[i])) continue;
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

inline double daily_energy(const DaySlice& day, const std::string& id) {
    double e = 0.0;
    for (double v : day.all_rows.column(id)) {
        if (!std::isnan(v)) e += v * kSampleHours;
    }
    return e;
}

}  // namespace pwtest
