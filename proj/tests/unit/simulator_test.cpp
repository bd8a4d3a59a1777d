#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "panelwatch/error.hpp"
#include "panelwatch/solar.hpp"
#include "support.hpp"

using namespace panelwatch;
using namespace std::chrono_literals;
using pwtest::ymd;

namespace {

constexpr double kRad = std::numbers::pi / 180.0;

// NOAA general solar position (Julian-century series) with the
// Duffie-Beckman tilted-surface incidence formula.
struct NoaaSun {
    double zenith_deg;
    double azimuth_deg;  // clockwise from north
};

NoaaSun noaa_sun(Timestamp t, double lat_deg, double lon_deg) {
    const double unix_days = static_cast<double>(t.time_since_epoch().count()) / 86400.0;
    const double jd = unix_days + 2440587.5;
    const double T = (jd - 2451545.0) / 36525.0;
    const double l0 = std::fmod(280.46646 + T * (36000.76983 + T * 0.0003032), 360.0);
    const double m = 357.52911 + T * (35999.05029 - 0.0001537 * T);
    const double e = 0.016708634 - T * (0.000042037 + 0.0000001267 * T);
    const double c = std::sin(m * kRad) * (1.914602 - T * (0.004817 + 0.000014 * T)) +
                     std::sin(2 * m * kRad) * (0.019993 - 0.000101 * T) + std::sin(3 * m * kRad) * 0.000289;
    const double omega = 125.04 - 1934.136 * T;
    const double lambda = l0 + c - 0.00569 - 0.00478 * std::sin(omega * kRad);
    const double eps0 = 23.0 + (26.0 + (21.448 - T * (46.815 + T * (0.00059 - T * 0.001813))) / 60.0) / 60.0;
    const double eps = eps0 + 0.00256 * std::cos(omega * kRad);
    const double decl = std::asin(std::sin(eps * kRad) * std::sin(lambda * kRad));
    const double y = std::pow(std::tan(eps * kRad / 2.0), 2);
    const double eot = 4.0 / kRad *
                       (y * std::sin(2 * l0 * kRad) - 2 * e * std::sin(m * kRad) +
                        4 * e * y * std::sin(m * kRad) * std::cos(2 * l0 * kRad) - 0.5 * y * y * std::sin(4 * l0 * kRad) -
                        1.25 * e * e * std::sin(2 * m * kRad));
    const double minutes = std::fmod(unix_days, 1.0) * 1440.0;
    const double tst = minutes + eot + 4.0 * lon_deg;
    const double ha = (tst / 4.0 - 180.0) * kRad;
    const double lat = lat_deg * kRad;
    const double cos_z = std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(ha);
    const double zenith = std::acos(std::clamp(cos_z, -1.0, 1.0));
    double az = std::atan2(std::sin(ha), std::cos(ha) * std::sin(lat) - std::tan(decl) * std::cos(lat)) / kRad + 180.0;
    az = std::fmod(az + 360.0, 360.0);
    return {zenith / kRad, az};
}

double noaa_power(const PanelSpec& p, Timestamp t, const Location& loc) {
    const auto s = noaa_sun(t, loc.latitude_deg, loc.longitude_deg);
    if (s.zenith_deg >= 90.0) return 0.0;
    const double z = s.zenith_deg * kRad, tilt = p.tilt_deg * kRad;
    const double cos_theta =
        std::cos(z) * std::cos(tilt) + std::sin(z) * std::sin(tilt) * std::cos((s.azimuth_deg - p.azimuth_deg) * kRad);
    return std::min(p.capacity_w, p.capacity_w * std::max(0.0, cos_theta));
}

double column_energy(const SimOutput& sim, std::size_t col) {
    double e = 0.0;
    for (std::size_t r = 0; r < sim.matrix.rows(); ++r) e += sim.matrix(r, col);
    return e;
}

}  // namespace

TEST(ClearSky, BelowHorizonIsZero) {
    const PanelSpec p{"X", "s", 30.0, 180.0, 320.0, 1.0};
    const Timestamp midnight_local = day_start(ymd(2019, 6, 21), -300min);
    EXPECT_EQ(clear_sky_power(p, midnight_local, layouts::kWesternMassachusetts), 0.0);
}

TEST(ClearSky, PanelFacingSunGivesNameplate) {
    const Location loc = layouts::kWesternMassachusetts;
    const Timestamp t = day_start(ymd(2019, 4, 3), 0min) + 15h + 20min;
    const auto sun = sun_position(t, loc);
    ASSERT_TRUE(sun.above_horizon());
    const PanelSpec p{"X", "s", 90.0 - sun.elevation_deg(), sun.azimuth_deg(), 320.0, 1.0};
    EXPECT_NEAR(clear_sky_power(p, t, loc), 320.0, 1e-6);
}

TEST(ClearSky, SolsticeNoonMatchesIndependentCalculator) {
    const Location loc{42.4, -72.5};
    const PanelSpec p{"X", "s", 30.0, 180.0, 320.0, 1.0};
    const Timestamp day = day_start(ymd(2019, 6, 21), 0min);
    // solar noon from the oracle: smallest zenith on a one-minute grid
    Timestamp noon = day;
    double best = 1e9;
    for (int m = 0; m < 1440; ++m) {
        const Timestamp t = day + std::chrono::minutes{m};
        const double z = noaa_sun(t, loc.latitude_deg, loc.longitude_deg).zenith_deg;
        if (z < best) {
            best = z;
            noon = t;
        }
    }
    const double expected = noaa_power(p, noon, loc);
    EXPECT_NEAR(clear_sky_power(p, noon, loc), expected, 0.01 * expected);
    for (auto offset : {-3h, -1h, 2h, 4h}) {
        const double e = noaa_power(p, noon + offset, loc);
        EXPECT_NEAR(clear_sky_power(p, noon + offset, loc), e, 0.01 * e) << offset.count();
    }
}

TEST(ClearSky, AgreesAcrossSeasonsAndPlanes) {
    const Location loc = layouts::kWesternMassachusetts;
    for (const auto& p : layouts::four_plane_home().panels) {
        PanelSpec q = p;
        q.gain = 1.0;
        for (unsigned month : {1u, 4u, 10u}) {
            for (int hour : {14, 16, 18}) {
                const Timestamp t = day_start(ymd(2019, month, 15), 0min) + std::chrono::hours{hour};
                const double e = noaa_power(q, t, loc);
                EXPECT_NEAR(clear_sky_power(q, t, loc), e, 0.01 * q.capacity_w) << p.id << " " << month << " " << hour;
            }
        }
    }
}

TEST(Simulate, DeterministicUnderSeed) {
    const auto layout = layouts::four_plane_home();
    const auto dates = consecutive_dates(ymd(2019, 3, 1), 3);
    const std::vector<FaultSpec> faults{{"P04", ymd(2019, 3, 2), FaultKind::Occlusion, 0.6, {}, {}}};
    const auto a = simulate(layout, dates, WeatherProfile::Scattered, faults, 42);
    const auto b = simulate(layout, dates, WeatherProfile::Scattered, faults, 42);
    const auto c = simulate(layout, dates, WeatherProfile::Scattered, faults, 43);
    EXPECT_TRUE(a.matrix == b.matrix);
    EXPECT_TRUE(a.weather == b.weather);
    EXPECT_EQ(a.truth, b.truth);
    EXPECT_FALSE(a.matrix == c.matrix);
}

TEST(Simulate, SunnySamePlanePanelsAreHighlyCorrelated) {
    const auto s = pwtest::sim_days(layouts::single_plane(4), ymd(2019, 6, 5), 1, WeatherProfile::Sunny, {}, 11);
    const auto& m = s.days.front().matrix;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) {
            EXPECT_GT(pwtest::textbook_pearson(m.column(i), m.column(j)), 0.99);
        }
    }
}

TEST(Simulate, OpenCircuitIsZeroAllDay) {
    const auto s = pwtest::sim_days(layouts::single_plane(4), ymd(2019, 6, 5), 1, WeatherProfile::Sunny,
                                    {{"P02", ymd(2019, 6, 5), FaultKind::OpenCircuit, 1.0, {}, {}}}, 3);
    for (double v : s.days.front().matrix.column("P02")) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(s.sim.truth.front().severity, 1.0);
}

TEST(Simulate, FullArraySnowIsNearZero) {
    const auto layout = layouts::single_plane(8);
    const Date date = ymd(2019, 1, 10);
    std::vector<FaultSpec> faults;
    for (const auto& id : layout.panel_ids()) faults.push_back({id, date, FaultKind::Snow, 1.0, {}, {}});
    const auto sim = simulate(layout, {date}, WeatherProfile::Sunny, faults, 2);
    for (std::size_t r = 0; r < sim.matrix.rows(); ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < sim.matrix.cols(); ++c) total += sim.matrix(r, c);
        EXPECT_LT(total, 0.05 * layout.total_capacity_w());
    }
    ASSERT_EQ(sim.truth.size(), layout.panels.size());
    EXPECT_GT(sim.weather.max_snow_depth(date, layout.utc_offset).value_or(0.0), 0.0);
}

TEST(Simulate, SnowDepthOnlyOnSnowDates) {
    const auto layout = layouts::single_plane(3);
    const auto dates = consecutive_dates(ymd(2019, 2, 1), 3);
    const auto sim = simulate(layout, dates, WeatherProfile::Overcast, {{"P01", dates[1], FaultKind::Snow, 1.0, {}, {}}}, 8);
    EXPECT_EQ(*sim.weather.max_snow_depth(dates[0], layout.utc_offset), 0.0);
    EXPECT_GT(*sim.weather.max_snow_depth(dates[1], layout.utc_offset), 0.0);
    EXPECT_EQ(*sim.weather.max_snow_depth(dates[2], layout.utc_offset), 0.0);
}

TEST(Simulate, OcclusionEnergyNonIncreasingInSeverity) {
    const auto layout = layouts::single_plane(4);
    const Date date = ymd(2019, 8, 1);
    double previous = 1e18;
    for (double sev : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
        const auto sim = simulate(layout, {date}, WeatherProfile::Scattered,
                                  {{"P03", date, FaultKind::Occlusion, sev, {}, {}}}, 17);
        const double e = column_energy(sim, 2);
        EXPECT_LE(e, previous) << sev;
        previous = e;
    }
}

TEST(Simulate, FaultsOnDisjointPanelsLeaveOthersUnchanged) {
    const auto layout = layouts::four_plane_home();
    const auto dates = consecutive_dates(ymd(2019, 1, 20), 2);
    const auto clean = simulate(layout, dates, WeatherProfile::Scattered, {}, 99);
    const std::vector<FaultSpec> faults{{"P02", dates[0], FaultKind::Snow, 1.0, {}, {}},
                                        {"P07", dates[1], FaultKind::OpenCircuit, 1.0, {}, {}},
                                        {"P11", dates[1], FaultKind::Occlusion, 0.5, 9h, 13h}};
    const auto faulty = simulate(layout, dates, WeatherProfile::Scattered, faults, 99);
    for (std::size_t c = 0; c < layout.panels.size(); ++c) {
        const auto& id = layout.panels[c].id;
        if (id == "P02" || id == "P07" || id == "P11") continue;
        EXPECT_EQ(clean.matrix.column(c), faulty.matrix.column(c)) << id;
    }
    EXPECT_NE(clean.matrix.column(1), faulty.matrix.column(1));
}

TEST(Simulate, SamePlaneCorrelationDominatesCrossPlane) {
    const auto layout = layouts::four_plane_home();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto s = pwtest::sim_days(layout, ymd(2019, 5, 10), 1, WeatherProfile::Sunny, {}, seed);
        const auto& m = s.days.front().matrix;
        double same = 0, cross = 0;
        int n_same = 0, n_cross = 0;
        for (std::size_t i = 0; i < layout.panels.size(); ++i) {
            for (std::size_t j = i + 1; j < layout.panels.size(); ++j) {
                const double r = pwtest::textbook_pearson(m.column(i), m.column(j));
                if (layout.panels[i].roof_plane == layout.panels[j].roof_plane) {
                    same += r;
                    ++n_same;
                } else {
                    cross += r;
                    ++n_cross;
                }
            }
        }
        EXPECT_GE(same / n_same, cross / n_cross);
    }
}

TEST(Simulate, OvercastIsAboutAQuarterOfSunny) {
    const auto layout = layouts::single_plane(3);
    const Date date = ymd(2019, 6, 10);
    const auto sunny = simulate(layout, {date}, WeatherProfile::Sunny, {}, 4);
    const auto overcast = simulate(layout, {date}, WeatherProfile::Overcast, {}, 4);
    const double ratio = column_energy(overcast, 0) / column_energy(sunny, 0);
    EXPECT_GT(ratio, 0.15);
    EXPECT_LT(ratio, 0.35);
}

TEST(Simulate, UnknownPanelRejected) {
    try {
        simulate(layouts::single_plane(2), {ymd(2019, 6, 1)}, WeatherProfile::Sunny,
                 {{"ZZ", ymd(2019, 6, 1), FaultKind::Snow, 1.0, {}, {}}}, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownPanel);
    }
}

TEST(Simulate, WaterDropsAboveCapRejected) {
    EXPECT_THROW(simulate(layouts::single_plane(2), {ymd(2019, 6, 1)}, WeatherProfile::Sunny,
                          {{"P01", ymd(2019, 6, 1), FaultKind::WaterDrops, 0.3, {}, {}}}, 0),
                 Error);
}

TEST(Simulate, GainsDrawnInRange) {
    const auto sim = simulate(layouts::four_plane_home(), {ymd(2019, 6, 1)}, WeatherProfile::Sunny, {}, 5);
    for (const auto& p : sim.layout.panels) {
        EXPECT_GE(p.gain, 0.93);
        EXPECT_LE(p.gain, 1.07);
    }
}

TEST(Simulate, TruthCsvRoundTrip) {
    const auto dates = consecutive_dates(ymd(2019, 1, 1), 2);
    const auto sim = simulate(layouts::abcd(), dates, WeatherProfile::Sunny,
                              {{"A", dates[0], FaultKind::Snow, 1.0, {}, {}}, {"C", dates[1], FaultKind::Occlusion, 0.4, {}, {}}},
                              1);
    const auto path = std::filesystem::temp_directory_path() / "pw_truth_roundtrip.csv";
    write_truth_csv(path, sim.truth);
    EXPECT_EQ(parse_truth_csv(path), sim.truth);
    std::filesystem::remove(path);
}
