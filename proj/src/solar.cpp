#include "panelwatch/solar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace panelwatch {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

double SunPosition::elevation_deg() const { return std::asin(std::clamp(up, -1.0, 1.0)) / kDeg; }

double SunPosition::azimuth_deg() const {
    double az = std::atan2(east, north) / kDeg;
    if (az < 0.0) az += 360.0;
    return az;
}

SunPosition sun_position(Timestamp t, const Location& location) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const Date date{day};
    const auto year_start = sys_days{date.year() / January / 1};
    const double day_of_year = static_cast<double>((day - year_start).count()) + 1.0;
    const double hours_utc = duration<double, std::ratio<3600>>(t - day).count();
    const double days_in_year = date.year().is_leap() ? 366.0 : 365.0;

    const double g = 2.0 * std::numbers::pi / days_in_year * (day_of_year - 1.0 + (hours_utc - 12.0) / 24.0);
    const double eot_min = 229.18 * (0.000075 + 0.001868 * std::cos(g) - 0.032077 * std::sin(g) -
                                     0.014615 * std::cos(2 * g) - 0.040849 * std::sin(2 * g));
    const double decl = 0.006918 - 0.399912 * std::cos(g) + 0.070257 * std::sin(g) - 0.006758 * std::cos(2 * g) +
                        0.000907 * std::sin(2 * g) - 0.002697 * std::cos(3 * g) + 0.00148 * std::sin(3 * g);

    const double solar_minutes = hours_utc * 60.0 + eot_min + 4.0 * location.longitude_deg;
    const double hour_angle = (solar_minutes / 4.0 - 180.0) * kDeg;
    const double lat = location.latitude_deg * kDeg;

    SunPosition sun;
    sun.declination_rad = decl;
    sun.hour_angle_rad = hour_angle;
    sun.east = -std::cos(decl) * std::sin(hour_angle);
    sun.north = std::cos(lat) * std::sin(decl) - std::sin(lat) * std::cos(decl) * std::cos(hour_angle);
    sun.up = std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(hour_angle);
    return sun;
}

double incidence_cosine(const PanelSpec& panel, const SunPosition& sun) {
    const double tilt = panel.tilt_deg * kDeg;
    const double az = panel.azimuth_deg * kDeg;
    return std::sin(tilt) * std::sin(az) * sun.east + std::sin(tilt) * std::cos(az) * sun.north +
           std::cos(tilt) * sun.up;
}

double clear_sky_power(const PanelSpec& panel, Timestamp t, const Location& location) {
    const SunPosition sun = sun_position(t, location);
    if (!sun.above_horizon()) return 0.0;
    const double gain = std::isnan(panel.gain) ? 1.0 : panel.gain;
    const double raw = panel.capacity_w * gain * std::max(0.0, incidence_cosine(panel, sun));
    return std::min(raw, panel.capacity_w);
}

}  // namespace panelwatch
