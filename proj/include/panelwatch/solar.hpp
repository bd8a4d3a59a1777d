#pragma once

#include "panelwatch/layout.hpp"
#include "panelwatch/time.hpp"

namespace panelwatch {

/// Sun direction as a unit vector in local east/north/up coordinates.
struct SunPosition {
    double east = 0.0;
    double north = 0.0;
    double up = 0.0;
    double declination_rad = 0.0;
    double hour_angle_rad = 0.0;

    double elevation_deg() const;
    double azimuth_deg() const;  // clockwise from north
    bool above_horizon() const { return up > 0.0; }
};

/// Declination and equation of time from the Spencer Fourier series, hour
/// angle from true solar time.
SunPosition sun_position(Timestamp t, const Location& location);

/// Cosine of the angle between the sun vector and the panel normal (may be negative).
double incidence_cosine(const PanelSpec& panel, const SunPosition& sun);

/// capacity * gain * max(0, cos incidence), zero with the sun below the
/// horizon, clipped at capacity. A NaN gain counts as 1.
double clear_sky_power(const PanelSpec& panel, Timestamp t, const Location& location);

}  // namespace panelwatch
