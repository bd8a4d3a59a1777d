#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace panelwatch {

struct Location {
    double latitude_deg = 0.0;
    double longitude_deg = 0.0;
};

struct PanelSpec {
    std::string id;
    std::string roof_plane;
    double tilt_deg = 0.0;     // from horizontal
    double azimuth_deg = 180.0;  // clockwise from north
    double capacity_w = 320.0;
    /// Multiplicative panel-level variation; NaN means "draw under the simulator seed".
    double gain = std::nan("");
};

struct ArrayLayout {
    Location location;
    std::chrono::minutes utc_offset{0};
    std::vector<PanelSpec> panels;

    std::optional<std::size_t> index_of(std::string_view panel_id) const;
    /// Throws UnknownPanel.
    const PanelSpec& panel(std::string_view panel_id) const;
    double total_capacity_w() const;
    std::vector<std::string> panel_ids() const;
    /// Throws InvalidArgument on duplicate ids, out-of-range geometry or an empty layout.
    void validate() const;
};

}  // namespace panelwatch
