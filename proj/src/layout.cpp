#include "panelwatch/layout.hpp"

#include <algorithm>
#include <unordered_set>

#include <fmt/format.h>

#include "panelwatch/error.hpp"

namespace panelwatch {

std::optional<std::size_t> ArrayLayout::index_of(std::string_view panel_id) const {
    for (std::size_t i = 0; i < panels.size(); ++i) {
        if (panels[i].id == panel_id) return i;
    }
    return std::nullopt;
}

const PanelSpec& ArrayLayout::panel(std::string_view panel_id) const {
    if (auto i = index_of(panel_id)) return panels[*i];
    throw Error(ErrorCode::UnknownPanel, std::string(panel_id));
}

double ArrayLayout::total_capacity_w() const {
    double total = 0.0;
    for (const auto& p : panels) total += p.capacity_w;
    return total;
}

std::vector<std::string> ArrayLayout::panel_ids() const {
    std::vector<std::string> ids;
    ids.reserve(panels.size());
    for (const auto& p : panels) ids.push_back(p.id);
    return ids;
}

void ArrayLayout::validate() const {
    if (panels.empty()) throw Error(ErrorCode::InvalidArgument, "layout has no panels");
    std::unordered_set<std::string> seen;
    for (const auto& p : panels) {
        if (p.id.empty() || !seen.insert(p.id).second) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("panel id '{}' is empty or duplicated", p.id));
        }
        if (p.roof_plane.empty()) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("panel '{}' has no roof plane", p.id));
        }
        if (!(p.tilt_deg >= 0.0 && p.tilt_deg <= 90.0)) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("panel '{}' tilt {} outside [0,90]", p.id, p.tilt_deg));
        }
        if (!(p.azimuth_deg >= 0.0 && p.azimuth_deg < 360.0)) {
            throw Error(ErrorCode::InvalidArgument,
                        fmt::format("panel '{}' azimuth {} outside [0,360)", p.id, p.azimuth_deg));
        }
        if (!(p.capacity_w > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("panel '{}' capacity must be positive", p.id));
        }
        if (!std::isnan(p.gain) && !(p.gain > 0.8 && p.gain < 1.2)) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("panel '{}' gain {} outside (0.8,1.2)", p.id, p.gain));
        }
    }
}

}  // namespace panelwatch
