#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panelwatch/time.hpp"

namespace panelwatch {

/// Raw observations for one panel before grid alignment.
struct PowerSeries {
    std::string panel_id;
    std::vector<Timestamp> timestamps;
    std::vector<double> watts;  // kMissing for gaps
};

/// Time-aligned per-panel power, T rows by N panel columns, row-major.
///
/// Rows sit on the 5-minute grid and are strictly increasing; a matrix
/// restricted to daylight rows keeps grid alignment but may skip rows.
/// `utc_offset` is the fixed clock shift used to derive local dates and
/// time-of-day slots.
class PanelMatrix {
public:
    PanelMatrix() = default;
    PanelMatrix(std::vector<std::string> panel_ids, std::vector<Timestamp> timestamps, std::vector<double> values,
                std::chrono::minutes utc_offset = std::chrono::minutes{0});

    std::size_t rows() const { return timestamps_.size(); }
    std::size_t cols() const { return panel_ids_.size(); }
    bool empty() const { return timestamps_.empty(); }

    double operator()(std::size_t row, std::size_t col) const { return values_[row * cols() + col]; }
    double& operator()(std::size_t row, std::size_t col) { return values_[row * cols() + col]; }

    const std::vector<std::string>& panel_ids() const { return panel_ids_; }
    const std::vector<Timestamp>& timestamps() const { return timestamps_; }
    const std::vector<double>& values() const { return values_; }
    std::chrono::minutes utc_offset() const { return utc_offset_; }

    std::optional<std::size_t> index_of(std::string_view panel_id) const;
    /// Throws UnknownPanel.
    std::size_t require_index(std::string_view panel_id) const;

    std::vector<double> column(std::size_t col) const;
    std::vector<double> column(std::string_view panel_id) const { return column(require_index(panel_id)); }

    PanelMatrix select_rows(std::span<const std::size_t> rows) const;

    friend bool operator==(const PanelMatrix& a, const PanelMatrix& b);

private:
    std::vector<std::string> panel_ids_;
    std::vector<Timestamp> timestamps_;
    std::vector<double> values_;
    std::chrono::minutes utc_offset_{0};
};

/// Snaps every series onto a shared 5-minute grid spanning all samples.
/// Samples landing on the same grid point are averaged; grid points with no
/// sample are missing.
PanelMatrix align_series(std::span<const PowerSeries> series, std::chrono::minutes utc_offset = std::chrono::minutes{0});

Timestamp snap_to_grid(Timestamp t);

}  // namespace panelwatch
