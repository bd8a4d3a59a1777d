#include "panelwatch/panel_matrix.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <map>
#include <unordered_set>

#include <fmt/format.h>

#include "panelwatch/error.hpp"

namespace panelwatch {

PanelMatrix::PanelMatrix(std::vector<std::string> panel_ids, std::vector<Timestamp> timestamps,
                         std::vector<double> values, std::chrono::minutes utc_offset)
    : panel_ids_(std::move(panel_ids)),
      timestamps_(std::move(timestamps)),
      values_(std::move(values)),
      utc_offset_(utc_offset) {
    if (values_.size() != timestamps_.size() * panel_ids_.size()) {
        throw Error(ErrorCode::LengthMismatch,
                    fmt::format("matrix holds {} values for {} rows x {} panels", values_.size(),
                                timestamps_.size(), panel_ids_.size()));
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : panel_ids_) {
        if (id.empty() || !seen.insert(id).second) {
            throw Error(ErrorCode::MalformedHeader, fmt::format("panel id '{}' is empty or duplicated", id));
        }
    }
    for (std::size_t i = 1; i < timestamps_.size(); ++i) {
        if (timestamps_[i] <= timestamps_[i - 1]) {
            throw Error(ErrorCode::NonMonotonicTimestamps, format_timestamp(timestamps_[i]));
        }
    }
}

std::optional<std::size_t> PanelMatrix::index_of(std::string_view panel_id) const {
    const auto it = std::find(panel_ids_.begin(), panel_ids_.end(), panel_id);
    if (it == panel_ids_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - panel_ids_.begin());
}

std::size_t PanelMatrix::require_index(std::string_view panel_id) const {
    if (auto idx = index_of(panel_id)) return *idx;
    throw Error(ErrorCode::UnknownPanel, std::string(panel_id));
}

std::vector<double> PanelMatrix::column(std::size_t col) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = (*this)(r, col);
    return out;
}

PanelMatrix PanelMatrix::select_rows(std::span<const std::size_t> rows) const {
    std::vector<Timestamp> ts;
    std::vector<double> vals;
    ts.reserve(rows.size());
    vals.reserve(rows.size() * cols());
    for (std::size_t r : rows) {
        ts.push_back(timestamps_[r]);
        vals.insert(vals.end(), values_.begin() + static_cast<std::ptrdiff_t>(r * cols()),
                    values_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols()));
    }
    return PanelMatrix(panel_ids_, std::move(ts), std::move(vals), utc_offset_);
}

bool operator==(const PanelMatrix& a, const PanelMatrix& b) {
    if (a.panel_ids_ != b.panel_ids_ || a.timestamps_ != b.timestamps_ || a.utc_offset_ != b.utc_offset_ ||
        a.values_.size() != b.values_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
        const double x = a.values_[i];
        const double y = b.values_[i];
        if (is_missing(x) || is_missing(y)) {
            if (is_missing(x) != is_missing(y)) return false;
        } else if (std::memcmp(&x, &y, sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

Timestamp snap_to_grid(Timestamp t) {
    using Step = std::chrono::duration<std::int64_t, std::ratio<300>>;
    static_assert(Step{1} == kSampleInterval);
    return std::chrono::time_point_cast<std::chrono::seconds>(
        std::chrono::floor<Step>(t + std::chrono::seconds{150}));
}

PanelMatrix align_series(std::span<const PowerSeries> series, std::chrono::minutes utc_offset) {
    if (series.empty()) throw Error(ErrorCode::EmptyInput, "no power series to align");
    // grid point -> per panel (sum, count, any sample seen)
    struct Cell {
        double sum = 0.0;
        int count = 0;
    };
    std::map<Timestamp, std::vector<Cell>> grid;
    const std::size_t n = series.size();
    std::vector<std::string> ids;
    for (std::size_t p = 0; p < n; ++p) {
        const auto& s = series[p];
        if (s.timestamps.size() != s.watts.size()) {
            throw Error(ErrorCode::LengthMismatch, fmt::format("series '{}' has mismatched lengths", s.panel_id));
        }
        ids.push_back(s.panel_id);
        for (std::size_t i = 0; i < s.timestamps.size(); ++i) {
            if (i > 0 && s.timestamps[i] <= s.timestamps[i - 1]) {
                throw Error(ErrorCode::NonMonotonicTimestamps,
                            fmt::format("{} at {}", s.panel_id, format_timestamp(s.timestamps[i])));
            }
            auto& row = grid[snap_to_grid(s.timestamps[i])];
            row.resize(n);
            if (!is_missing(s.watts[i])) {
                row[p].sum += s.watts[i];
                ++row[p].count;
            }
        }
    }
    std::vector<Timestamp> timestamps;
    std::vector<double> values;
    if (!grid.empty()) {
        const Timestamp first = grid.begin()->first;
        const Timestamp last = grid.rbegin()->first;
        for (Timestamp t = first; t <= last; t += kSampleInterval) {
            timestamps.push_back(t);
            const auto it = grid.find(t);
            for (std::size_t p = 0; p < n; ++p) {
                if (it == grid.end() || it->second[p].count == 0) {
                    values.push_back(kMissing);
                } else {
                    values.push_back(it->second[p].sum / it->second[p].count);
                }
            }
        }
    }
    return PanelMatrix(std::move(ids), std::move(timestamps), std::move(values), utc_offset);
}

}  // namespace panelwatch
