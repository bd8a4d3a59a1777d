#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "panelwatch/detector.hpp"
#include "panelwatch/predictors.hpp"

namespace panelwatch {

/// Rows ordered by date, then panel id.
void write_reports_csv(std::ostream& out, std::span<const FaultReport> reports);
void write_reports_csv(const std::filesystem::path& path, std::span<const FaultReport> reports);
std::vector<FaultReport> parse_reports_csv(const std::filesystem::path& path);

/// One row per daylight sample of every non-system-wide estimate.
void write_losses_csv(std::ostream& out, std::span<const LossEstimate> losses);
void write_losses_csv(const std::filesystem::path& path, std::span<const LossEstimate> losses);
/// `daily_loss_ratio` is not stored and comes back as 0.
std::vector<LossEstimate> parse_losses_csv(const std::filesystem::path& path);

/// Plain-text per-date fault roster.
std::string render_report(std::span<const FaultReport> reports);

}  // namespace panelwatch
