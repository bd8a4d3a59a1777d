#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panelwatch/ingest.hpp"
#include "panelwatch/layout.hpp"
#include "panelwatch/tree.hpp"

namespace panelwatch {

enum class ModelKind { NaiveMean, Linear, Ensemble };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct FitConfig {
    int trees = 50;
    int max_depth = 12;
    std::size_t min_leaf = 5;
    std::uint64_t seed = 0;
    bool intercept = true;
    /// Upper prediction clamp is 1.25x this; NaN disables the upper clamp.
    double target_capacity_w = std::nan("");
};

struct TrainingMeta {
    std::vector<Date> days;
    std::uint64_t seed = 0;
    std::size_t rows = 0;
    /// Non-zero when the design was rank deficient and ridge was used instead of OLS.
    double ridge_lambda = 0.0;
};

/// Estimator of one panel's output from the outputs of `inputs`.
struct PredictionModel {
    std::string target;
    std::vector<std::string> inputs;
    ModelKind kind = ModelKind::NaiveMean;
    std::vector<double> weights;  // Linear
    double intercept = 0.0;       // Linear
    std::vector<DecisionTree> trees;  // Ensemble
    double target_capacity_w = std::nan("");
    TrainingMeta meta;

    /// Unclamped estimate for one row of input powers; NaN if any input is missing.
    double estimate(std::span<const double> input_watts) const;
    /// Ensemble only: each tree's estimate for one row.
    std::vector<double> tree_estimates(std::span<const double> input_watts) const;
};

/// Fits on daylight rows of `training` where the target and every input are
/// present. Throws InsufficientData below 10 * (n + 1) such rows.
PredictionModel fit(ModelKind kind, std::string_view target, const std::vector<std::string>& inputs,
                    std::span<const DaySlice> training, const FitConfig& config);

/// One prediction per row of `matrix`, clamped to [0, 1.25 * capacity];
/// rows with a missing input give kMissing. Throws MissingInputPanel.
std::vector<double> predict(const PredictionModel& model, const PanelMatrix& matrix);
/// Predictions for the daylight rows of `day`.
std::vector<double> predict(const PredictionModel& model, const DaySlice& day);

/// observed - predicted, elementwise; missing propagates. Throws LengthMismatch.
std::vector<double> residual(std::span<const double> observed, std::span<const double> predicted);

/// Other panels ordered by proximity to `target`: same roof plane first,
/// then by distance in layout order, then layout index.
std::vector<std::string> neighbor_order(const ArrayLayout& layout, std::string_view target);

/// The default model inputs: the first `n` panels of `neighbor_order`.
std::vector<std::string> select_inputs(const ArrayLayout& layout, std::string_view target, std::size_t n);

// ---------------------------------------------------------------------------
// Transient removal

/// One day of residuals keyed by local time-of-day slot.
struct ResidualDay {
    Date date;
    std::vector<std::size_t> slots;
    std::vector<double> residual;
    bool faulty = false;
};

struct SeasonalConfig {
    std::size_t min_days = 7;
    std::size_t window_days = 14;
};

/// Typical residual at each time-of-day slot; NaN where no estimate exists.
struct SeasonalProfile {
    std::vector<double> by_slot = std::vector<double>(kSlotsPerDay, std::nan(""));
    std::size_t days_used = 0;

    /// Zero where the profile has no estimate.
    double at(std::size_t slot) const;
    static SeasonalProfile zero();
};

/// Per-slot median over the trailing `window_days` non-faulty days. A slot
/// needs values from at least half of `min_days` days to get an estimate.
/// Throws InsufficientHistory below `min_days` usable days.
SeasonalProfile seasonal_decompose(std::span<const ResidualDay> history, const SeasonalConfig& config = {});

struct LossEstimate {
    std::string panel_id;
    Date date;
    std::vector<std::size_t> slots;
    std::vector<double> observed;
    std::vector<double> predicted;
    std::vector<double> residual;
    std::vector<double> seasonal;
    std::vector<double> anomaly_loss;  // residual - seasonal; negative means lost output
    double daily_loss_ratio = 0.0;     // sum of max(0, -anomaly_loss) / sum of predicted
};

LossEstimate estimate_loss(std::string_view panel_id, Date date, std::span<const std::size_t> slots,
                           std::span<const double> observed, std::span<const double> predicted,
                           const SeasonalProfile& seasonal);

}  // namespace panelwatch
