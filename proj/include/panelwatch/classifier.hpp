#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "panelwatch/detector.hpp"
#include "panelwatch/ingest.hpp"
#include "panelwatch/tree.hpp"
#include "panelwatch/weather.hpp"

namespace panelwatch {

inline constexpr std::size_t kLossSamples = 40;
inline constexpr std::size_t kFeatureCount = kLossSamples + 4;

/// Panel-level classes in tie-break order.
inline constexpr std::array<FaultLabel, 3> kPanelClasses{FaultLabel::Snow, FaultLabel::Occlusion,
                                                         FaultLabel::OpenCircuit};

struct FeatureVector {
    std::array<double, kLossSamples> loss_samples{};
    unsigned month = 1;
    double snow_depth = 0.0;   // cm
    double corr_mean = 0.0;
    double capacity_ratio = 0.0;
    std::vector<std::size_t> sampled;  // indices into the loss estimate, in draw order

    std::array<double, kFeatureCount> flatten() const;
};

struct FeatureOptions {
    bool with_replacement = false;  // forced on when fewer than 40 usable points exist
};

/// Samples 40 daylight points of `loss`. `day` supplies the correlation and
/// capacity features. Throws NotFlagged for unflagged reports.
FeatureVector extract_features(const FaultReport& report, const LossEstimate& loss, const DaySlice& day,
                               const WeatherSeries& weather, double capacity_w, std::uint64_t seed,
                               const FeatureOptions& options = {});

struct TrainingExample {
    FeatureVector features;
    FaultLabel label = FaultLabel::Snow;
};

struct ForestParams {
    std::size_t trees = 101;
    std::size_t features_per_split = 7;
    int max_depth = 16;
    std::size_t min_leaf = 1;
};

struct ForestMeta {
    std::size_t trees = 0;
    std::uint64_t seed = 0;
    std::array<std::size_t, kPanelClasses.size()> class_counts{};
};

/// Leaves hold an index into `kPanelClasses`.
struct ForestClassifier {
    std::vector<DecisionTree> trees;
    ForestMeta meta;

    bool trained_on(FaultLabel label) const;
};

/// Throws ClassTooSmall when a class present in `training` has fewer than
/// five examples, UnknownClass for labels outside `kPanelClasses`.
ForestClassifier fit_forest(std::span<const TrainingExample> training, std::uint64_t seed,
                            const ForestParams& params = {});

struct Classification {
    FaultLabel label = FaultLabel::Snow;
    double confidence = 0.0;
    std::size_t votes = 0;
};

Classification classify(const ForestClassifier& forest, const FeatureVector& features);

/// FullSnow when snow lies on the date or the day before, else SystemElectrical.
FaultLabel classify_systemwide(std::span<const FaultReport> reports, const WeatherSeries& weather,
                               std::chrono::minutes utc_offset);

}  // namespace panelwatch
