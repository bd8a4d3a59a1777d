#include "panelwatch/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "hash.hpp"
#include "panelwatch/error.hpp"

namespace panelwatch {

std::array<double, kFeatureCount> FeatureVector::flatten() const {
    std::array<double, kFeatureCount> out{};
    std::copy(loss_samples.begin(), loss_samples.end(), out.begin());
    out[kLossSamples] = month;
    out[kLossSamples + 1] = snow_depth;
    out[kLossSamples + 2] = corr_mean;
    out[kLossSamples + 3] = capacity_ratio;
    return out;
}

FeatureVector extract_features(const FaultReport& report, const LossEstimate& loss, const DaySlice& day,
                               const WeatherSeries& weather, double capacity_w, std::uint64_t seed,
                               const FeatureOptions& options) {
    if (!report.flagged) {
        throw Error(ErrorCode::NotFlagged, fmt::format("{} on {} is not flagged", report.panel_id, format_date(report.date)));
    }
    if (loss.date != report.date || loss.panel_id != report.panel_id) {
        throw Error(ErrorCode::InvalidArgument, "loss estimate does not match the report");
    }
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < loss.anomaly_loss.size(); ++i) {
        if (!is_missing(loss.anomaly_loss[i]) && loss.predicted[i] > 0.0) usable.push_back(i);
    }
    if (usable.empty()) {
        throw Error(ErrorCode::InsufficientData, fmt::format("no daylight loss samples for {}", report.panel_id));
    }

    const std::uint64_t panel = fnv1a(report.panel_id);
    const auto days = std::chrono::sys_days{report.date}.time_since_epoch().count();
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(panel), static_cast<std::uint32_t>(panel >> 32),
                      static_cast<std::uint32_t>(days)};
    std::mt19937_64 rng(seq);

    FeatureVector fv;
    if (options.with_replacement || usable.size() < kLossSamples) {
        std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
        for (std::size_t j = 0; j < kLossSamples; ++j) fv.sampled.push_back(usable[pick(rng)]);
    } else {
        for (std::size_t j = 0; j < kLossSamples; ++j) {
            std::uniform_int_distribution<std::size_t> pick(j, usable.size() - 1);
            std::swap(usable[j], usable[pick(rng)]);
            fv.sampled.push_back(usable[j]);
        }
    }
    for (std::size_t j = 0; j < kLossSamples; ++j) {
        const std::size_t i = fv.sampled[j];
        fv.loss_samples[j] = std::clamp(-loss.anomaly_loss[i] / loss.predicted[i], 0.0, 1.0);
    }

    fv.month = unsigned(report.date.month());
    fv.snow_depth = weather.max_snow_depth(report.date, day.all_rows.utc_offset()).value_or(0.0);
    try {
        fv.corr_mean = correlation_level(day, report.panel_id).r_mean;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientOverlap) throw;
        fv.corr_mean = 0.0;
    }
    try {
        fv.capacity_ratio = capacity_level(day, report.panel_id, capacity_w).ratio;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::AllMissing) throw;
        fv.capacity_ratio = 0.0;
    }
    return fv;
}

namespace {

int class_index(FaultLabel label) {
    const auto it = std::find(kPanelClasses.begin(), kPanelClasses.end(), label);
    if (it == kPanelClasses.end()) {
        throw Error(ErrorCode::UnknownClass, fmt::format("{} is not a panel-level class", to_string(label)));
    }
    return static_cast<int>(it - kPanelClasses.begin());
}

}  // namespace

bool ForestClassifier::trained_on(FaultLabel label) const {
    const auto it = std::find(kPanelClasses.begin(), kPanelClasses.end(), label);
    return it != kPanelClasses.end() && meta.class_counts[static_cast<std::size_t>(it - kPanelClasses.begin())] > 0;
}

ForestClassifier fit_forest(std::span<const TrainingExample> training, std::uint64_t seed,
                            const ForestParams& params) {
    if (training.empty()) throw Error(ErrorCode::EmptyInput, "no training examples");
    if (params.trees == 0) throw Error(ErrorCode::InvalidArgument, "a forest needs at least one tree");

    // canonical order, so the input order of `training` cannot matter
    struct Row {
        std::array<double, kFeatureCount> x;
        int label;
    };
    std::vector<Row> rows;
    ForestClassifier forest;
    for (const auto& ex : training) {
        const int c = class_index(ex.label);
        ++forest.meta.class_counts[static_cast<std::size_t>(c)];
        rows.push_back(Row{ex.features.flatten(), c});
    }
    for (std::size_t c = 0; c < kPanelClasses.size(); ++c) {
        const std::size_t n = forest.meta.class_counts[c];
        if (n > 0 && n < 5) {
            throw Error(ErrorCode::ClassTooSmall,
                        fmt::format("{} has {} training examples, need 5", to_string(kPanelClasses[c]), n));
        }
    }
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return std::tie(a.label, a.x) < std::tie(b.label, b.x); });

    FeatureTable x(kFeatureCount);
    std::vector<int> labels;
    for (const auto& r : rows) {
        x.add_row(r.x);
        labels.push_back(r.label);
    }
    const TreeParams tree_params{params.max_depth, params.min_leaf, params.features_per_split};
    forest.meta.trees = params.trees;
    forest.meta.seed = seed;
    for (std::size_t t = 0; t < params.trees; ++t) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(t)};
        std::mt19937_64 rng(seq);
        std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
        std::vector<std::size_t> sample(rows.size());
        for (auto& s : sample) s = pick(rng);
        forest.trees.push_back(DecisionTree::fit_classification(x, labels, static_cast<int>(kPanelClasses.size()),
                                                                sample, tree_params, rng));
    }
    return forest;
}

Classification classify(const ForestClassifier& forest, const FeatureVector& features) {
    if (forest.trees.empty()) throw Error(ErrorCode::InvalidArgument, "forest has no trees");
    const auto x = features.flatten();
    std::array<std::size_t, kPanelClasses.size()> votes{};
    for (const auto& tree : forest.trees) {
        const auto c = static_cast<std::size_t>(std::lround(tree.predict(x)));
        if (c >= votes.size()) throw Error(ErrorCode::Format, "tree leaf holds an unknown class");
        ++votes[c];
    }
    // max_element returns the first maximum, which is the tie-break order
    const auto best = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    return Classification{kPanelClasses[best],
                          static_cast<double>(votes[best]) / static_cast<double>(forest.trees.size()), votes[best]};
}

FaultLabel classify_systemwide(std::span<const FaultReport> reports, const WeatherSeries& weather,
                               std::chrono::minutes utc_offset) {
    const auto marked = std::find_if(reports.begin(), reports.end(), [](const FaultReport& r) { return r.system_wide; });
    if (marked == reports.end()) throw Error(ErrorCode::InvalidArgument, "no system-wide report");
    const Date date = marked->date;
    for (const Date d : {date, previous_day(date)}) {
        if (weather.max_snow_depth(d, utc_offset).value_or(0.0) > 0.0) return FaultLabel::FullSnow;
    }
    return FaultLabel::SystemElectrical;
}

}  // namespace panelwatch
