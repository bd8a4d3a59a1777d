#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "panelwatch/classifier.hpp"
#include "panelwatch/detector.hpp"
#include "panelwatch/predictors.hpp"
#include "panelwatch/simulator.hpp"

namespace panelwatch {

/// Mean absolute error over non-missing pairs, divided by the mean observed value.
/// Throws EmptyInput, ZeroMeanObserved, LengthMismatch.
double mape(std::span<const double> observed, std::span<const double> inferred);

struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<std::size_t>> counts;  // [truth][predicted]

    std::size_t total() const;
    std::size_t row_sum(std::size_t truth) const;
    std::size_t col_sum(std::size_t predicted) const;
    std::size_t index_of(std::string_view label) const;  // throws UnknownClass
    std::size_t at(std::string_view truth, std::string_view predicted) const;
};

ConfusionMatrix confusion(std::span<const std::string> predicted, std::span<const std::string> truth,
                          std::vector<std::string> classes);

/// Ratios are empty when their denominator is zero.
struct MetricsReport {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::optional<double> mape;
    std::optional<double> accuracy;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
};

MetricsReport binary_metrics(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn);
/// Collapses `cm` to `positive` against the rest.
MetricsReport binary_metrics(const ConfusionMatrix& cm, std::string_view positive);
std::vector<std::pair<std::string, MetricsReport>> per_class_metrics(const ConfusionMatrix& cm);

// ---------------------------------------------------------------------------
// Parameter studies

enum class Study {
    ModelComparison,
    TrainingSize,
    PanelCount,
    RoofGeometry,
    Weather,
    SingleFault,
    ConcurrentFault,
    SystemWide,
    Abcd,
};

std::string_view to_string(Study s);
Study parse_study(std::string_view text);
std::vector<Study> all_studies();

struct StudyConfig {
    std::size_t seeds = 20;
    std::uint64_t base_seed = 0;

    // prediction studies
    unsigned month = 6;
    int panels = 12;
    int train_days = 4;
    int test_days = 6;
    std::size_t inputs = 5;
    bool site_shade = true;
    std::vector<int> training_sizes{1, 2, 4, 8};
    std::vector<std::size_t> input_counts{1, 3, 5, 7};
    FitConfig fit;

    // detection studies
    std::vector<unsigned> fault_months{1, 7};
    int history_days = 8;
    int fault_days = 10;
    int clean_days = 10;
    std::size_t concurrent = 3;
    int concurrent_fault_days = 4;
    int concurrent_clean_days = 2;
    std::vector<double> occlusion_severities{0.4, 0.7, 1.0};
    int snow_days = 4;
    int electrical_days = 2;
    std::size_t forest_trees = 101;
    std::size_t forest_seeds = 6;
    CandidateOptions candidates;
    DetectorConfig detector;
};

struct StudyObservation {
    std::string condition;
    std::string metric;
    std::uint64_t seed = 0;
    double value = 0.0;
};

/// Per (condition, metric): spread over seeds and, for rates, the value
/// pooled over every seed's counts.
struct StudySummary {
    std::string condition;
    std::string metric;
    std::size_t seeds = 0;
    double mean = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    std::optional<double> pooled;
};

struct StudyReport {
    Study study = Study::ModelComparison;
    StudyConfig config;
    std::vector<StudyObservation> observations;  // seed order, then emission order
    std::vector<StudySummary> summary;           // first-appearance order
    std::vector<std::string> class_order;
    std::optional<ConfusionMatrix> confusion;

    /// Throws InvalidArgument for an unknown row.
    const StudySummary& get(std::string_view condition, std::string_view metric) const;
    double mean(std::string_view condition, std::string_view metric) const { return get(condition, metric).mean; }
    double pooled(std::string_view condition, std::string_view metric) const;
};

StudyReport run_study(Study study, const StudyConfig& config);

/// study.csv: one row per summary entry.
std::string study_csv(const StudyReport& report);
/// study_long.csv: one row per observation.
std::string study_long_csv(const StudyReport& report);
std::string study_json(const StudyReport& report);
void write_study(const StudyReport& report, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Shared simulation fixtures

/// Recurring morning, midday and evening shade on four panels of a
/// single-plane array, used by the prediction studies.
std::vector<ShadeSpec> site_shade();

/// Forest training examples from simulated single-fault days. Seeds are
/// `base_seed + i` for `i < seeds`.
std::vector<TrainingExample> simulate_training_set(const StudyConfig& config, std::uint64_t base_seed,
                                                   std::size_t seeds);

}  // namespace panelwatch
