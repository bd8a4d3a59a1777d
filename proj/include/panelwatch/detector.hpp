#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panelwatch/forecaster.hpp"
#include "panelwatch/ingest.hpp"
#include "panelwatch/layout.hpp"
#include "panelwatch/predictors.hpp"
#include "panelwatch/weather.hpp"

namespace panelwatch {

enum class CandidateStrategy { SamePlaneFirst, AllSubsets, RandomSubsets };

std::string_view to_string(CandidateStrategy s);
CandidateStrategy parse_candidate_strategy(std::string_view text);

struct CandidateOptions {
    CandidateStrategy strategy = CandidateStrategy::SamePlaneFirst;
    std::size_t random_count = 200;  // RandomSubsets(m, seed)
    std::uint64_t seed = 0;
    std::size_t cap = 200;           // AllSubsets enumerates at most this many
    std::size_t swap_variants = 10;  // SamePlaneFirst
    FitConfig fit;
};

/// Candidate input subsets for one target panel, each backed by an Ensemble
/// model. Subsets list panel ids in the target's neighbor order; models are
/// fitted on first use and then shared.
class CandidateSet {
public:
    CandidateSet(std::string target, std::vector<std::vector<std::string>> subsets,
                 std::shared_ptr<const std::vector<DaySlice>> training, FitConfig fit);
    /// A set whose models are already fitted (e.g. loaded from a model document).
    static CandidateSet from_models(std::string target, std::vector<PredictionModel> models);

    const std::string& target() const { return target_; }
    const std::vector<std::vector<std::string>>& subsets() const { return subsets_; }
    std::size_t size() const { return subsets_.size(); }

    const PredictionModel& model(std::size_t index) const;
    std::vector<PredictionModel> fit_all() const;

private:
    struct Cache {
        std::mutex mutex;
        std::vector<std::shared_ptr<const PredictionModel>> models;
    };

    std::string target_;
    std::vector<std::vector<std::string>> subsets_;
    std::shared_ptr<const std::vector<DaySlice>> training_;
    FitConfig fit_;
    std::shared_ptr<Cache> cache_;
};

/// Throws TooFewPanels when n > N - 1.
CandidateSet build_candidates(const ArrayLayout& layout, std::string_view target, std::size_t n,
                              const CandidateOptions& options, std::shared_ptr<const std::vector<DaySlice>> training);

struct Selection {
    std::size_t index = 0;
    std::size_t noisy_inputs = 0;
};

/// First candidate with no Noisy input, ordered by (Noisy input count,
/// candidate index). Throws NoCleanModel.
Selection select_model(const CandidateSet& candidates, std::span<const InputLabel> labels);

/// Candidate with the fewest Noisy inputs (ties to the lowest index).
Selection fewest_noisy(const CandidateSet& candidates, std::span<const InputLabel> labels);

// ---------------------------------------------------------------------------

enum class FaultLabel { Snow, Occlusion, OpenCircuit, FullSnow, SystemElectrical };

std::string_view to_string(FaultLabel v);
FaultLabel parse_fault_label(std::string_view text);

struct FaultReport {
    std::string panel_id;
    Date date;
    bool flagged = false;
    bool system_wide = false;
    bool low_confidence = false;
    double daily_loss_ratio = 0.0;
    double persistence = 0.0;
    std::vector<std::string> model_inputs;
    std::optional<FaultLabel> class_label;
    double confidence = 1.0;
    std::string warning;
};

struct DetectionThresholds {
    double pointwise_deficit = 0.2;  // sample is lossy below -0.2 * predicted
    double persistence_min = 0.5;
    double loss_ratio_min = 0.15;
};

struct DayDetection {
    FaultReport report;
    LossEstimate loss;
};

/// Applies `model` to the daylight rows of `day` and flags the target when
/// the transient-free loss is both large and persistent.
DayDetection detect_day(std::string_view target, const DaySlice& day, const SeasonalProfile& seasonal,
                        const PredictionModel& model, const DetectionThresholds& thresholds = {});

struct DetectorConfig {
    DetectionThresholds thresholds;
    LabelConfig labels;
    SeasonalConfig seasonal;
    /// SystemWide escalation when array energy is below this fraction of nominal daily nameplate energy.
    double system_floor = 0.05;
};

/// Record of one model selection, kept for auditing the Noisy-input contract.
struct SelectionAudit {
    std::string target;
    Date date;
    std::vector<std::string> chosen_inputs;
    bool clean_candidate_exists = false;
    std::size_t noisy_inputs_used = 0;
};

struct DateResult {
    Date date;
    bool system_wide = false;
    std::vector<FaultReport> reports;  // sorted by panel id
    std::vector<LossEstimate> losses;  // parallel to reports; empty vectors for SystemWide
    std::vector<InputLabel> labels;
    std::vector<SelectionAudit> audits;
};

/// Sequential per-date detector. Keeps a trailing residual history per panel
/// so recurring shading is removed once enough clean days have been seen.
class ArrayDetector {
public:
    ArrayDetector(ArrayLayout layout, std::map<std::string, CandidateSet> candidates,
                  std::map<std::string, ForecastModel> forecasters, DetectorConfig config = {});

    DateResult detect_date(const DaySlice& day, const WeatherSeries& weather);
    std::vector<DateResult> run(std::span<const DaySlice> days, const WeatherSeries& weather);

    /// Appends a day to a panel's residual history.
    void add_history(const std::string& panel_id, ResidualDay day);

private:
    ArrayLayout layout_;
    std::map<std::string, CandidateSet> candidates_;
    std::map<std::string, ForecastModel> forecasters_;
    DetectorConfig config_;
    std::map<std::string, std::vector<ResidualDay>> history_;
};

/// Runs `ArrayDetector` over `days` and returns every report, ordered by date then panel id.
std::vector<FaultReport> detect_array(const ArrayLayout& layout, std::map<std::string, CandidateSet> candidates,
                                      std::map<std::string, ForecastModel> forecasters,
                                      std::span<const DaySlice> days, const WeatherSeries& weather,
                                      const DetectorConfig& config = {});

}  // namespace panelwatch
