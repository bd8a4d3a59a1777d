#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "panelwatch/classifier.hpp"
#include "panelwatch/detector.hpp"
#include "panelwatch/forecaster.hpp"
#include "panelwatch/predictors.hpp"

namespace panelwatch {

inline constexpr int kModelFormatVersion = 1;

/// Everything `detect` needs: fitted candidates and a forecaster per panel.
struct ModelBundle {
    std::uint64_t seed = 0;
    std::size_t inputs = 5;
    CandidateStrategy strategy = CandidateStrategy::SamePlaneFirst;
    std::vector<Date> training_days;
    std::map<std::string, std::vector<PredictionModel>> candidates;  // target -> candidates in selection order
    std::map<std::string, ForecastModel> forecasters;
};

std::string model_bundle_json(const ModelBundle& bundle);
/// Throws Format for malformed documents or an unsupported version.
ModelBundle parse_model_bundle(std::string_view text);

std::string forest_json(const ForestClassifier& forest);
ForestClassifier parse_forest(std::string_view text);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace panelwatch
