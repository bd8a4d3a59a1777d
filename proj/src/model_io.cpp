#include "panelwatch/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "panelwatch/error.hpp"

namespace panelwatch {

using json = nlohmann::ordered_json;

namespace {

json optional_number(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
double number_or_nan(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

json tree_json(const DecisionTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes()) nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.value}));
    return nodes;
}

DecisionTree parse_tree(const json& j) {
    std::vector<TreeNode> nodes;
    for (const auto& n : j) {
        if (!n.is_array() || n.size() != 5) throw Error(ErrorCode::Format, "tree node must have five fields");
        nodes.push_back(TreeNode{n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<double>()});
    }
    const int count = static_cast<int>(nodes.size());
    for (const auto& n : nodes) {
        if (n.feature >= 0 && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count)) {
            throw Error(ErrorCode::Format, "tree node points outside the tree");
        }
    }
    if (nodes.empty()) throw Error(ErrorCode::Format, "empty tree");
    return DecisionTree(std::move(nodes));
}

json model_json(const PredictionModel& m) {
    json j;
    j["target"] = m.target;
    j["inputs"] = m.inputs;
    j["kind"] = to_string(m.kind);
    j["target_capacity_w"] = optional_number(m.target_capacity_w);
    if (m.kind == ModelKind::Linear) {
        j["weights"] = m.weights;
        j["intercept"] = m.intercept;
    }
    if (m.kind == ModelKind::Ensemble) {
        json trees = json::array();
        for (const auto& t : m.trees) trees.push_back(tree_json(t));
        j["trees"] = std::move(trees);
    }
    json days = json::array();
    for (const auto& d : m.meta.days) days.push_back(format_date(d));
    j["training"] = {{"days", days}, {"seed", m.meta.seed}, {"rows", m.meta.rows}, {"ridge_lambda", m.meta.ridge_lambda}};
    return j;
}

PredictionModel parse_model(const json& j) {
    PredictionModel m;
    m.target = j.at("target").get<std::string>();
    m.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.target_capacity_w = number_or_nan(j.at("target_capacity_w"));
    if (m.kind == ModelKind::Linear) {
        m.weights = j.at("weights").get<std::vector<double>>();
        m.intercept = j.at("intercept").get<double>();
        if (m.weights.size() != m.inputs.size()) throw Error(ErrorCode::Format, "weights do not match inputs");
    }
    if (m.kind == ModelKind::Ensemble) {
        for (const auto& t : j.at("trees")) m.trees.push_back(parse_tree(t));
        if (m.trees.empty()) throw Error(ErrorCode::Format, "ensemble without trees");
    }
    const auto& t = j.at("training");
    for (const auto& d : t.at("days")) m.meta.days.push_back(parse_date(d.get<std::string>()));
    m.meta.seed = t.at("seed").get<std::uint64_t>();
    m.meta.rows = t.at("rows").get<std::size_t>();
    m.meta.ridge_lambda = t.at("ridge_lambda").get<double>();
    return m;
}

json forecaster_json(const ForecastModel& f) {
    json profiles = json::object();
    for (const auto& [month, profile] : f.profiles) profiles[std::to_string(month)] = profile;
    return {{"panel_id", f.panel_id},
            {"capacity_w", f.capacity_w},
            {"cloud_response", f.cloud_response},
            {"cloud_response_defaulted", f.cloud_response_defaulted},
            {"profiles", profiles}};
}

ForecastModel parse_forecaster(const json& j) {
    ForecastModel f;
    f.panel_id = j.at("panel_id").get<std::string>();
    f.capacity_w = j.at("capacity_w").get<double>();
    f.cloud_response = j.at("cloud_response").get<double>();
    f.cloud_response_defaulted = j.at("cloud_response_defaulted").get<bool>();
    if (f.cloud_response < 0.0 || f.cloud_response > 1.5) throw Error(ErrorCode::Format, "cloud_response outside [0, 1.5]");
    for (const auto& [key, profile] : j.at("profiles").items()) {
        const unsigned month = static_cast<unsigned>(std::stoul(key));
        auto values = profile.get<std::vector<double>>();
        if (month < 1 || month > 12 || values.size() != kSlotsPerDay) throw Error(ErrorCode::Format, "bad forecaster profile");
        f.profiles[month] = std::move(values);
    }
    return f;
}

json parse_document(std::string_view text, std::string_view format) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Format, e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != format) {
        throw Error(ErrorCode::Format, fmt::format("not a {} document", format));
    }
    if (doc.value("version", 0) != kModelFormatVersion) {
        throw Error(ErrorCode::Format, fmt::format("unsupported {} version {}", format, doc.value("version", 0)));
    }
    return doc;
}

// Converts library exceptions from a malformed document into Format errors.
template <class F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Format, e.what());
    } catch (const std::invalid_argument& e) {
        throw Error(ErrorCode::Format, e.what());
    }
}

}  // namespace

std::string model_bundle_json(const ModelBundle& bundle) {
    json doc;
    doc["format"] = "panelwatch.models";
    doc["version"] = kModelFormatVersion;
    doc["seed"] = bundle.seed;
    doc["inputs"] = bundle.inputs;
    doc["strategy"] = to_string(bundle.strategy);
    json days = json::array();
    for (const auto& d : bundle.training_days) days.push_back(format_date(d));
    doc["training_days"] = std::move(days);
    json panels = json::array();
    for (const auto& [target, models] : bundle.candidates) {
        json p;
        p["target"] = target;
        json candidates = json::array();
        for (const auto& m : models) candidates.push_back(model_json(m));
        p["candidates"] = std::move(candidates);
        if (auto f = bundle.forecasters.find(target); f != bundle.forecasters.end()) p["forecaster"] = forecaster_json(f->second);
        panels.push_back(std::move(p));
    }
    doc["panels"] = std::move(panels);
    return doc.dump(1) + "\n";
}

ModelBundle parse_model_bundle(std::string_view text) {
    const json doc = parse_document(text, "panelwatch.models");
    return guarded([&] {
        ModelBundle b;
        b.seed = doc.at("seed").get<std::uint64_t>();
        b.inputs = doc.at("inputs").get<std::size_t>();
        b.strategy = parse_candidate_strategy(doc.at("strategy").get<std::string>());
        for (const auto& d : doc.at("training_days")) b.training_days.push_back(parse_date(d.get<std::string>()));
        for (const auto& p : doc.at("panels")) {
            const auto target = p.at("target").get<std::string>();
            auto& models = b.candidates[target];
            for (const auto& m : p.at("candidates")) {
                models.push_back(parse_model(m));
                if (models.back().target != target) throw Error(ErrorCode::Format, "candidate target mismatch");
            }
            if (p.contains("forecaster")) b.forecasters.emplace(target, parse_forecaster(p.at("forecaster")));
        }
        return b;
    });
}

std::string forest_json(const ForestClassifier& forest) {
    json doc;
    doc["format"] = "panelwatch.forest";
    doc["version"] = kModelFormatVersion;
    json classes = json::array();
    for (auto c : kPanelClasses) classes.push_back(to_string(c));
    doc["classes"] = std::move(classes);
    doc["seed"] = forest.meta.seed;
    doc["class_counts"] = forest.meta.class_counts;
    json trees = json::array();
    for (const auto& t : forest.trees) trees.push_back(tree_json(t));
    doc["trees"] = std::move(trees);
    return doc.dump(1) + "\n";
}

ForestClassifier parse_forest(std::string_view text) {
    const json doc = parse_document(text, "panelwatch.forest");
    return guarded([&] {
        std::vector<std::string> classes;
        for (auto c : kPanelClasses) classes.emplace_back(to_string(c));
        if (doc.at("classes").get<std::vector<std::string>>() != classes) {
            throw Error(ErrorCode::Format, "forest class list differs from this build");
        }
        ForestClassifier f;
        f.meta.seed = doc.at("seed").get<std::uint64_t>();
        f.meta.class_counts = doc.at("class_counts").get<decltype(f.meta.class_counts)>();
        for (const auto& t : doc.at("trees")) f.trees.push_back(parse_tree(t));
        if (f.trees.empty()) throw Error(ErrorCode::Format, "forest without trees");
        f.meta.trees = f.trees.size();
        return f;
    });
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, fmt::format("cannot read {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write {}", path.string()));
    out << text;
}

}  // namespace panelwatch
