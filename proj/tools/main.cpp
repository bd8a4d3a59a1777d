// panelwatch command-line front end.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "panelwatch/classifier.hpp"
#include "panelwatch/detector.hpp"
#include "panelwatch/error.hpp"
#include "panelwatch/evaluate.hpp"
#include "panelwatch/forecaster.hpp"
#include "panelwatch/ingest.hpp"
#include "panelwatch/model_io.hpp"
#include "panelwatch/reports.hpp"
#include "panelwatch/simulator.hpp"
#include "panelwatch/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace panelwatch;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::string sha256_file(const fs::path& path) {
    const std::string data = read_text(path);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::Io, "sha256 failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

/// Records one subcommand run in `<dir>/run_manifest.json`, replacing any
/// earlier entry for the same subcommand.
class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)) {}

    void config(const CLI::App& app) {
        for (const CLI::Option* opt : app.get_options()) {
            const std::string name = opt->get_single_name();
            if (name.empty() || name == "help" || name == "config") continue;
            const auto results = opt->results();
            if (opt->get_expected_max() > 1) {
                config_[name] = results;
            } else if (!results.empty()) {
                config_[name] = results.back();
            } else {
                config_[name] = opt->get_default_str();
            }
        }
    }
    void seed(std::uint64_t s) { seed_ = s; }
    void input(const fs::path& p) { inputs_.push_back(p); }
    void output(const fs::path& p) { outputs_.push_back(p); }

    void write(const fs::path& dir) const {
        const fs::path path = dir / "run_manifest.json";
        json doc;
        if (fs::exists(path)) {
            try {
                doc = json::parse(read_text(path));
            } catch (const json::exception&) {
                doc = json();
            }
        }
        if (!doc.is_object() || !doc.contains("runs")) doc = json{{"runs", json::object()}};
        json run;
        run["tool"] = "panelwatch";
        run["version"] = kVersion;
        run["config"] = config_;
        run["seed"] = seed_ ? json(*seed_) : json(nullptr);
        run["inputs"] = digests(inputs_);
        run["outputs"] = digests(outputs_);
        doc["runs"][command_] = std::move(run);
        write_text(path, doc.dump(2) + "\n");
    }

private:
    static json digests(const std::vector<fs::path>& paths) {
        json out = json::array();
        for (const auto& p : paths) out.push_back({{"path", p.generic_string()}, {"sha256", sha256_file(p)}});
        return out;
    }

    std::string command_;
    json config_ = json::object();
    std::optional<std::uint64_t> seed_;
    std::vector<fs::path> inputs_;
    std::vector<fs::path> outputs_;
};

fs::path directory_of(const fs::path& file) {
    return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

// ---------------------------------------------------------------------------
// Shared inputs

struct ArrayData {
    ArrayLayout layout;
    PanelMatrix matrix;
    WeatherSeries weather;
    std::vector<DaySlice> days;
};

ArrayData load_array(const fs::path& layout_path, const fs::path& power_path, const std::optional<fs::path>& weather_path,
                     Manifest& manifest) {
    ArrayData d;
    d.layout = parse_layout(layout_path);
    d.matrix = parse_power_csv(power_path, d.layout.utc_offset);
    check_power_bounds(d.matrix, d.layout);
    manifest.input(layout_path);
    manifest.input(power_path);
    if (weather_path) {
        d.weather = parse_weather_csv(*weather_path);
        manifest.input(*weather_path);
    }
    d.days = segment_days(d.matrix, daylight_rule_for(d.layout));
    return d;
}

std::vector<DaySlice> select_days(const std::vector<DaySlice>& days, const std::string& from, const std::string& to) {
    const std::optional<Date> lo = from.empty() ? std::nullopt : std::optional(parse_date(from));
    const std::optional<Date> hi = to.empty() ? std::nullopt : std::optional(parse_date(to));
    std::vector<DaySlice> out;
    for (const auto& d : days) {
        if ((lo && d.date < *lo) || (hi && d.date > *hi)) continue;
        out.push_back(d);
    }
    return out;
}

ArrayLayout preset_layout(const std::string& name) {
    if (name == "four-plane") return layouts::four_plane_home();
    if (name == "abcd") return layouts::abcd();
    if (name.rfind("single-plane", 0) == 0) {
        int count = 12;
        if (const auto colon = name.find(':'); colon != std::string::npos) count = std::stoi(name.substr(colon + 1));
        if (count < 2) throw Error(ErrorCode::InvalidArgument, "a single-plane preset needs at least 2 panels");
        return layouts::single_plane(count);
    }
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown layout preset '{}'", name));
}

/// `panel/date/kind[/severity[/HH:MM-HH:MM]]`
FaultSpec parse_fault_arg(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find('/', start);
        parts.push_back(text.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    if (parts.size() < 3 || parts.size() > 5) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("fault '{}' is not panel/date/kind[/severity[/window]]", text));
    }
    FaultSpec f{parts[0], parse_date(parts[1]), parse_fault_kind(parts[2]), 1.0, std::nullopt, std::nullopt};
    if (parts.size() >= 4) f.severity = std::stod(parts[3]);
    if (parts.size() == 5) {
        auto minutes_of = [&](const std::string& hhmm) {
            const auto colon = hhmm.find(':');
            if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, fmt::format("bad time '{}'", hhmm));
            return std::chrono::minutes{std::stoi(hhmm.substr(0, colon)) * 60 + std::stoi(hhmm.substr(colon + 1))};
        };
        const auto dash = parts[4].find('-');
        if (dash == std::string::npos) throw Error(ErrorCode::InvalidArgument, "fault window must be HH:MM-HH:MM");
        f.start = minutes_of(parts[4].substr(0, dash));
        f.end = minutes_of(parts[4].substr(dash + 1));
    }
    return f;
}

DetectorConfig detector_config(double deficit, double persistence, double loss_ratio, double noisy, double floor) {
    DetectorConfig c;
    c.thresholds.pointwise_deficit = deficit;
    c.thresholds.persistence_min = persistence;
    c.thresholds.loss_ratio_min = loss_ratio;
    c.labels.noisy_threshold = noisy;
    c.system_floor = floor;
    return c;
}

void add_threshold_options(CLI::App* cmd, double& deficit, double& persistence, double& loss_ratio, double& noisy,
                           double& floor) {
    cmd->add_option("--pointwise-deficit", deficit, "A sample is lossy below -deficit x predicted")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--persistence-min", persistence, "Minimum fraction of lossy daylight samples")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--loss-ratio-min", loss_ratio, "Minimum daily loss ratio")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--noisy-threshold", noisy, "Forecast divergence above which an input is Noisy")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--system-floor", floor, "System-wide escalation below this fraction of nameplate energy")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
}

// ---------------------------------------------------------------------------
// Flat key=value config files

/// Inserts `--key=value` for every key in `--config FILE` that the command
/// line does not already set, so flags override the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    std::optional<std::string> file;
    std::set<std::string> given;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--config" && i + 1 < args.size()) {
            file = args[++i];
            continue;
        }
        if (a.rfind("--config=", 0) == 0) {
            file = a.substr(9);
            continue;
        }
        if (a.rfind("--", 0) == 0) {
            const auto eq = a.find('=');
            given.insert(a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2));
        }
        out.push_back(a);
    }
    if (!file) return out;
    std::ifstream in(*file);
    if (!in) throw CLI::ValidationError("--config", fmt::format("cannot read {}", *file));
    std::vector<std::string> from_file;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--config", fmt::format("'{}' is not key=value", line));
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (given.count(key)) continue;
        from_file.push_back(fmt::format("--{}={}", key, value));
    }
    // subcommand name first, then file values, then the command line
    out.insert(out.empty() ? out.end() : out.begin() + 1, from_file.begin(), from_file.end());
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands

struct SimulateArgs {
    std::string layout;
    std::string preset = "single-plane:12";
    std::string start = "2019-06-01";
    int days = 14;
    std::string weather = "Sunny";
    std::vector<std::string> faults;
    std::string faults_file;
    bool site_shade = false;
    double noise = 0.02;
    std::uint64_t seed = 0;
    std::string out = ".";
};

void run_simulate(const SimulateArgs& a, Manifest& manifest) {
    ArrayLayout layout;
    if (!a.layout.empty()) {
        layout = parse_layout(a.layout);
        manifest.input(a.layout);
    } else {
        layout = preset_layout(a.preset);
    }
    if (a.days < 1) throw Error(ErrorCode::InvalidArgument, "--days must be positive");
    const auto dates = consecutive_dates(parse_date(a.start), a.days);
    std::vector<FaultSpec> faults;
    for (const auto& f : a.faults) faults.push_back(parse_fault_arg(f));
    if (!a.faults_file.empty()) {
        for (const auto& t : parse_truth_csv(a.faults_file)) {
            faults.push_back(FaultSpec{t.panel_id, t.date, t.kind, t.severity, std::nullopt, std::nullopt});
        }
        manifest.input(a.faults_file);
    }
    SimOptions options;
    options.noise_sigma = a.noise;
    if (a.site_shade) options.shades = site_shade();
    WeatherProfile profile = WeatherProfile::Sunny;
    if (a.weather == "mixed") {
        std::seed_seq seq{static_cast<std::uint32_t>(a.seed), static_cast<std::uint32_t>(a.seed >> 32), 77u};
        std::mt19937_64 rng(seq);
        options.daily_profiles = draw_profiles(rng, dates.size());
    } else {
        profile = parse_weather_profile(a.weather);
    }
    const auto sim = simulate(layout, dates, profile, faults, a.seed, options);
    const fs::path out(a.out);
    fs::create_directories(out);
    write_power_csv(out / "power.csv", sim.matrix);
    write_weather_csv(out / "weather.csv", sim.weather);
    write_layout(out / "layout.csv", sim.layout);
    write_truth_csv(out / "truth.csv", sim.truth);
    for (const char* name : {"power.csv", "weather.csv", "layout.csv", "truth.csv"}) manifest.output(out / name);
    manifest.seed(a.seed);
    manifest.write(out);
    std::cout << fmt::format("simulated {} panels over {} days into {}\n", layout.panels.size(), dates.size(), out.string());
}

struct IngestArgs {
    std::string power, layout, weather;
    std::string out = ".";
};

void run_ingest(const IngestArgs& a, Manifest& manifest) {
    const auto data = load_array(a.layout, a.power, a.weather.empty() ? std::nullopt : std::optional<fs::path>(a.weather),
                                 manifest);
    const fs::path out(a.out);
    fs::create_directories(out);
    write_power_csv(out / "power.csv", data.matrix);
    manifest.output(out / "power.csv");
    if (!a.weather.empty()) {
        write_weather_csv(out / "weather.csv", data.weather);
        manifest.output(out / "weather.csv");
    }
    {
        std::ofstream labels(out / "day_labels.csv", std::ios::binary);
        if (!labels) throw Error(ErrorCode::Io, "cannot write day_labels.csv");
        labels << "date,panel_id,daylight_rows,capacity_level,capacity_ratio,correlation_level,r_mean\n";
        for (const auto& day : data.days) {
            for (const auto& id : day.all_rows.panel_ids()) {
                std::string cap = ",", corr = ",";
                try {
                    const auto c = capacity_level(day, id, data.layout.panel(id).capacity_w);
                    cap = fmt::format("{},{}", to_string(c.level), c.ratio);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::AllMissing) throw;
                }
                try {
                    const auto r = correlation_level(day, id);
                    corr = fmt::format("{},{}", to_string(r.level), r.r_mean);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::InsufficientOverlap) throw;
                }
                labels << fmt::format("{},{},{},{},{}\n", format_date(day.date), id, day.matrix.rows(), cap, corr);
            }
        }
    }
    manifest.output(out / "day_labels.csv");
    manifest.write(out);
    std::cout << fmt::format("ingested {} panels, {} days\n", data.matrix.cols(), data.days.size());
}

struct TrainArgs {
    std::string power, weather, layout;
    int train_days = 8;
    std::string train_from, train_to;
    std::size_t inputs = 5;
    std::string strategy = "SamePlaneFirst";
    std::size_t random_count = 200;
    int trees = 50;
    int depth = 12;
    std::size_t min_leaf = 5;
    std::uint64_t seed = 0;
    std::string out = "models.json";
    std::string forest_out;
    std::string labels;
    std::size_t forest_seeds = 6;
    std::size_t forest_trees = 101;
};

void run_train(const TrainArgs& a, Manifest& manifest) {
    const auto data = load_array(a.layout, a.power, fs::path(a.weather), manifest);
    std::vector<DaySlice> training;
    if (!a.train_from.empty() || !a.train_to.empty()) {
        training = select_days(data.days, a.train_from, a.train_to);
    } else {
        if (a.train_days < 1) throw Error(ErrorCode::InvalidArgument, "--train-days must be positive");
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(a.train_days), data.days.size());
        training.assign(data.days.begin(), data.days.begin() + static_cast<std::ptrdiff_t>(n));
    }
    if (training.empty()) throw Error(ErrorCode::InsufficientData, "no training days selected");
    auto shared = std::make_shared<const std::vector<DaySlice>>(training);

    CandidateOptions options;
    options.strategy = parse_candidate_strategy(a.strategy);
    options.random_count = a.random_count;
    options.seed = a.seed;
    options.fit.trees = a.trees;
    options.fit.max_depth = a.depth;
    options.fit.min_leaf = a.min_leaf;
    options.fit.seed = a.seed;

    ModelBundle bundle;
    bundle.seed = a.seed;
    bundle.inputs = a.inputs;
    bundle.strategy = options.strategy;
    for (const auto& d : training) bundle.training_days.push_back(d.date);
    std::map<std::string, CandidateSet> sets;
    for (const auto& panel : data.layout.panels) {
        auto set = build_candidates(data.layout, panel.id, a.inputs, options, shared);
        bundle.candidates[panel.id] = set.fit_all();
        sets.emplace(panel.id, std::move(set));
        bundle.forecasters.emplace(panel.id, fit_forecaster(panel.id, training, data.weather, panel.capacity_w));
    }
    const fs::path out(a.out);
    write_text(out, model_bundle_json(bundle));
    manifest.output(out);
    std::cout << fmt::format("trained {} panels on {} days into {}\n", bundle.candidates.size(), training.size(),
                             out.string());

    if (!a.forest_out.empty()) {
        std::vector<TrainingExample> examples;
        if (!a.labels.empty()) {
            // label flagged detections on the non-training days of this array
            const auto truth = parse_truth_csv(a.labels);
            manifest.input(a.labels);
            std::vector<DaySlice> rest;
            for (const auto& d : data.days) {
                if (std::find(bundle.training_days.begin(), bundle.training_days.end(), d.date) == bundle.training_days.end()) {
                    rest.push_back(d);
                }
            }
            ArrayDetector detector(data.layout, sets, bundle.forecasters);
            for (const auto& result : detector.run(rest, data.weather)) {
                for (std::size_t i = 0; i < result.reports.size(); ++i) {
                    const auto& r = result.reports[i];
                    if (!r.flagged || r.system_wide) continue;
                    const auto t = std::find_if(truth.begin(), truth.end(), [&](const TruthLabel& t) {
                        return t.panel_id == r.panel_id && t.date == r.date;
                    });
                    if (t == truth.end() || t->kind == FaultKind::WaterDrops) continue;
                    const auto& day = *std::find_if(rest.begin(), rest.end(), [&](const DaySlice& d) { return d.date == r.date; });
                    examples.push_back(TrainingExample{
                        extract_features(r, result.losses[i], day, data.weather, data.layout.panel(r.panel_id).capacity_w, a.seed),
                        parse_fault_label(to_string(t->kind))});
                }
            }
        } else {
            StudyConfig sc;
            examples = simulate_training_set(sc, a.seed + 1'000'000, a.forest_seeds);
        }
        const auto forest = fit_forest(examples, a.seed, ForestParams{a.forest_trees});
        write_text(a.forest_out, forest_json(forest));
        manifest.output(a.forest_out);
        std::cout << fmt::format("forest of {} trees from {} examples into {}\n", forest.trees.size(), examples.size(),
                                 a.forest_out);
    }
    manifest.seed(a.seed);
    manifest.write(directory_of(out));
}

struct DetectArgs {
    std::string power, weather, layout, models;
    std::string from, to;
    std::string out = ".";
    double deficit = 0.2, persistence = 0.5, loss_ratio = 0.15, noisy = 0.35, floor = 0.05;
};

void run_detect(const DetectArgs& a, Manifest& manifest) {
    const auto data = load_array(a.layout, a.power, fs::path(a.weather), manifest);
    const auto bundle = parse_model_bundle(read_text(a.models));
    manifest.input(a.models);
    std::map<std::string, CandidateSet> candidates;
    for (const auto& [target, models] : bundle.candidates) {
        candidates.emplace(target, CandidateSet::from_models(target, models));
    }
    const auto days = select_days(data.days, a.from, a.to);
    if (days.empty()) throw Error(ErrorCode::InsufficientData, "no days to examine");
    const auto config = detector_config(a.deficit, a.persistence, a.loss_ratio, a.noisy, a.floor);
    ArrayDetector detector(data.layout, std::move(candidates), bundle.forecasters, config);
    const auto results = detector.run(days, data.weather);

    std::vector<FaultReport> reports;
    std::vector<LossEstimate> losses;
    json per_date = json::array();
    std::size_t flagged = 0;
    for (const auto& r : results) {
        json flagged_ids = json::array();
        for (const auto& rep : r.reports) {
            if (rep.flagged) flagged_ids.push_back(rep.panel_id);
            flagged += rep.flagged;
        }
        json noisy = json::array();
        for (const auto& l : r.labels) {
            if (l.label == InputQuality::Noisy) noisy.push_back(l.panel_id);
        }
        per_date.push_back({{"date", format_date(r.date)},
                            {"system_wide", r.system_wide},
                            {"flagged", flagged_ids},
                            {"noisy_inputs", noisy}});
        reports.insert(reports.end(), r.reports.begin(), r.reports.end());
        for (const auto& l : r.losses) {
            if (!l.slots.empty()) losses.push_back(l);
        }
    }
    const fs::path out(a.out);
    fs::create_directories(out);
    write_reports_csv(out / "reports.csv", reports);
    write_losses_csv(out / "losses.csv", losses);
    json summary;
    summary["dates"] = results.size();
    summary["panels"] = data.matrix.cols();
    summary["flagged_panel_days"] = flagged;
    summary["thresholds"] = {{"pointwise_deficit", a.deficit},
                             {"persistence_min", a.persistence},
                             {"loss_ratio_min", a.loss_ratio},
                             {"noisy_threshold", a.noisy},
                             {"system_floor", a.floor}};
    summary["per_date"] = std::move(per_date);
    write_text(out / "summary.json", summary.dump(2) + "\n");
    for (const char* name : {"reports.csv", "losses.csv", "summary.json"}) manifest.output(out / name);
    manifest.seed(bundle.seed);
    manifest.write(out);
    std::cout << fmt::format("{} flagged panel-days over {} dates\n", flagged, results.size());
}

struct ClassifyArgs {
    std::string reports = "reports.csv";
    std::string losses;
    std::string power, weather, layout, forest;
    std::uint64_t seed = 0;
};

void run_classify(const ClassifyArgs& a, Manifest& manifest) {
    const auto data = load_array(a.layout, a.power, fs::path(a.weather), manifest);
    const fs::path reports_path(a.reports);
    const fs::path losses_path = a.losses.empty() ? directory_of(reports_path) / "losses.csv" : fs::path(a.losses);
    auto reports = parse_reports_csv(reports_path);
    const auto losses = parse_losses_csv(losses_path);
    const auto forest = parse_forest(read_text(a.forest));
    manifest.input(reports_path);
    manifest.input(losses_path);
    manifest.input(a.forest);

    std::map<Date, FaultLabel> system_labels;
    std::size_t classified = 0;
    for (auto& r : reports) {
        if (!r.flagged) continue;
        if (r.system_wide) {
            if (!system_labels.count(r.date)) {
                std::vector<FaultReport> same_date;
                for (const auto& o : reports) {
                    if (o.date == r.date) same_date.push_back(o);
                }
                system_labels[r.date] = classify_systemwide(same_date, data.weather, data.layout.utc_offset);
            }
            r.class_label = system_labels[r.date];
            r.confidence = 1.0;
            ++classified;
            continue;
        }
        const auto loss = std::find_if(losses.begin(), losses.end(), [&](const LossEstimate& l) {
            return l.panel_id == r.panel_id && l.date == r.date;
        });
        const auto day = std::find_if(data.days.begin(), data.days.end(), [&](const DaySlice& d) { return d.date == r.date; });
        if (loss == losses.end() || day == data.days.end()) {
            r.warning += (r.warning.empty() ? "" : "; ") + std::string("no loss samples to classify");
            continue;
        }
        const auto features = extract_features(r, *loss, *day, data.weather, data.layout.panel(r.panel_id).capacity_w, a.seed);
        const auto verdict = classify(forest, features);
        r.class_label = verdict.label;
        r.confidence = verdict.confidence * (r.low_confidence ? 0.5 : 1.0);
        ++classified;
    }
    write_reports_csv(reports_path, reports);
    manifest.output(reports_path);
    manifest.seed(a.seed);
    manifest.write(directory_of(reports_path));
    std::cout << fmt::format("classified {} flagged panel-days\n", classified);
}

struct EvaluateArgs {
    std::string study = "all";
    std::size_t seeds = 20;
    std::uint64_t seed = 0;
    std::string out = "study";
};

void run_evaluate(const EvaluateArgs& a, Manifest& manifest) {
    if (a.seeds < 1) throw Error(ErrorCode::InvalidArgument, "--seeds must be positive");
    std::vector<Study> studies = a.study == "all" ? all_studies() : std::vector<Study>{parse_study(a.study)};
    const fs::path out(a.out);
    StudyConfig config;
    config.seeds = a.seeds;
    config.base_seed = a.seed;
    for (const auto s : studies) {
        const auto report = run_study(s, config);
        const fs::path dir = studies.size() == 1 ? out : out / std::string(to_string(s));
        write_study(report, dir);
        for (const char* name : {"study.csv", "study.json", "study_long.csv"}) manifest.output(dir / name);
        std::cout << study_csv(report);
    }
    manifest.seed(a.seed);
    manifest.write(out);
}

struct ReportArgs {
    std::string reports = "reports.csv";
    std::string out;
};

void run_report(const ReportArgs& a, Manifest& manifest) {
    const auto reports = parse_reports_csv(a.reports);
    manifest.input(a.reports);
    const std::string text = render_report(reports);
    std::cout << text;
    fs::path dir = directory_of(a.reports);
    if (!a.out.empty()) {
        write_text(a.out, text);
        manifest.output(a.out);
        dir = directory_of(a.out);
    }
    manifest.write(dir);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Per-panel fault detection for residential solar arrays", "panelwatch"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    SimulateArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Generate a labeled synthetic dataset");
    simulate_cmd->add_option("--layout", sim.layout, "Layout CSV (overrides --preset)");
    simulate_cmd->add_option("--preset", sim.preset, "single-plane[:N], four-plane or abcd")->capture_default_str();
    simulate_cmd->add_option("--start", sim.start, "First local date")->capture_default_str();
    simulate_cmd->add_option("--days", sim.days, "Number of days")->capture_default_str();
    simulate_cmd->add_option("--weather", sim.weather, "Sunny, Overcast, Scattered or mixed")->capture_default_str();
    simulate_cmd->add_option("--fault", sim.faults, "panel/date/kind[/severity[/HH:MM-HH:MM]], repeatable");
    simulate_cmd->add_option("--faults", sim.faults_file, "Fault list in truth CSV format");
    simulate_cmd->add_flag("--site-shade", sim.site_shade, "Add recurring shade on P01, P02, P07, P12");
    simulate_cmd->add_option("--noise", sim.noise, "Multiplicative noise sigma")->capture_default_str();
    simulate_cmd->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    simulate_cmd->add_option("--out", sim.out, "Output directory")->capture_default_str();

    IngestArgs ing;
    auto* ingest_cmd = app.add_subcommand("ingest", "Validate, align and label raw power data");
    ingest_cmd->add_option("--power", ing.power, "Power CSV")->required();
    ingest_cmd->add_option("--layout", ing.layout, "Layout CSV")->required();
    ingest_cmd->add_option("--weather", ing.weather, "Weather CSV");
    ingest_cmd->add_option("--out", ing.out, "Output directory")->capture_default_str();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Fit candidate models and forecasters");
    train_cmd->add_option("--power", tr.power, "Power CSV")->required();
    train_cmd->add_option("--weather", tr.weather, "Weather CSV")->required();
    train_cmd->add_option("--layout", tr.layout, "Layout CSV")->required();
    train_cmd->add_option("--train-days", tr.train_days, "Use the first N days")->capture_default_str();
    train_cmd->add_option("--train-from", tr.train_from, "First training date");
    train_cmd->add_option("--train-to", tr.train_to, "Last training date");
    train_cmd->add_option("--inputs", tr.inputs, "Inputs per model (n)")->capture_default_str();
    train_cmd->add_option("--strategy", tr.strategy, "SamePlaneFirst, AllSubsets or RandomSubsets")->capture_default_str();
    train_cmd->add_option("--random-count", tr.random_count, "Subsets for RandomSubsets")->capture_default_str();
    train_cmd->add_option("--trees", tr.trees, "Trees per ensemble (B)")->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--depth", tr.depth, "Maximum tree depth")->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--min-leaf", tr.min_leaf, "Minimum leaf size")->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
    train_cmd->add_option("--out", tr.out, "Model document")->capture_default_str();
    train_cmd->add_option("--forest-out", tr.forest_out, "Also fit a fault classifier and write it here");
    train_cmd->add_option("--labels", tr.labels, "Truth CSV for classifier training (default: simulated faults)");
    train_cmd->add_option("--forest-seeds", tr.forest_seeds, "Simulated arrays for classifier training")->capture_default_str();
    train_cmd->add_option("--forest-trees", tr.forest_trees, "Trees in the classifier (T)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    DetectArgs det;
    auto* detect_cmd = app.add_subcommand("detect", "Flag faulty panel-days");
    detect_cmd->add_option("--power", det.power, "Power CSV")->required();
    detect_cmd->add_option("--weather", det.weather, "Weather CSV")->required();
    detect_cmd->add_option("--layout", det.layout, "Layout CSV")->required();
    detect_cmd->add_option("--models", det.models, "Model document from train")->required();
    detect_cmd->add_option("--from", det.from, "First date to examine");
    detect_cmd->add_option("--to", det.to, "Last date to examine");
    detect_cmd->add_option("--out", det.out, "Output directory")->capture_default_str();
    add_threshold_options(detect_cmd, det.deficit, det.persistence, det.loss_ratio, det.noisy, det.floor);

    ClassifyArgs cls;
    auto* classify_cmd = app.add_subcommand("classify", "Label flagged panel-days with a probable cause");
    classify_cmd->add_option("--reports", cls.reports, "reports.csv from detect, updated in place")->capture_default_str();
    classify_cmd->add_option("--losses", cls.losses, "losses.csv from detect (default: next to reports)");
    classify_cmd->add_option("--power", cls.power, "Power CSV")->required();
    classify_cmd->add_option("--weather", cls.weather, "Weather CSV")->required();
    classify_cmd->add_option("--layout", cls.layout, "Layout CSV")->required();
    classify_cmd->add_option("--forest", cls.forest, "Classifier document from train")->required();
    classify_cmd->add_option("--seed", cls.seed, "Sampling seed")->capture_default_str();

    EvaluateArgs ev;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Run a parameter study on simulated data");
    evaluate_cmd->add_option("--study", ev.study, "Study name or all")->capture_default_str();
    evaluate_cmd->add_option("--seeds", ev.seeds, "Number of seeds")->capture_default_str();
    evaluate_cmd->add_option("--seed", ev.seed, "First seed")->capture_default_str();
    evaluate_cmd->add_option("--out", ev.out, "Output directory")->capture_default_str();

    ReportArgs rep;
    auto* report_cmd = app.add_subcommand("report", "Print a per-date fault roster");
    report_cmd->add_option("--reports", rep.reports, "reports.csv")->capture_default_str();
    report_cmd->add_option("--out", rep.out, "Also write the roster to this file");

    app.add_subcommand("version", "Print the version");

    for (auto* cmd : app.get_subcommands({})) {
        if (cmd->get_name() != "version") cmd->add_option("--config", "Flat key=value file of option defaults");
    }

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config(args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << e.what() << "\n\n";
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << sub->help();
        return kExitUsage;
    }

    CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    if (name == "version") {
        std::cout << "panelwatch " << kVersion << "\n";
        return 0;
    }
    Manifest manifest(name);
    manifest.config(*cmd);
    try {
        if (name == "simulate") run_simulate(sim, manifest);
        else if (name == "ingest") run_ingest(ing, manifest);
        else if (name == "train") run_train(tr, manifest);
        else if (name == "detect") run_detect(det, manifest);
        else if (name == "classify") run_classify(cls, manifest);
        else if (name == "evaluate") run_evaluate(ev, manifest);
        else if (name == "report") run_report(rep, manifest);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
