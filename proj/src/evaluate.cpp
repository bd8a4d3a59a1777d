#include "panelwatch/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "panelwatch/error.hpp"
#include "panelwatch/forecaster.hpp"

namespace panelwatch {

double mape(std::span<const double> observed, std::span<const double> inferred) {
    if (observed.size() != inferred.size()) {
        throw Error(ErrorCode::LengthMismatch,
                    fmt::format("observed has {} values, inferred {}", observed.size(), inferred.size()));
    }
    double abs_error = 0.0;
    double total = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (is_missing(observed[i]) || is_missing(inferred[i])) continue;
        abs_error += std::abs(observed[i] - inferred[i]);
        total += observed[i];
        ++m;
    }
    if (m == 0) throw Error(ErrorCode::EmptyInput, "no non-missing pairs");
    const double mean_observed = total / static_cast<double>(m);
    if (mean_observed == 0.0) throw Error(ErrorCode::ZeroMeanObserved, "mean of observed values is zero");
    return (abs_error / static_cast<double>(m)) / mean_observed;
}

// ---------------------------------------------------------------------------

std::size_t ConfusionMatrix::total() const {
    std::size_t n = 0;
    for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return n;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
    return std::accumulate(counts.at(truth).begin(), counts.at(truth).end(), std::size_t{0});
}

std::size_t ConfusionMatrix::col_sum(std::size_t predicted) const {
    std::size_t n = 0;
    for (const auto& row : counts) n += row.at(predicted);
    return n;
}

std::size_t ConfusionMatrix::index_of(std::string_view label) const {
    const auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) throw Error(ErrorCode::UnknownClass, std::string(label));
    return static_cast<std::size_t>(it - classes.begin());
}

std::size_t ConfusionMatrix::at(std::string_view truth, std::string_view predicted) const {
    return counts[index_of(truth)][index_of(predicted)];
}

ConfusionMatrix confusion(std::span<const std::string> predicted, std::span<const std::string> truth,
                          std::vector<std::string> classes) {
    if (predicted.size() != truth.size()) throw Error(ErrorCode::LengthMismatch, "predicted and truth differ in length");
    ConfusionMatrix cm;
    cm.classes = std::move(classes);
    cm.counts.assign(cm.classes.size(), std::vector<std::size_t>(cm.classes.size(), 0));
    for (std::size_t i = 0; i < truth.size(); ++i) ++cm.counts[cm.index_of(truth[i])][cm.index_of(predicted[i])];
    return cm;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport binary_metrics(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) {
    MetricsReport r;
    r.tp = tp;
    r.tn = tn;
    r.fp = fp;
    r.fn = fn;
    r.accuracy = ratio(tp + tn, tp + tn + fp + fn);
    r.sensitivity = ratio(tp, tp + fn);
    r.specificity = ratio(tn, tn + fp);
    return r;
}

MetricsReport binary_metrics(const ConfusionMatrix& cm, std::string_view positive) {
    const std::size_t p = cm.index_of(positive);
    const std::size_t tp = cm.counts[p][p];
    const std::size_t fn = cm.row_sum(p) - tp;
    const std::size_t fp = cm.col_sum(p) - tp;
    return binary_metrics(tp, cm.total() - tp - fn - fp, fp, fn);
}

std::vector<std::pair<std::string, MetricsReport>> per_class_metrics(const ConfusionMatrix& cm) {
    std::vector<std::pair<std::string, MetricsReport>> out;
    for (const auto& c : cm.classes) out.emplace_back(c, binary_metrics(cm, c));
    return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Study s) {
    switch (s) {
        case Study::ModelComparison: return "ModelComparison";
        case Study::TrainingSize: return "TrainingSize";
        case Study::PanelCount: return "PanelCount";
        case Study::RoofGeometry: return "RoofGeometry";
        case Study::Weather: return "Weather";
        case Study::SingleFault: return "SingleFault";
        case Study::ConcurrentFault: return "ConcurrentFault";
        case Study::SystemWide: return "SystemWide";
        case Study::Abcd: return "Abcd";
    }
    return "ModelComparison";
}

std::vector<Study> all_studies() {
    return {Study::ModelComparison, Study::TrainingSize, Study::PanelCount, Study::RoofGeometry, Study::Weather,
            Study::SingleFault,     Study::ConcurrentFault, Study::SystemWide, Study::Abcd};
}

Study parse_study(std::string_view text) {
    for (auto s : all_studies()) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown study '{}'", text));
}

const StudySummary& StudyReport::get(std::string_view condition, std::string_view metric) const {
    for (const auto& s : summary) {
        if (s.condition == condition && s.metric == metric) return s;
    }
    throw Error(ErrorCode::InvalidArgument, fmt::format("no summary row {}/{}", condition, metric));
}

double StudyReport::pooled(std::string_view condition, std::string_view metric) const {
    const auto& s = get(condition, metric);
    if (!s.pooled) throw Error(ErrorCode::InvalidArgument, fmt::format("{}/{} has no pooled value", condition, metric));
    return *s.pooled;
}

std::vector<ShadeSpec> site_shade() {
    using std::chrono::minutes;
    return {
        {"P01", minutes{7 * 60}, minutes{9 * 60 + 30}, 0.5},
        {"P02", minutes{7 * 60}, minutes{9 * 60}, 0.4},
        {"P07", minutes{11 * 60}, minutes{12 * 60}, 0.3},
        {"P12", minutes{15 * 60}, minutes{17 * 60}, 0.4},
    };
}

namespace {

enum class Tag : std::uint32_t { Scenario = 1, Weather = 2 };

std::mt19937_64 rng_for(std::uint64_t seed, Tag tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

Date first_of(unsigned month) { return Date{std::chrono::year{2019}, std::chrono::month{month}, std::chrono::day{1}}; }

bool is_winter(unsigned month) { return month == 12 || month <= 3; }

template <class T>
const T& pick_one(std::mt19937_64& rng, const std::vector<T>& items) {
    std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
    return items[d(rng)];
}

std::optional<FaultLabel> label_of(FaultKind kind) {
    switch (kind) {
        case FaultKind::Snow: return FaultLabel::Snow;
        case FaultKind::Occlusion: return FaultLabel::Occlusion;
        case FaultKind::OpenCircuit: return FaultLabel::OpenCircuit;
        case FaultKind::WaterDrops: return std::nullopt;
    }
    return std::nullopt;
}

// Collects per-seed observations and pooled counts.
class Recorder {
public:
    void add(std::string condition, std::string metric, std::uint64_t seed, double value) {
        key(condition, metric);
        observations_.push_back(StudyObservation{std::move(condition), std::move(metric), seed, value});
    }
    /// A rate with its counts; undefined per-seed rates are left out of the spread.
    void rate(const std::string& condition, const std::string& metric, std::uint64_t seed, std::size_t num,
              std::size_t den) {
        key(condition, metric);
        auto& [n, d] = counts_[{condition, metric}];
        n += num;
        d += den;
        if (den > 0) add(condition, metric, seed, static_cast<double>(num) / static_cast<double>(den));
    }

    void finish(StudyReport& report) const {
        report.observations = observations_;
        for (const auto& [condition, metric] : order_) {
            StudySummary s;
            s.condition = condition;
            s.metric = metric;
            std::vector<double> values;
            for (const auto& o : observations_) {
                if (o.condition == condition && o.metric == metric) values.push_back(o.value);
            }
            s.seeds = values.size();
            if (!values.empty()) {
                std::sort(values.begin(), values.end());
                s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
                s.q1 = quantile(values, 0.25);
                s.median = quantile(values, 0.5);
                s.q3 = quantile(values, 0.75);
            } else {
                s.mean = s.q1 = s.median = s.q3 = kMissing;
            }
            if (auto c = counts_.find({condition, metric}); c != counts_.end() && c->second.second > 0) {
                s.pooled = static_cast<double>(c->second.first) / static_cast<double>(c->second.second);
            }
            report.summary.push_back(std::move(s));
        }
    }

private:
    static double quantile(const std::vector<double>& sorted, double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    }

    void key(const std::string& condition, const std::string& metric) {
        if (seen_.insert({condition, metric}).second) order_.emplace_back(condition, metric);
    }

    std::vector<StudyObservation> observations_;
    std::vector<std::pair<std::string, std::string>> order_;
    std::set<std::pair<std::string, std::string>> seen_;
    std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> counts_;
};

// ---------------------------------------------------------------------------
// Prediction studies

struct Simulated {
    SimOutput sim;
    std::vector<DaySlice> days;
};

Simulated simulate_days(const ArrayLayout& layout, unsigned month, int count, std::vector<WeatherProfile> profiles,
                        std::uint64_t seed, std::vector<ShadeSpec> shades, const std::vector<FaultSpec>& faults = {}) {
    SimOptions options;
    options.shades = std::move(shades);
    options.daily_profiles = std::move(profiles);
    auto dates = consecutive_dates(first_of(month), count);
    Simulated out{simulate(layout, dates, WeatherProfile::Sunny, faults, seed, options), {}};
    out.days = segment_days(out.sim.matrix, daylight_rule_for(out.sim.layout));
    if (out.days.size() != dates.size()) throw Error(ErrorCode::InsufficientData, "a simulated day has no daylight");
    return out;
}

using InputChooser = std::function<std::vector<std::string>(const std::string& target)>;

double mean_panel_mape(const ArrayLayout& layout, std::span<const DaySlice> train, std::span<const DaySlice> test,
                       ModelKind kind, const InputChooser& inputs, FitConfig fit) {
    double total = 0.0;
    for (const auto& panel : layout.panels) {
        fit.target_capacity_w = panel.capacity_w;
        const auto model = ::panelwatch::fit(kind, panel.id, inputs(panel.id), train, fit);
        std::vector<double> observed;
        std::vector<double> predicted;
        for (const auto& day : test) {
            const auto o = day.matrix.column(day.matrix.require_index(panel.id));
            const auto p = predict(model, day);
            observed.insert(observed.end(), o.begin(), o.end());
            predicted.insert(predicted.end(), p.begin(), p.end());
        }
        total += mape(observed, predicted);
    }
    return total / static_cast<double>(layout.panels.size());
}

std::vector<ShadeSpec> shade_for(const StudyConfig& c) { return c.site_shade ? site_shade() : std::vector<ShadeSpec>{}; }

InputChooser nearest(const ArrayLayout& layout, std::size_t n) {
    return [&layout, n](const std::string& target) { return select_inputs(layout, target, n); };
}

void model_comparison(const StudyConfig& c, std::uint64_t seed, Recorder& rec) {
    const auto layout = layouts::single_plane(c.panels);
    const auto data = simulate_days(layout, c.month, c.train_days + c.test_days, {}, seed, shade_for(c));
    std::span<const DaySlice> days(data.days);
    FitConfig fit = c.fit;
    fit.seed = seed;
    for (auto kind : {ModelKind::NaiveMean, ModelKind::Linear, ModelKind::Ensemble}) {
        rec.add(std::string(to_string(kind)), "mape", seed,
                mean_panel_mape(layout, days.first(c.train_days), days.subspan(c.train_days), kind,
                                nearest(layout, c.inputs), fit));
    }
}

void training_size(const StudyConfig& c, std::uint64_t seed, Recorder& rec) {
    const auto layout = layouts::single_plane(c.panels);
    const int longest = *std::max_element(c.training_sizes.begin(), c.training_sizes.end());
    const auto data = simulate_days(layout, c.month, longest + c.test_days, {}, seed, shade_for(c));
    std::span<const DaySlice> days(data.days);
    FitConfig fit = c.fit;
    fit.seed = seed;
    for (int k : c.training_sizes) {
        // the k days right before the shared test window
        const auto train = days.subspan(static_cast<std::size_t>(longest - k), static_cast<std::size_t>(k));
        rec.add(fmt::format("days={}", k), "mape", seed,
                mean_panel_mape(layout, train, days.subspan(static_cast<std::size_t>(longest)), ModelKind::Ensemble,
                                nearest(layout, c.inputs), fit));
    }
}

void panel_count(const StudyConfig& c, std::uint64_t seed, Recorder& rec) {
    const auto layout = layouts::single_plane(c.panels);
    const auto data = simulate_days(layout, c.month, c.train_days + c.test_days, {}, seed, shade_for(c));
    std::span<const DaySlice> days(data.days);
    FitConfig fit = c.fit;
    fit.seed = seed;
    for (std::size_t n : c.input_counts) {
        rec.add(fmt::format("n={}", n), "mape", seed,
                mean_panel_mape(layout, days.first(c.train_days), days.subspan(c.train_days), ModelKind::Ensemble,
                                nearest(layout, n), fit));
    }
}

void roof_geometry(const StudyConfig& c, std::uint64_t seed, Recorder& rec) {
    const auto layout = layouts::four_plane_home();
    auto rng = rng_for(seed, Tag::Weather);
    const int count = c.train_days + c.test_days;
    const auto data = simulate_days(layout, c.month, count, draw_profiles(rng, static_cast<std::size_t>(count)), seed, {});
    std::span<const DaySlice> days(data.days);
    FitConfig fit = c.fit;
    fit.seed = seed;
    auto same_plane = [&layout](const std::string& target) {
        std::vector<std::string> out;
        const auto& plane = layout.panel(target).roof_plane;
        for (const auto& id : neighbor_order(layout, target)) {
            if (layout.panel(id).roof_plane == plane) out.push_back(id);
        }
        return out;
    };
    // round-robin over the other planes, nearest panel first
    auto mixed_plane = [&](const std::string& target) {
        const std::size_t n = same_plane(target).size();
        const auto& plane = layout.panel(target).roof_plane;
        std::vector<std::string> planes;
        std::map<std::string, std::vector<std::string>> by_plane;
        for (const auto& id : neighbor_order(layout, target)) {
            const auto& p = layout.panel(id).roof_plane;
            if (p == plane) continue;
            if (by_plane[p].empty()) planes.push_back(p);
            by_plane[p].push_back(id);
        }
        std::vector<std::string> out;
        for (std::size_t round = 0; out.size() < n; ++round) {
            for (const auto& p : planes) {
                if (round < by_plane[p].size() && out.size() < n) out.push_back(by_plane[p][round]);
            }
        }
        return out;
    };
    const auto train = days.first(c.train_days);
    const auto test = days.subspan(c.train_days);
    rec.add("same-plane", "mape", seed, mean_panel_mape(layout, train, test, ModelKind::Ensemble, same_plane, fit));
    rec.add("mixed-plane", "mape", seed, mean_panel_mape(layout, train, test, ModelKind::Ensemble, mixed_plane, fit));
}

void weather_study(const StudyConfig& c, std::uint64_t seed, Recorder& rec) {
    const auto layout = layouts::single_plane(c.panels);
    const int count = c.train_days + c.test_days;
    std::vector<WeatherProfile> profiles;
    for (int i = 0; i < count; ++i) profiles.push_back(i % 2 == 0 ? WeatherProfile::Sunny : WeatherProfile::Overcast);
    const auto data = simulate_days(layout, c.month, count, profiles, seed, shade_for(c));
    std::span<const DaySlice> days(data.days);
    FitConfig fit = c.fit;
    fit.seed = seed;
    for (auto profile : {WeatherProfile::Sunny, WeatherProfile::Overcast}) {
        std::vector<DaySlice> test;
        for (int i = c.train_days; i < count; ++i) {
            if (profiles[static_cast<std::size_t>(i)] == profile) test.push_back(data.days[static_cast<std::size_t>(i)]);
        }
        rec.add(std::string(to_string(profile)), "mape", seed,
                mean_panel_mape(layout, days.first(c.train_days), test, ModelKind::Ensemble, nearest(layout, c.inputs),
                                fit));
    }
}

// ---------------------------------------------------------------------------
// Detection studies

struct DetectionCase {
    ArrayLayout layout;
    unsigned month = 1;
    std::vector<WeatherProfile> profiles;  // history days first
    std::vector<FaultSpec> faults;
    int history_days = 8;
};

struct DetectionOutcome {
    Simulated data;
    std::map<std::string, CandidateSet> candidates;
    std::vector<DateResult> results;  // one per day after the history window
};

struct Trained {
    std::shared_ptr<const std::vector<DaySlice>> history;
    std::map<std::string, CandidateSet> candidates;
    std::map<std::string, ForecastModel> forecasters;
};

Trained train_array(const ArrayLayout& layout, const Simulated& data, int history_days, std::uint64_t seed,
                    const CandidateOptions& base, std::size_t n) {
    Trained t;
    t.history = std::make_shared<const std::vector<DaySlice>>(data.days.begin(), data.days.begin() + history_days);
    CandidateOptions options = base;
    options.seed = seed;
    options.fit.seed = seed;
    for (const auto& p : layout.panels) {
        t.candidates.emplace(p.id, build_candidates(layout, p.id, n, options, t.history));
        t.forecasters.emplace(p.id, fit_forecaster(p.id, *t.history, data.sim.weather, p.capacity_w));
    }
    return t;
}

DetectionOutcome run_detection(const DetectionCase& dc, std::uint64_t seed, const StudyConfig& c) {
    const int count = static_cast<int>(dc.profiles.size());
    DetectionOutcome out{simulate_days(dc.layout, dc.month, count, dc.profiles, seed, {}, dc.faults), {}, {}};
    const std::size_t n = std::min<std::size_t>(c.inputs, dc.layout.panels.size() - 1);
    auto trained = train_array(dc.layout, out.data, dc.history_days, seed, c.candidates, n);
    out.candidates = trained.candidates;
    ArrayDetector detector(dc.layout, std::move(trained.candidates), std::move(trained.forecasters), c.detector);
    out.results = detector.run(std::span<const DaySlice>(out.data.days).subspan(static_cast<std::size_t>(dc.history_days)),
                               out.data.sim.weather);
    return out;
}

FaultSpec random_fault(std::mt19937_64& rng, const StudyConfig& c, const std::string& panel, Date date, FaultKind kind) {
    FaultSpec f{panel, date, kind, 1.0, std::nullopt, std::nullopt};
    if (kind == FaultKind::Occlusion) f.severity = pick_one(rng, c.occlusion_severities);
    return f;
}

std::vector<std::string> shuffled_ids(std::mt19937_64& rng, const ArrayLayout& layout) {
    auto ids = layout.panel_ids();
    std::shuffle(ids.begin(), ids.end(), rng);
    return ids;
}

/// Fault days alternate with fault-free days, starting with a fault day.
std::vector<bool> interleave(int fault_days, int clean_days) {
    std::vector<bool> out;
    for (int f = 0, k = 0; f < fault_days || k < clean_days;) {
        const bool take_fault = f < fault_days && (k >= clean_days || out.size() % 2 == 0);
        out.push_back(take_fault);
        (take_fault ? f : k) += 1;
    }
    return out;
}

/// Single-fault days alternate with fault-free days after the history window.
/// Returns the case and, per test day, whether it carries a fault.
std::pair<DetectionCase, std::vector<bool>> single_fault_case(const StudyConfig& c, std::uint64_t seed,
                                                              int fault_days, int clean_days) {
    auto rng = rng_for(seed, Tag::Scenario);
    DetectionCase dc;
    dc.layout = layouts::single_plane(c.panels);
    dc.month = c.fault_months[seed % c.fault_months.size()];
    dc.history_days = c.history_days;
    const auto faulty = interleave(fault_days, clean_days);
    const std::size_t count = static_cast<std::size_t>(c.history_days) + faulty.size();
    dc.profiles = draw_profiles(rng, count);
    const auto dates = consecutive_dates(first_of(dc.month), static_cast<int>(count));
    std::vector<FaultKind> kinds{FaultKind::Occlusion, FaultKind::OpenCircuit};
    if (is_winter(dc.month)) kinds.insert(kinds.begin(), FaultKind::Snow);
    for (std::size_t i = 0; i < faulty.size(); ++i) {
        if (!faulty[i]) continue;
        const Date date = dates[static_cast<std::size_t>(c.history_days) + i];
        dc.faults.push_back(random_fault(rng, c, shuffled_ids(rng, dc.layout).front(), date, pick_one(rng, kinds)));
    }
    return {std::move(dc), std::move(faulty)};
}

const TruthLabel* truth_for(const SimOutput& sim, const FaultReport& r) {
    for (const auto& t : sim.truth) {
        if (t.panel_id == r.panel_id && t.date == r.date) return &t;
    }
    return nullptr;
}

const DaySlice& day_of(const Simulated& data, Date date) {
    for (const auto& d : data.days) {
        if (d.date == date) return d;
    }
    throw Error(ErrorCode::InvalidArgument, fmt::format("no day {}", format_date(date)));
}

FeatureVector features_for(const DetectionOutcome& out, const DateResult& result, std::size_t i, std::uint64_t seed) {
    const auto& report = result.reports[i];
    return extract_features(report, result.losses[i], day_of(out.data, report.date), out.data.sim.weather,
                            out.data.sim.layout.panel(report.panel_id).capacity_w, seed);
}

void single_fault(const StudyConfig& c, std::uint64_t seed, const ForestClassifier& forest, Recorder& rec,
                  std::vector<std::string>& predicted, std::vector<std::string>& truth) {
    const auto [dc, faulty] = single_fault_case(c, seed, c.fault_days, c.clean_days);
    const auto out = run_detection(dc, seed, c);
    std::size_t tp = 0, fn = 0, correct = 0, classified = 0;
    std::size_t clean_days = 0, clean_days_flagged = 0, clean_panels = 0, clean_panels_flagged = 0;
    std::size_t other_panels = 0, other_panels_flagged = 0;
    std::map<std::string, std::pair<std::size_t, std::size_t>> by_case;  // correct, classified
    for (std::size_t d = 0; d < out.results.size(); ++d) {
        const auto& result = out.results[d];
        if (!faulty[d]) {
            ++clean_days;
            bool any = false;
            for (const auto& r : result.reports) {
                ++clean_panels;
                clean_panels_flagged += r.flagged;
                any = any || r.flagged;
            }
            clean_days_flagged += any;
            continue;
        }
        for (std::size_t i = 0; i < result.reports.size(); ++i) {
            const auto& r = result.reports[i];
            const TruthLabel* t = truth_for(out.data.sim, r);
            if (!t) {
                ++other_panels;
                other_panels_flagged += r.flagged;
                continue;
            }
            if (!r.flagged) {
                ++fn;
                continue;
            }
            ++tp;
            if (r.system_wide) continue;
            const auto verdict = classify(forest, features_for(out, result, i, seed));
            ++classified;
            const bool right = verdict.label == *label_of(t->kind);
            correct += right;
            auto& [n, d] = by_case[t->kind == FaultKind::Occlusion ? fmt::format("Occlusion@{}", t->severity)
                                                                  : std::string(to_string(t->kind))];
            n += right;
            ++d;
            predicted.emplace_back(to_string(verdict.label));
            truth.emplace_back(to_string(*label_of(t->kind)));
        }
    }
    rec.rate("faulty", "recall", seed, tp, tp + fn);
    rec.rate("faulty", "classification_accuracy", seed, correct, classified);
    rec.rate("faulty", "other_panel_false_flag_rate", seed, other_panels_flagged, other_panels);
    rec.rate("fault-free", "false_flag_day_rate", seed, clean_days_flagged, clean_days);
    for (const auto& [name, counts] : by_case) rec.rate(name, "classification_accuracy", seed, counts.first, counts.second);
    rec.rate("fault-free", "false_flag_panel_rate", seed, clean_panels_flagged, clean_panels);
}

void concurrent_fault(const StudyConfig& c, std::uint64_t seed, Recorder& rec) {
    auto rng = rng_for(seed, Tag::Scenario);
    DetectionCase dc;
    dc.layout = layouts::single_plane(c.panels);
    dc.month = c.fault_months[seed % c.fault_months.size()];
    dc.history_days = c.history_days;
    const auto plan = interleave(c.concurrent_fault_days, c.concurrent_clean_days);
    dc.profiles = draw_profiles(rng, static_cast<std::size_t>(c.history_days) + plan.size());
    const auto dates = consecutive_dates(first_of(dc.month), static_cast<int>(dc.profiles.size()));
    const FaultKind first = is_winter(dc.month) ? FaultKind::Snow : FaultKind::Occlusion;
    const std::vector<FaultKind> kinds{first, FaultKind::Occlusion, FaultKind::OpenCircuit};
    for (std::size_t d = 0; d < plan.size(); ++d) {
        if (!plan[d]) continue;
        const auto ids = shuffled_ids(rng, dc.layout);
        const Date date = dates[static_cast<std::size_t>(c.history_days) + d];
        for (std::size_t k = 0; k < c.concurrent; ++k) {
            dc.faults.push_back(random_fault(rng, c, ids[k], date, kinds[k % kinds.size()]));
        }
    }
    const auto out = run_detection(dc, seed, c);

    std::size_t joint = 0, fault_dates = 0, tp = 0, fn = 0, fp = 0, tn = 0;
    std::size_t selections = 0, clean_available = 0, violations = 0;
    for (const auto& result : out.results) {
        std::set<std::string> flagged;
        std::set<std::string> truth;
        for (const auto& r : result.reports) {
            const bool t = truth_for(out.data.sim, r) != nullptr;
            if (t) truth.insert(r.panel_id);
            if (r.flagged) flagged.insert(r.panel_id);
            if (t) (r.flagged ? tp : fn) += 1;
            else (r.flagged ? fp : tn) += 1;
        }
        if (!truth.empty()) {
            ++fault_dates;
            joint += flagged == truth;
        }
        // recheck every selection against the full candidate list
        std::set<std::string> noisy;
        for (const auto& l : result.labels) {
            if (l.label == InputQuality::Noisy) noisy.insert(l.panel_id);
        }
        auto touches_noisy = [&](const std::vector<std::string>& inputs) {
            return std::any_of(inputs.begin(), inputs.end(), [&](const std::string& id) { return noisy.count(id) > 0; });
        };
        for (const auto& a : result.audits) {
            ++selections;
            const auto& subsets = out.candidates.at(a.target).subsets();
            const bool exists = std::any_of(subsets.begin(), subsets.end(),
                                            [&](const auto& s) { return !touches_noisy(s); });
            clean_available += exists;
            if ((exists && touches_noisy(a.chosen_inputs)) || exists != a.clean_candidate_exists) ++violations;
        }
    }
    rec.rate("k=" + std::to_string(c.concurrent), "joint_accuracy", seed, joint, fault_dates);
    rec.rate("k=" + std::to_string(c.concurrent), "panel_recall", seed, tp, tp + fn);
    rec.rate("k=" + std::to_string(c.concurrent), "false_flag_panel_rate", seed, fp, fp + tn);
    rec.rate("k=" + std::to_string(c.concurrent), "clean_candidate_rate", seed, clean_available, selections);
    rec.add("k=" + std::to_string(c.concurrent), "selection_violations", seed, static_cast<double>(violations));
}

void system_wide(const StudyConfig& c, std::uint64_t seed, Recorder& rec) {
    auto rng = rng_for(seed, Tag::Scenario);
    DetectionCase dc;
    dc.layout = layouts::single_plane(c.panels);
    dc.month = 1;
    dc.history_days = c.history_days;
    // electrical days first so none follows a snow day
    std::vector<char> plan(static_cast<std::size_t>(c.electrical_days), 'E');
    for (int i = 0; i < c.snow_days; ++i) {
        plan.push_back('N');
        plan.push_back('S');
    }
    const std::size_t count = static_cast<std::size_t>(c.history_days) + plan.size();
    dc.profiles = draw_profiles(rng, count);
    const auto dates = consecutive_dates(first_of(dc.month), static_cast<int>(count));
    for (std::size_t i = 0; i < plan.size(); ++i) {
        if (plan[i] == 'N') continue;
        const Date date = dates[static_cast<std::size_t>(c.history_days) + i];
        const FaultKind kind = plan[i] == 'S' ? FaultKind::Snow : FaultKind::OpenCircuit;
        for (const auto& id : dc.layout.panel_ids()) dc.faults.push_back(FaultSpec{id, date, kind, 1.0, {}, {}});
    }
    const auto out = run_detection(dc, seed, c);
    std::map<char, std::array<std::size_t, 3>> tally;  // days, system-wide days, correct labels
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& result = out.results[i];
        auto& t = tally[plan[i]];
        ++t[0];
        if (!result.system_wide) continue;
        ++t[1];
        const auto label = classify_systemwide(result.reports, out.data.sim.weather, dc.layout.utc_offset);
        t[2] += label == (plan[i] == 'S' ? FaultLabel::FullSnow : FaultLabel::SystemElectrical);
    }
    const std::map<char, std::string> names{{'S', "snow"}, {'N', "normal"}, {'E', "electrical"}};
    for (char k : {'S', 'N', 'E'}) {
        const auto& t = tally[k];
        if (t[0] == 0) continue;
        rec.rate(names.at(k), "systemwide_rate", seed, t[1], t[0]);
        if (k != 'N') rec.rate(names.at(k), "label_accuracy", seed, t[2], t[1]);
    }
}

void abcd(const StudyConfig& c, std::uint64_t seed, Recorder& rec) {
    auto rng = rng_for(seed, Tag::Scenario);
    DetectionCase dc;
    dc.layout = layouts::abcd();
    dc.month = c.month;
    dc.history_days = 5;
    dc.profiles = draw_profiles(rng, static_cast<std::size_t>(dc.history_days + 1));
    const Date date = consecutive_dates(first_of(dc.month), dc.history_days + 1).back();
    const std::vector<FaultKind> kinds = is_winter(dc.month)
                                             ? std::vector{FaultKind::Snow, FaultKind::Occlusion, FaultKind::OpenCircuit}
                                             : std::vector{FaultKind::Occlusion, FaultKind::OpenCircuit};
    // the labeler only promises to catch faults of severity 0.5 and above
    StudyConfig strong = c;
    std::erase_if(strong.occlusion_severities, [](double s) { return s < 0.5; });
    if (strong.occlusion_severities.empty()) strong.occlusion_severities = {1.0};
    for (const char* id : {"A", "B"}) dc.faults.push_back(random_fault(rng, strong, id, date, pick_one(rng, kinds)));

    const auto data = simulate_days(dc.layout, dc.month, dc.history_days + 1, dc.profiles, seed, {}, dc.faults);
    CandidateOptions options = c.candidates;
    options.strategy = CandidateStrategy::AllSubsets;
    auto trained = train_array(dc.layout, data, dc.history_days, seed, options, 2);
    const auto& day = data.days.back();
    std::map<std::string, std::vector<double>> forecasts;
    std::map<std::string, double> capacities;
    for (const auto& p : dc.layout.panels) {
        forecasts[p.id] = forecast(trained.forecasters.at(p.id), day.date, dc.layout.utc_offset, data.sim.weather);
        capacities[p.id] = p.capacity_w;
    }
    const auto labels = label_inputs(day, forecasts, capacities, c.detector.labels);
    const auto& set = trained.candidates.at("A");
    const std::vector<std::vector<std::string>> expected{{"B", "C"}, {"B", "D"}, {"C", "D"}};
    rec.rate("AB-faulty", "candidate_list_match", seed, set.subsets() == expected, 1);
    bool selected_cd = false;
    bool detected = false;
    try {
        const auto sel = select_model(set, labels);
        selected_cd = set.subsets()[sel.index] == std::vector<std::string>{"C", "D"};
        detected = detect_day("A", day, SeasonalProfile::zero(), set.model(sel.index), c.detector.thresholds).report.flagged;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoCleanModel) throw;
    }
    rec.rate("AB-faulty", "selected_cd", seed, selected_cd, 1);
    rec.rate("AB-faulty", "target_flagged", seed, detected, 1);
}

}  // namespace

std::vector<TrainingExample> simulate_training_set(const StudyConfig& config, std::uint64_t base_seed,
                                                   std::size_t seeds) {
    std::vector<TrainingExample> out;
    for (std::size_t i = 0; i < seeds; ++i) {
        const std::uint64_t seed = base_seed + i;
        const auto [dc, faulty] = single_fault_case(config, seed, config.fault_days, 0);
        const auto run = run_detection(dc, seed, config);
        for (const auto& result : run.results) {
            for (std::size_t r = 0; r < result.reports.size(); ++r) {
                const auto& report = result.reports[r];
                const TruthLabel* t = truth_for(run.data.sim, report);
                if (!t || !report.flagged || report.system_wide) continue;
                const auto label = label_of(t->kind);
                if (!label) continue;
                out.push_back(TrainingExample{features_for(run, result, r, seed), *label});
            }
        }
    }
    return out;
}

StudyReport run_study(Study study, const StudyConfig& config) {
    if (config.seeds == 0) throw Error(ErrorCode::InvalidArgument, "a study needs at least one seed");
    StudyReport report;
    report.study = study;
    report.config = config;
    Recorder rec;

    std::optional<ForestClassifier> forest;
    std::vector<std::string> predicted;
    std::vector<std::string> truth;
    if (study == Study::SingleFault) {
        // training seeds never overlap the evaluation seeds
        const auto examples = simulate_training_set(config, config.base_seed + 1'000'000, config.forest_seeds);
        forest = fit_forest(examples, config.base_seed, ForestParams{config.forest_trees});
    }

    for (std::size_t i = 0; i < config.seeds; ++i) {
        const std::uint64_t seed = config.base_seed + i;
        switch (study) {
            case Study::ModelComparison: model_comparison(config, seed, rec); break;
            case Study::TrainingSize: training_size(config, seed, rec); break;
            case Study::PanelCount: panel_count(config, seed, rec); break;
            case Study::RoofGeometry: roof_geometry(config, seed, rec); break;
            case Study::Weather: weather_study(config, seed, rec); break;
            case Study::SingleFault: single_fault(config, seed, *forest, rec, predicted, truth); break;
            case Study::ConcurrentFault: concurrent_fault(config, seed, rec); break;
            case Study::SystemWide: system_wide(config, seed, rec); break;
            case Study::Abcd: abcd(config, seed, rec); break;
        }
    }
    rec.finish(report);
    if (study == Study::SingleFault) {
        for (auto c : kPanelClasses) report.class_order.emplace_back(to_string(c));
        report.confusion = confusion(predicted, truth, report.class_order);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string number(double v) { return is_missing(v) ? std::string() : fmt::format("{}", v); }

nlohmann::ordered_json json_number(double v) {
    return is_missing(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
}

}  // namespace

std::string study_csv(const StudyReport& report) {
    std::string out = "study,condition,metric,seeds,mean,q1,median,q3,pooled\n";
    for (const auto& s : report.summary) {
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(report.study), s.condition, s.metric, s.seeds,
                           number(s.mean), number(s.q1), number(s.median), number(s.q3),
                           s.pooled ? number(*s.pooled) : std::string());
    }
    return out;
}

std::string study_long_csv(const StudyReport& report) {
    std::string out = "study,condition,metric,seed,value\n";
    for (const auto& o : report.observations) {
        out += fmt::format("{},{},{},{},{}\n", to_string(report.study), o.condition, o.metric, o.seed, number(o.value));
    }
    return out;
}

std::string study_json(const StudyReport& report) {
    using json = nlohmann::ordered_json;
    const auto& c = report.config;
    json doc;
    doc["format"] = "panelwatch.study";
    doc["version"] = 1;
    doc["study"] = to_string(report.study);
    doc["config"] = {
        {"seeds", c.seeds},
        {"base_seed", c.base_seed},
        {"month", c.month},
        {"panels", c.panels},
        {"train_days", c.train_days},
        {"test_days", c.test_days},
        {"inputs", c.inputs},
        {"site_shade", c.site_shade},
        {"trees", c.fit.trees},
        {"max_depth", c.fit.max_depth},
        {"min_leaf", c.fit.min_leaf},
        {"history_days", c.history_days},
        {"fault_days", c.fault_days},
        {"clean_days", c.clean_days},
        {"concurrent", c.concurrent},
        {"occlusion_severities", c.occlusion_severities},
        {"forest_trees", c.forest_trees},
        {"forest_seeds", c.forest_seeds},
        {"candidate_strategy", to_string(c.candidates.strategy)},
        {"pointwise_deficit", c.detector.thresholds.pointwise_deficit},
        {"persistence_min", c.detector.thresholds.persistence_min},
        {"loss_ratio_min", c.detector.thresholds.loss_ratio_min},
        {"noisy_threshold", c.detector.labels.noisy_threshold},
        {"system_floor", c.detector.system_floor},
    };
    json summary = json::array();
    for (const auto& s : report.summary) {
        json row{{"condition", s.condition}, {"metric", s.metric},         {"seeds", s.seeds},
                 {"mean", json_number(s.mean)}, {"q1", json_number(s.q1)}, {"median", json_number(s.median)},
                 {"q3", json_number(s.q3)}};
        row["pooled"] = s.pooled ? json_number(*s.pooled) : json(nullptr);
        summary.push_back(std::move(row));
    }
    doc["summary"] = std::move(summary);
    if (report.confusion) {
        doc["confusion"] = {{"classes", report.confusion->classes}, {"counts", report.confusion->counts}};
        json per_class = json::object();
        for (const auto& [name, m] : per_class_metrics(*report.confusion)) {
            auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
            per_class[name] = {{"accuracy", opt(m.accuracy)},
                               {"sensitivity", opt(m.sensitivity)},
                               {"specificity", opt(m.specificity)}};
        }
        doc["per_class"] = std::move(per_class);
    }
    return doc.dump(2) + "\n";
}

void write_study(const StudyReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write {}", (dir / name).string()));
        out << text;
    };
    put("study.csv", study_csv(report));
    put("study.json", study_json(report));
    put("study_long.csv", study_long_csv(report));
}

}  // namespace panelwatch
