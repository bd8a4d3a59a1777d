#include "panelwatch/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "hash.hpp"
#include "panelwatch/error.hpp"

namespace panelwatch {

std::string_view to_string(CandidateStrategy s) {
    switch (s) {
        case CandidateStrategy::SamePlaneFirst: return "SamePlaneFirst";
        case CandidateStrategy::AllSubsets: return "AllSubsets";
        case CandidateStrategy::RandomSubsets: return "RandomSubsets";
    }
    return "SamePlaneFirst";
}

CandidateStrategy parse_candidate_strategy(std::string_view text) {
    for (auto s : {CandidateStrategy::SamePlaneFirst, CandidateStrategy::AllSubsets, CandidateStrategy::RandomSubsets}) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown candidate strategy '{}'", text));
}

std::string_view to_string(FaultLabel v) {
    switch (v) {
        case FaultLabel::Snow: return "Snow";
        case FaultLabel::Occlusion: return "Occlusion";
        case FaultLabel::OpenCircuit: return "OpenCircuit";
        case FaultLabel::FullSnow: return "FullSnow";
        case FaultLabel::SystemElectrical: return "SystemElectrical";
    }
    return "Snow";
}

FaultLabel parse_fault_label(std::string_view text) {
    for (auto v : {FaultLabel::Snow, FaultLabel::Occlusion, FaultLabel::OpenCircuit, FaultLabel::FullSnow,
                   FaultLabel::SystemElectrical}) {
        if (to_string(v) == text) return v;
    }
    throw Error(ErrorCode::UnknownClass, std::string(text));
}

// ---------------------------------------------------------------------------
// Candidate sets

CandidateSet::CandidateSet(std::string target, std::vector<std::vector<std::string>> subsets,
                           std::shared_ptr<const std::vector<DaySlice>> training, FitConfig fit)
    : target_(std::move(target)),
      subsets_(std::move(subsets)),
      training_(std::move(training)),
      fit_(fit),
      cache_(std::make_shared<Cache>()) {
    if (subsets_.empty()) throw Error(ErrorCode::InvalidArgument, fmt::format("{} has no candidate subsets", target_));
    std::set<std::vector<std::string>> seen;
    for (const auto& s : subsets_) {
        if (std::find(s.begin(), s.end(), target_) != s.end()) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("candidate for {} uses the target itself", target_));
        }
        auto key = s;
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second) throw Error(ErrorCode::InvalidArgument, "duplicate candidate subset");
    }
    cache_->models.resize(subsets_.size());
}

CandidateSet CandidateSet::from_models(std::string target, std::vector<PredictionModel> models) {
    std::vector<std::vector<std::string>> subsets;
    for (const auto& m : models) subsets.push_back(m.inputs);
    CandidateSet set(std::move(target), std::move(subsets), nullptr, FitConfig{});
    for (std::size_t i = 0; i < models.size(); ++i) {
        set.cache_->models[i] = std::make_shared<const PredictionModel>(std::move(models[i]));
    }
    return set;
}

const PredictionModel& CandidateSet::model(std::size_t index) const {
    if (index >= subsets_.size()) throw Error(ErrorCode::InvalidArgument, "candidate index out of range");
    std::lock_guard lock(cache_->mutex);
    auto& slot = cache_->models[index];
    if (!slot) {
        if (!training_) throw Error(ErrorCode::InsufficientData, "candidate set has no training data");
        slot = std::make_shared<const PredictionModel>(
            fit(ModelKind::Ensemble, target_, subsets_[index], *training_, fit_));
    }
    return *slot;
}

std::vector<PredictionModel> CandidateSet::fit_all() const {
    std::vector<PredictionModel> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(model(i));
    return out;
}

namespace {

double binomial(std::size_t m, std::size_t k) {
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(m - k + i) / static_cast<double>(i);
    return std::round(c);
}

std::vector<std::vector<std::size_t>> all_combinations(std::size_t m, std::size_t k) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> comb(k);
    std::iota(comb.begin(), comb.end(), std::size_t{0});
    while (true) {
        out.push_back(comb);
        std::size_t i = k;
        while (i > 0 && comb[i - 1] == m - k + i - 1) --i;
        if (i == 0) break;
        ++comb[i - 1];
        for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
    return out;
}

std::vector<std::vector<std::size_t>> random_combinations(std::size_t m, std::size_t k, std::size_t count,
                                                          std::uint64_t seed, std::string_view target) {
    if (static_cast<double>(count) >= binomial(m, k)) return all_combinations(m, k);
    const std::uint64_t salt = fnv1a(target);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
    std::mt19937_64 rng(seq);
    std::set<std::vector<std::size_t>> picked;
    std::vector<std::size_t> pool(m);
    while (picked.size() < count) {
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> d(i, m - 1);
            std::swap(pool[i], pool[d(rng)]);
        }
        std::vector<std::size_t> comb(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(comb.begin(), comb.end());
        picked.insert(std::move(comb));
    }
    return {picked.begin(), picked.end()};
}

std::vector<std::vector<std::size_t>> swap_variants(std::size_t m, std::size_t k, std::size_t limit) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> primary(k);
    std::iota(primary.begin(), primary.end(), std::size_t{0});
    out.push_back(primary);
    for (std::size_t j = k; j < m && out.size() < limit + 1; ++j) {
        for (std::size_t i = k; i-- > 0 && out.size() < limit + 1;) {
            auto v = primary;
            v[i] = j;
            std::sort(v.begin(), v.end());
            out.push_back(std::move(v));
        }
    }
    return out;
}

}  // namespace

CandidateSet build_candidates(const ArrayLayout& layout, std::string_view target, std::size_t n,
                              const CandidateOptions& options, std::shared_ptr<const std::vector<DaySlice>> training) {
    const auto order = neighbor_order(layout, target);
    const std::size_t m = order.size();
    if (n == 0 || n > m) {
        throw Error(ErrorCode::TooFewPanels, fmt::format("{} panels cannot supply {} inputs for {}", m + 1, n, target));
    }
    std::vector<std::vector<std::size_t>> ranks;
    switch (options.strategy) {
        case CandidateStrategy::SamePlaneFirst: ranks = swap_variants(m, n, options.swap_variants); break;
        case CandidateStrategy::AllSubsets:
            ranks = binomial(m, n) <= static_cast<double>(options.cap)
                        ? all_combinations(m, n)
                        : random_combinations(m, n, options.cap, options.seed, target);
            break;
        case CandidateStrategy::RandomSubsets:
            ranks = random_combinations(m, n, options.random_count, options.seed, target);
            break;
    }
    std::vector<std::vector<std::string>> subsets;
    for (const auto& r : ranks) {
        std::vector<std::string> ids;
        for (std::size_t i : r) ids.push_back(order[i]);
        subsets.push_back(std::move(ids));
    }
    FitConfig fit = options.fit;
    fit.target_capacity_w = layout.panel(target).capacity_w;
    return CandidateSet(std::string(target), std::move(subsets), std::move(training), fit);
}

namespace {

std::vector<std::size_t> noisy_counts(const CandidateSet& candidates, std::span<const InputLabel> labels) {
    std::vector<std::size_t> counts;
    for (const auto& subset : candidates.subsets()) {
        std::size_t noisy = 0;
        for (const auto& id : subset) {
            const auto it = std::find_if(labels.begin(), labels.end(), [&](const InputLabel& l) { return l.panel_id == id; });
            if (it == labels.end()) throw Error(ErrorCode::InvalidArgument, fmt::format("no input label for {}", id));
            if (it->label == InputQuality::Noisy) ++noisy;
        }
        counts.push_back(noisy);
    }
    return counts;
}

}  // namespace

Selection fewest_noisy(const CandidateSet& candidates, std::span<const InputLabel> labels) {
    const auto counts = noisy_counts(candidates, labels);
    const auto best = std::min_element(counts.begin(), counts.end());
    return Selection{static_cast<std::size_t>(best - counts.begin()), *best};
}

Selection select_model(const CandidateSet& candidates, std::span<const InputLabel> labels) {
    const Selection s = fewest_noisy(candidates, labels);
    if (s.noisy_inputs > 0) {
        throw Error(ErrorCode::NoCleanModel, fmt::format("every candidate for {} uses a Noisy input", candidates.target()));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Detection

DayDetection detect_day(std::string_view target, const DaySlice& day, const SeasonalProfile& seasonal,
                        const PredictionModel& model, const DetectionThresholds& thresholds) {
    const auto observed = day.matrix.column(day.all_rows.require_index(target));
    const auto predicted = predict(model, day);
    std::vector<std::size_t> slots;
    for (const auto& t : day.matrix.timestamps()) slots.push_back(slot_of_day(t, day.matrix.utc_offset()));

    DayDetection out;
    out.loss = estimate_loss(target, day.date, slots, observed, predicted, seasonal);
    std::size_t lossy = 0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const double a = out.loss.anomaly_loss[i];
        if (is_missing(a)) continue;
        ++counted;
        if (a < -thresholds.pointwise_deficit * predicted[i]) ++lossy;
    }
    auto& r = out.report;
    r.panel_id = std::string(target);
    r.date = day.date;
    r.daily_loss_ratio = out.loss.daily_loss_ratio;
    r.persistence = counted > 0 ? static_cast<double>(lossy) / static_cast<double>(counted) : 0.0;
    r.flagged = r.persistence >= thresholds.persistence_min && r.daily_loss_ratio >= thresholds.loss_ratio_min;
    r.model_inputs = model.inputs;
    return out;
}

ArrayDetector::ArrayDetector(ArrayLayout layout, std::map<std::string, CandidateSet> candidates,
                             std::map<std::string, ForecastModel> forecasters, DetectorConfig config)
    : layout_(std::move(layout)),
      candidates_(std::move(candidates)),
      forecasters_(std::move(forecasters)),
      config_(config) {}

void ArrayDetector::add_history(const std::string& panel_id, ResidualDay day) {
    auto& h = history_[panel_id];
    h.push_back(std::move(day));
    const std::size_t keep = 4 * std::max<std::size_t>(config_.seasonal.window_days, 1);
    if (h.size() > keep) h.erase(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(h.size() - keep));
}

DateResult ArrayDetector::detect_date(const DaySlice& day, const WeatherSeries& weather) {
    DateResult result;
    result.date = day.date;
    const auto& rows = day.all_rows;
    const auto& ids = rows.panel_ids();

    std::map<std::string, std::vector<double>> forecasts;
    std::map<std::string, double> capacities;
    std::map<std::string, std::string> forecast_warnings;
    for (const auto& id : ids) {
        capacities[id] = layout_.panel(id).capacity_w;
        const auto f = forecasters_.find(id);
        try {
            if (f == forecasters_.end()) throw Error(ErrorCode::InsufficientHistory, "no forecaster");
            forecasts[id] = forecast(f->second, day.date, rows.utc_offset(), weather);
        } catch (const Error& e) {
            // without a usable forecast the panel cannot be judged Noisy
            forecasts[id].assign(kSlotsPerDay, 0.0);
            forecast_warnings[id] = e.what();
        }
    }
    result.labels = label_inputs(day, forecasts, capacities, config_.labels);

    std::map<std::string, std::optional<Selection>> clean;
    bool none_clean = true;
    for (const auto& id : ids) {
        const auto c = candidates_.find(id);
        if (c == candidates_.end()) continue;
        try {
            clean[id] = select_model(c->second, result.labels);
            none_clean = false;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoCleanModel) throw;
            clean[id] = std::nullopt;
        }
    }

    double energy = 0.0;
    double nominal = 0.0;
    for (std::size_t c = 0; c < rows.cols(); ++c) {
        nominal += nominal_daily_energy_wh(capacities[ids[c]]);
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            if (!is_missing(rows(r, c))) energy += rows(r, c) * kSampleHours;
        }
    }
    result.system_wide = none_clean && !ids.empty() && energy < config_.system_floor * nominal;

    for (std::size_t c = 0; c < ids.size(); ++c) {
        const std::string& id = ids[c];
        if (result.system_wide) {
            FaultReport r;
            r.panel_id = id;
            r.date = day.date;
            r.flagged = true;
            r.system_wide = true;
            double obs = 0.0;
            double exp = 0.0;
            std::size_t lossy = 0;
            std::size_t counted = 0;
            for (std::size_t row = 0; row < rows.rows(); ++row) {
                const double v = rows(row, c);
                const double f = forecasts[id][slot_of_day(rows.timestamps()[row], rows.utc_offset())];
                if (is_missing(v) || f <= 0.0) continue;
                obs += v;
                exp += f;
                ++counted;
                if (v < (1.0 - config_.thresholds.pointwise_deficit) * f) ++lossy;
            }
            r.daily_loss_ratio = exp > 0.0 ? std::clamp(1.0 - obs / exp, 0.0, 1.0) : 1.0;
            r.persistence = counted > 0 ? static_cast<double>(lossy) / static_cast<double>(counted) : 1.0;
            result.reports.push_back(std::move(r));
            result.losses.push_back(LossEstimate{id, day.date, {}, {}, {}, {}, {}, {}, r.daily_loss_ratio});
            continue;
        }

        FaultReport report;
        report.panel_id = id;
        report.date = day.date;
        LossEstimate loss{id, day.date, {}, {}, {}, {}, {}, {}, 0.0};
        try {
            const auto c_it = candidates_.find(id);
            if (c_it == candidates_.end()) throw Error(ErrorCode::MissingInputPanel, fmt::format("no models for {}", id));
            const CandidateSet& set = c_it->second;
            const auto& chosen = clean[id];
            const Selection sel = chosen ? *chosen : fewest_noisy(set, result.labels);

            SeasonalProfile seasonal = SeasonalProfile::zero();
            if (auto h = history_.find(id); h != history_.end()) {
                try {
                    seasonal = seasonal_decompose(h->second, config_.seasonal);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::InsufficientHistory) throw;
                }
            }
            DayDetection det = detect_day(id, day, seasonal, set.model(sel.index), config_.thresholds);
            report = std::move(det.report);
            loss = std::move(det.loss);
            if (!chosen) {
                report.low_confidence = true;
                report.confidence *= 0.5;
                report.warning = "no candidate with all-Normal inputs";
            }
            result.audits.push_back(SelectionAudit{id, day.date, report.model_inputs, chosen.has_value(), sel.noisy_inputs});
            add_history(id, ResidualDay{day.date, loss.slots, loss.residual, report.flagged});
        } catch (const Error& e) {
            report.flagged = false;
            report.warning = e.what();
        }
        if (auto w = forecast_warnings.find(id); w != forecast_warnings.end()) {
            report.warning += (report.warning.empty() ? "" : "; ") + w->second;
        }
        result.reports.push_back(std::move(report));
        result.losses.push_back(std::move(loss));
    }

    std::vector<std::size_t> order(result.reports.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return result.reports[a].panel_id < result.reports[b].panel_id; });
    std::vector<FaultReport> reports;
    std::vector<LossEstimate> losses;
    for (std::size_t i : order) {
        reports.push_back(std::move(result.reports[i]));
        losses.push_back(std::move(result.losses[i]));
    }
    result.reports = std::move(reports);
    result.losses = std::move(losses);
    return result;
}

std::vector<DateResult> ArrayDetector::run(std::span<const DaySlice> days, const WeatherSeries& weather) {
    std::vector<DateResult> out;
    for (const auto& day : days) out.push_back(detect_date(day, weather));
    return out;
}

std::vector<FaultReport> detect_array(const ArrayLayout& layout, std::map<std::string, CandidateSet> candidates,
                                      std::map<std::string, ForecastModel> forecasters,
                                      std::span<const DaySlice> days, const WeatherSeries& weather,
                                      const DetectorConfig& config) {
    ArrayDetector detector(layout, std::move(candidates), std::move(forecasters), config);
    std::vector<FaultReport> out;
    for (auto& result : detector.run(days, weather)) {
        for (auto& r : result.reports) out.push_back(std::move(r));
    }
    return out;
}

}  // namespace panelwatch
