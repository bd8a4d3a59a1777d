#include "panelwatch/predictors.hpp"

#include <algorithm>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "panelwatch/error.hpp"

namespace panelwatch {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::NaiveMean: return "NaiveMean";
        case ModelKind::Linear: return "Linear";
        case ModelKind::Ensemble: return "Ensemble";
    }
    return "NaiveMean";
}

ModelKind parse_model_kind(std::string_view text) {
    for (auto k : {ModelKind::NaiveMean, ModelKind::Linear, ModelKind::Ensemble}) {
        if (to_string(k) == text) return k;
    }
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown model kind '{}'", text));
}

double PredictionModel::estimate(std::span<const double> input_watts) const {
    if (input_watts.size() != inputs.size()) throw Error(ErrorCode::LengthMismatch, "wrong number of inputs");
    for (double v : input_watts) {
        if (is_missing(v)) return kMissing;
    }
    switch (kind) {
        case ModelKind::NaiveMean: {
            double s = 0.0;
            for (double v : input_watts) s += v;
            return s / static_cast<double>(input_watts.size());
        }
        case ModelKind::Linear: {
            double s = intercept;
            for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * input_watts[i];
            return s;
        }
        case ModelKind::Ensemble: {
            double s = 0.0;
            for (const auto& tree : trees) s += tree.predict(input_watts);
            return s / static_cast<double>(trees.size());
        }
    }
    return kMissing;
}

std::vector<double> PredictionModel::tree_estimates(std::span<const double> input_watts) const {
    std::vector<double> out;
    out.reserve(trees.size());
    for (const auto& tree : trees) out.push_back(tree.predict(input_watts));
    return out;
}

namespace {

struct TrainingRows {
    FeatureTable x;
    std::vector<double> y;
};

TrainingRows collect_rows(std::string_view target, const std::vector<std::string>& inputs,
                          std::span<const DaySlice> training) {
    TrainingRows rows{FeatureTable(inputs.size()), {}};
    std::vector<double> row(inputs.size());
    for (const auto& day : training) {
        const auto& m = day.matrix;
        const auto target_col = day.all_rows.index_of(target);
        if (!target_col) throw Error(ErrorCode::MissingInputPanel, std::string(target));
        std::vector<std::size_t> cols;
        for (const auto& id : inputs) {
            const auto c = day.all_rows.index_of(id);
            if (!c) throw Error(ErrorCode::MissingInputPanel, id);
            cols.push_back(*c);
        }
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const double y = m(r, *target_col);
            if (is_missing(y)) continue;
            bool complete = true;
            for (std::size_t i = 0; i < cols.size(); ++i) {
                row[i] = m(r, cols[i]);
                complete = complete && !is_missing(row[i]);
            }
            if (!complete) continue;
            rows.x.add_row(row);
            rows.y.push_back(y);
        }
    }
    return rows;
}

void fit_linear(PredictionModel& model, const TrainingRows& rows, bool with_intercept) {
    const auto n = static_cast<Eigen::Index>(rows.x.rows());
    const auto k = static_cast<Eigen::Index>(rows.x.cols());
    const Eigen::Index width = k + (with_intercept ? 1 : 0);
    Eigen::MatrixXd design(n, width);
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) design(r, c) = rows.x(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        if (with_intercept) design(r, k) = 1.0;
        y(r) = rows.y[static_cast<std::size_t>(r)];
    }
    Eigen::VectorXd w;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() == width) {
        w = qr.solve(y);
    } else {
        constexpr double kRidge = 1e-6;
        Eigen::MatrixXd gram = design.transpose() * design;
        for (Eigen::Index c = 0; c < k; ++c) gram(c, c) += kRidge;
        if (with_intercept) gram(k, k) += kRidge * 1e-6;
        w = gram.ldlt().solve(design.transpose() * y);
        model.meta.ridge_lambda = kRidge;
    }
    model.weights.assign(w.data(), w.data() + k);
    model.intercept = with_intercept ? w(k) : 0.0;
    for (double v : model.weights) {
        if (!std::isfinite(v)) throw Error(ErrorCode::SingularDesign, "linear weights are not finite");
    }
}

void fit_ensemble(PredictionModel& model, const TrainingRows& rows, const FitConfig& config) {
    if (config.trees < 1) throw Error(ErrorCode::InvalidArgument, "ensemble needs at least one tree");
    TreeParams params;
    params.max_depth = config.max_depth;
    params.min_leaf = config.min_leaf;
    params.features_per_split = (rows.x.cols() + 2) / 3;
    const std::size_t n = rows.y.size();
    std::vector<std::size_t> sample(n);
    for (int b = 0; b < config.trees; ++b) {
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                          static_cast<std::uint32_t>(b)};
        std::mt19937_64 rng(seq);
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        for (auto& s : sample) s = draw(rng);
        model.trees.push_back(DecisionTree::fit_regression(rows.x, rows.y, sample, params, rng));
    }
}

}  // namespace

PredictionModel fit(ModelKind kind, std::string_view target, const std::vector<std::string>& inputs,
                    std::span<const DaySlice> training, const FitConfig& config) {
    if (inputs.empty()) throw Error(ErrorCode::InvalidArgument, "model needs at least one input panel");
    if (std::find(inputs.begin(), inputs.end(), target) != inputs.end()) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("target {} cannot be its own input", target));
    }
    const TrainingRows rows = collect_rows(target, inputs, training);
    const std::size_t needed = 10 * (inputs.size() + 1);
    if (rows.y.size() < needed) {
        throw Error(ErrorCode::InsufficientData,
                    fmt::format("{} complete training rows for {}, need {}", rows.y.size(), target, needed));
    }

    PredictionModel model;
    model.target = std::string(target);
    model.inputs = inputs;
    model.kind = kind;
    model.target_capacity_w = config.target_capacity_w;
    model.meta.seed = config.seed;
    model.meta.rows = rows.y.size();
    for (const auto& day : training) model.meta.days.push_back(day.date);

    switch (kind) {
        case ModelKind::NaiveMean: break;
        case ModelKind::Linear: fit_linear(model, rows, config.intercept); break;
        case ModelKind::Ensemble: fit_ensemble(model, rows, config); break;
    }
    return model;
}

std::vector<double> predict(const PredictionModel& model, const PanelMatrix& matrix) {
    std::vector<std::size_t> cols;
    for (const auto& id : model.inputs) {
        const auto c = matrix.index_of(id);
        if (!c) throw Error(ErrorCode::MissingInputPanel, id);
        cols.push_back(*c);
    }
    const double upper = std::isnan(model.target_capacity_w) ? std::numeric_limits<double>::infinity()
                                                             : 1.25 * model.target_capacity_w;
    std::vector<double> out(matrix.rows());
    std::vector<double> row(cols.size());
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t i = 0; i < cols.size(); ++i) row[i] = matrix(r, cols[i]);
        const double v = model.estimate(row);
        out[r] = is_missing(v) ? kMissing : std::clamp(v, 0.0, upper);
    }
    return out;
}

std::vector<double> predict(const PredictionModel& model, const DaySlice& day) {
    for (const auto& id : model.inputs) {
        if (!day.all_rows.index_of(id)) throw Error(ErrorCode::MissingInputPanel, id);
    }
    return predict(model, day.matrix);
}

std::vector<double> residual(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.size() != predicted.size()) {
        throw Error(ErrorCode::LengthMismatch,
                    fmt::format("{} observed vs {} predicted samples", observed.size(), predicted.size()));
    }
    std::vector<double> out(observed.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (is_missing(observed[i]) || is_missing(predicted[i])) ? kMissing : observed[i] - predicted[i];
    }
    return out;
}

std::vector<std::string> neighbor_order(const ArrayLayout& layout, std::string_view target) {
    const auto t = layout.index_of(target);
    if (!t) throw Error(ErrorCode::UnknownPanel, std::string(target));
    const auto& plane = layout.panels[*t].roof_plane;
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < layout.panels.size(); ++i) {
        if (i != *t) others.push_back(i);
    }
    auto distance = [&](std::size_t i) { return i > *t ? i - *t : *t - i; };
    std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
        const bool sa = layout.panels[a].roof_plane == plane;
        const bool sb = layout.panels[b].roof_plane == plane;
        if (sa != sb) return sa;
        if (distance(a) != distance(b)) return distance(a) < distance(b);
        return a < b;
    });
    std::vector<std::string> ids;
    for (std::size_t i : others) ids.push_back(layout.panels[i].id);
    return ids;
}

std::vector<std::string> select_inputs(const ArrayLayout& layout, std::string_view target, std::size_t n) {
    auto order = neighbor_order(layout, target);
    if (n == 0 || n > order.size()) {
        throw Error(ErrorCode::TooFewPanels, fmt::format("cannot pick {} inputs from {} other panels", n, order.size()));
    }
    order.resize(n);
    return order;
}

// ---------------------------------------------------------------------------

double SeasonalProfile::at(std::size_t slot) const {
    const double v = slot < by_slot.size() ? by_slot[slot] : kMissing;
    return is_missing(v) ? 0.0 : v;
}

SeasonalProfile SeasonalProfile::zero() {
    SeasonalProfile p;
    std::fill(p.by_slot.begin(), p.by_slot.end(), 0.0);
    return p;
}

SeasonalProfile seasonal_decompose(std::span<const ResidualDay> history, const SeasonalConfig& config) {
    std::vector<const ResidualDay*> usable;
    for (auto it = history.rbegin(); it != history.rend() && usable.size() < config.window_days; ++it) {
        if (!it->faulty) usable.push_back(&*it);
    }
    if (usable.size() < config.min_days || usable.empty()) {
        throw Error(ErrorCode::InsufficientHistory,
                    fmt::format("{} usable residual days, need {}", usable.size(), config.min_days));
    }
    std::vector<std::vector<double>> per_slot(kSlotsPerDay);
    for (const ResidualDay* day : usable) {
        if (day->slots.size() != day->residual.size()) {
            throw Error(ErrorCode::LengthMismatch, "residual day slots and values differ in length");
        }
        for (std::size_t i = 0; i < day->slots.size(); ++i) {
            if (day->slots[i] >= kSlotsPerDay) throw Error(ErrorCode::InvalidArgument, "slot outside the day");
            if (!is_missing(day->residual[i])) per_slot[day->slots[i]].push_back(day->residual[i]);
        }
    }
    const std::size_t quorum = std::max<std::size_t>(1, (config.min_days + 1) / 2);
    SeasonalProfile profile;
    profile.days_used = usable.size();
    for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
        auto& v = per_slot[s];
        if (v.size() < quorum) continue;
        std::sort(v.begin(), v.end());
        const std::size_t mid = v.size() / 2;
        profile.by_slot[s] = v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
    }
    return profile;
}

LossEstimate estimate_loss(std::string_view panel_id, Date date, std::span<const std::size_t> slots,
                           std::span<const double> observed, std::span<const double> predicted,
                           const SeasonalProfile& seasonal) {
    if (slots.size() != observed.size()) throw Error(ErrorCode::LengthMismatch, "slots and observations differ");
    LossEstimate loss;
    loss.panel_id = std::string(panel_id);
    loss.date = date;
    loss.slots.assign(slots.begin(), slots.end());
    loss.observed.assign(observed.begin(), observed.end());
    loss.predicted.assign(predicted.begin(), predicted.end());
    loss.residual = residual(observed, predicted);
    loss.seasonal.resize(slots.size());
    loss.anomaly_loss.resize(slots.size());
    double lost = 0.0;
    double expected = 0.0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        loss.seasonal[i] = seasonal.at(slots[i]);
        loss.anomaly_loss[i] = is_missing(loss.residual[i]) ? kMissing : loss.residual[i] - loss.seasonal[i];
        if (is_missing(loss.anomaly_loss[i])) continue;
        lost += std::max(0.0, -loss.anomaly_loss[i]);
        expected += predicted[i];
    }
    loss.daily_loss_ratio = expected > 0.0 ? lost / expected : 0.0;
    return loss;
}

}  // namespace panelwatch
