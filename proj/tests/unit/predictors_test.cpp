#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "panelwatch/error.hpp"
#include "panelwatch/evaluate.hpp"
#include "panelwatch/predictors.hpp"
#include "panelwatch/solar.hpp"
#include "support.hpp"

using namespace panelwatch;
using namespace std::chrono_literals;
using pwtest::ymd;

namespace {

// Three correlated inputs and a target that is their noisy weighted sum.
std::vector<DaySlice> random_days(std::uint64_t seed, int days, std::size_t rows) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 3.0);
    std::uniform_real_distribution<double> level(20.0, 300.0);
    std::vector<DaySlice> out;
    for (int d = 0; d < days; ++d) {
        std::vector<std::vector<double>> cols(4, std::vector<double>(rows));
        for (std::size_t r = 0; r < rows; ++r) {
            const double base = level(rng);
            cols[1][r] = base + noise(rng);
            cols[2][r] = 0.9 * base + noise(rng);
            cols[3][r] = 1.1 * base + noise(rng);
            cols[0][r] = 0.5 * cols[1][r] + 0.3 * cols[2][r] + 0.25 * cols[3][r] + 4.0 + noise(rng);
        }
        out.push_back(pwtest::make_day({"T", "A", "B", "C"}, cols, ymd(2019, 6, static_cast<unsigned>(d + 1))));
    }
    return out;
}

const std::vector<std::string> kInputs{"A", "B", "C"};

}  // namespace

TEST(Fit, LinearRecoversExactCopy) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 300.0);
    std::vector<std::vector<double>> cols(3, std::vector<double>(60));
    for (std::size_t r = 0; r < 60; ++r) {
        cols[1][r] = u(rng);
        cols[2][r] = u(rng);
        cols[0][r] = cols[1][r];
    }
    const DaySlice day = pwtest::make_day({"T", "A", "B"}, cols);
    const auto m = fit(ModelKind::Linear, "T", {"A", "B"}, std::span(&day, 1), FitConfig{});
    ASSERT_EQ(m.weights.size(), 2u);
    EXPECT_NEAR(m.weights[0], 1.0, 1e-8);
    EXPECT_NEAR(m.weights[1], 0.0, 1e-8);
    EXPECT_NEAR(m.intercept, 0.0, 1e-8);
    EXPECT_EQ(m.meta.ridge_lambda, 0.0);
}

TEST(Fit, NaiveMeanAveragesInputs) {
    const auto days = random_days(1, 1, 50);
    const auto m = fit(ModelKind::NaiveMean, "T", {"A", "B"}, days, FitConfig{});
    EXPECT_DOUBLE_EQ(m.estimate(std::vector<double>{100.0, 200.0}), 150.0);
}

TEST(Fit, InsufficientRows) {
    const auto days = random_days(1, 1, 39);
    try {
        fit(ModelKind::Linear, "T", kInputs, days, FitConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
    }
    EXPECT_NO_THROW(fit(ModelKind::Linear, "T", kInputs, random_days(1, 1, 40), FitConfig{}));
}

TEST(Fit, TargetAmongInputsRejected) {
    EXPECT_THROW(fit(ModelKind::Linear, "T", {"A", "T"}, random_days(1, 1, 60), FitConfig{}), Error);
}

TEST(Fit, SingularDesignFallsBackToRidge) {
    std::vector<std::vector<double>> cols(3, std::vector<double>(60));
    for (std::size_t r = 0; r < 60; ++r) {
        cols[1][r] = static_cast<double>(r);
        cols[2][r] = 2.0 * static_cast<double>(r);
        cols[0][r] = 3.0 * static_cast<double>(r) + 1.0;
    }
    const DaySlice day = pwtest::make_day({"T", "A", "B"}, cols);
    const auto m = fit(ModelKind::Linear, "T", {"A", "B"}, std::span(&day, 1), FitConfig{});
    EXPECT_NEAR(m.meta.ridge_lambda, 1e-6, 1e-18);
    for (double w : m.weights) EXPECT_TRUE(std::isfinite(w));
    EXPECT_NEAR(m.estimate(std::vector<double>{10.0, 20.0}), 31.0, 1e-3);
}

TEST(Fit, LinearWeightsIgnoreRowOrder) {
    const auto a = fit(ModelKind::Linear, "T", kInputs, random_days(5, 2, 80), FitConfig{});
    const auto base = random_days(5, 2, 80);
    std::vector<DaySlice> reversed;
    for (auto it = base.rbegin(); it != base.rend(); ++it) {
        std::vector<std::vector<double>> cols(4);
        for (std::size_t c = 0; c < 4; ++c) {
            auto col = it->matrix.column(c);
            std::reverse(col.begin(), col.end());
            cols[c] = col;
        }
        reversed.push_back(pwtest::make_day({"T", "A", "B", "C"}, cols, it->date));
    }
    const auto r = fit(ModelKind::Linear, "T", kInputs, reversed, FitConfig{});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a.weights[i], r.weights[i], 1e-9);
    EXPECT_NEAR(a.intercept, r.intercept, 1e-9);
}

TEST(Fit, EnsembleDeterministicUnderSeed) {
    const auto days = random_days(8, 2, 80);
    FitConfig cfg;
    cfg.trees = 10;
    cfg.seed = 4;
    const auto a = fit(ModelKind::Ensemble, "T", kInputs, days, cfg);
    const auto b = fit(ModelKind::Ensemble, "T", kInputs, days, cfg);
    cfg.seed = 5;
    const auto c = fit(ModelKind::Ensemble, "T", kInputs, days, cfg);
    EXPECT_EQ(a.trees, b.trees);
    EXPECT_NE(a.trees, c.trees);
    EXPECT_EQ(a.trees.size(), 10u);
}

TEST(Predict, LinearExample) {
    PredictionModel m;
    m.target = "T";
    m.inputs = {"A", "B"};
    m.kind = ModelKind::Linear;
    m.weights = {0.5, 0.5};
    const DaySlice day = pwtest::make_day({"T", "A", "B"}, {{0.0}, {100.0}, {300.0}});
    EXPECT_DOUBLE_EQ(predict(m, day).front(), 200.0);
}

TEST(Predict, MissingInputsGiveMissing) {
    const auto days = random_days(2, 1, 60);
    const auto linear = fit(ModelKind::Linear, "T", kInputs, days, FitConfig{});
    FitConfig cfg;
    cfg.trees = 5;
    const auto ens = fit(ModelKind::Ensemble, "T", kInputs, days, cfg);
    const auto naive = fit(ModelKind::NaiveMean, "T", kInputs, days, cfg);
    const DaySlice day = pwtest::make_day({"T", "A", "B", "C"}, {{1.0}, {kMissing}, {kMissing}, {kMissing}});
    for (const auto* m : {&linear, &ens, &naive}) EXPECT_TRUE(is_missing(predict(*m, day).front()));
}

TEST(Predict, MissingPanelRejected) {
    const auto m = fit(ModelKind::Linear, "T", kInputs, random_days(2, 1, 60), FitConfig{});
    const DaySlice day = pwtest::make_day({"T", "A", "B"}, {{1.0}, {2.0}, {3.0}});
    try {
        predict(m, day);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingInputPanel);
    }
}

TEST(Predict, ClampedToNameplateBand) {
    PredictionModel m;
    m.target = "T";
    m.inputs = {"A"};
    m.kind = ModelKind::Linear;
    m.weights = {10.0};
    m.intercept = -50.0;
    m.target_capacity_w = 100.0;
    const DaySlice day = pwtest::make_day({"T", "A"}, {{0.0, 0.0}, {1.0, 50.0}});
    const auto p = predict(m, day);
    EXPECT_EQ(p[0], 0.0);
    EXPECT_EQ(p[1], 125.0);
}

TEST(Predict, EnsembleIsMeanOfTrees) {
    const auto days = random_days(9, 2, 100);
    FitConfig cfg;
    cfg.trees = 25;
    const auto m = fit(ModelKind::Ensemble, "T", kInputs, days, cfg);
    const auto test = random_days(10, 1, 50).front();
    const auto p = predict(m, test);
    for (std::size_t r = 0; r < test.matrix.rows(); ++r) {
        std::vector<double> row;
        for (const auto& id : kInputs) row.push_back(test.matrix(r, test.matrix.require_index(id)));
        double sum = 0.0;
        for (const auto& tree : m.trees) sum += tree.predict(row);
        EXPECT_NEAR(p[r], std::max(0.0, sum / static_cast<double>(m.trees.size())), 1e-12);
    }
}

TEST(Predict, EnsembleBeatsNaiveOnHeldOutSunnyDays) {
    const auto layout = layouts::single_plane(5);
    const auto s = pwtest::sim_days(layout, ymd(2019, 6, 1), 8, WeatherProfile::Sunny, {}, 12);
    const std::span<const DaySlice> days(s.days);
    FitConfig cfg;
    cfg.target_capacity_w = 320.0;
    const std::vector<std::string> inputs{"P02", "P03", "P04", "P05"};
    const auto ens = fit(ModelKind::Ensemble, "P01", inputs, days.first(4), cfg);
    const auto naive = fit(ModelKind::NaiveMean, "P01", inputs, days.first(4), cfg);
    std::vector<double> obs, pe, pn;
    for (const auto& d : days.subspan(4)) {
        const auto o = d.matrix.column("P01");
        const auto a = predict(ens, d), b = predict(naive, d);
        obs.insert(obs.end(), o.begin(), o.end());
        pe.insert(pe.end(), a.begin(), a.end());
        pn.insert(pn.end(), b.begin(), b.end());
    }
    EXPECT_LT(mape(obs, pe), mape(obs, pn));
}

TEST(Residual, Examples) {
    const std::vector<double> o{5.0, 7.0}, p{5.0, 7.0};
    EXPECT_EQ(residual(o, p), (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(residual(std::vector<double>{0.0, 0.0}, std::vector<double>{250.0, 260.0}),
              (std::vector<double>{-250.0, -260.0}));
    const auto r = residual(std::vector<double>{1.0, kMissing}, std::vector<double>{kMissing, 2.0});
    EXPECT_TRUE(is_missing(r[0]) && is_missing(r[1]));
    EXPECT_THROW(residual(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), Error);
}

TEST(Residual, ReconstructsObserved) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 400.0);
    std::vector<double> o(500), p(500);
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = u(rng);
        p[i] = u(rng);
    }
    const auto r = residual(o, p);
    for (std::size_t i = 0; i < o.size(); ++i) EXPECT_NEAR(r[i] + p[i], o[i], 1e-12 * std::max(1.0, o[i]));
}

TEST(Inputs, SamePlaneFirstThenNearest) {
    const auto layout = layouts::four_plane_home();
    EXPECT_EQ(select_inputs(layout, "P05", 2), (std::vector<std::string>{"P04", "P06"}));
    const auto five = select_inputs(layout, "P05", 5);
    EXPECT_EQ(five, (std::vector<std::string>{"P04", "P06", "P03", "P07", "P02"}));
    EXPECT_THROW(select_inputs(layout, "P05", 12), Error);
}

TEST(Seasonal, ZeroResidualGivesZeroProfile) {
    std::vector<ResidualDay> days;
    for (unsigned d = 1; d <= 8; ++d) {
        ResidualDay r{ymd(2019, 6, d), {}, {}, false};
        for (std::size_t s = 100; s < 200; ++s) {
            r.slots.push_back(s);
            r.residual.push_back(0.0);
        }
        days.push_back(r);
    }
    const auto p = seasonal_decompose(days);
    for (std::size_t s = 0; s < kSlotsPerDay; ++s) EXPECT_EQ(p.at(s), 0.0);
}

TEST(Seasonal, InsufficientHistory) {
    std::vector<ResidualDay> days(6, ResidualDay{ymd(2019, 6, 1), {120}, {1.0}, false});
    days.push_back(ResidualDay{ymd(2019, 6, 1), {120}, {1.0}, true});
    try {
        seasonal_decompose(days);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientHistory);
    }
}

TEST(Seasonal, SkipsFaultyDaysAndUsesMedian) {
    std::vector<ResidualDay> days;
    for (unsigned d = 1; d <= 9; ++d) days.push_back(ResidualDay{ymd(2019, 6, d), {150}, {static_cast<double>(d)}, false});
    days.push_back(ResidualDay{ymd(2019, 6, 10), {150}, {-1000.0}, true});
    const auto p = seasonal_decompose(days);
    EXPECT_DOUBLE_EQ(p.at(150), 5.0);
    EXPECT_EQ(p.days_used, 9u);
}

TEST(Seasonal, IdempotentOnNoiseFreeInput) {
    std::vector<ResidualDay> days;
    for (unsigned d = 1; d <= 10; ++d) {
        ResidualDay r{ymd(2019, 6, d), {}, {}, false};
        for (std::size_t s = 90; s < 210; ++s) {
            r.slots.push_back(s);
            r.residual.push_back(s >= 110 && s < 122 ? -80.0 : 5.0 * std::sin(0.1 * static_cast<double>(s)));
        }
        days.push_back(r);
    }
    const auto first = seasonal_decompose(days);
    for (auto& r : days) {
        for (std::size_t i = 0; i < r.slots.size(); ++i) r.residual[i] -= first.at(r.slots[i]);
    }
    const auto second = seasonal_decompose(days);
    for (std::size_t s = 0; s < kSlotsPerDay; ++s) EXPECT_LT(std::abs(second.at(s)), 1.0);
}

namespace {

struct ShadeRun {
    pwtest::SimDays shaded;
    PredictionModel model;
};

ShadeRun shade_run(const std::vector<FaultSpec>& faults) {
    const auto layout = layouts::single_plane(6);
    SimOptions opts;
    opts.shades = {ShadeSpec{"P01", 9h, 10h, 0.3}};
    // train on a shade-free stretch of the same array
    const auto train = pwtest::sim_days(layout, ymd(2019, 6, 1), 4, WeatherProfile::Sunny, {}, 6);
    FitConfig cfg;
    cfg.target_capacity_w = 320.0;
    auto model = fit(ModelKind::Ensemble, "P01", {"P02", "P03", "P04", "P05", "P06"}, train.days, cfg);
    return {pwtest::sim_days(layout, ymd(2019, 6, 10), 15, WeatherProfile::Sunny, faults, 6, opts), std::move(model)};
}

ResidualDay residual_day(const PredictionModel& m, const DaySlice& day) {
    return ResidualDay{day.date, pwtest::slots_of(day), residual(day.matrix.column("P01"), predict(m, day)), false};
}

}  // namespace

TEST(Seasonal, ReproducesStaticShade) {
    const auto run = shade_run({});
    std::vector<ResidualDay> history;
    for (const auto& d : run.shaded.days) history.push_back(residual_day(run.model, d));
    const auto profile = seasonal_decompose(history);
    const auto& layout = run.shaded.sim.layout;
    const auto& panel = layout.panel("P01");
    const Date mid = run.shaded.days[7].date;
    for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
        const auto tod = kSampleInterval * static_cast<int>(s);
        if (tod < 9h || tod >= 10h) continue;
        const Timestamp t = day_start(mid, layout.utc_offset) + tod;
        const double injected = -0.3 * clear_sky_power(panel, t, layout.location);
        EXPECT_NEAR(profile.at(s), injected, 0.05 * panel.capacity_w) << s;
    }
    // once the profile is removed nothing of the shade remains
    const auto& day = run.shaded.days[7];
    const auto loss = estimate_loss("P01", day.date, pwtest::slots_of(day), day.matrix.column("P01"),
                                    predict(run.model, day), profile);
    EXPECT_LT(loss.daily_loss_ratio, 0.02);
}

TEST(Seasonal, FaultDayStandsOutAgainstNormalDays) {
    const Date fault_date = ymd(2019, 6, 24);
    const auto run = shade_run({FaultSpec{"P01", fault_date, FaultKind::Occlusion, 0.5, {}, {}}});
    std::vector<ResidualDay> history;
    for (const auto& d : run.shaded.days) {
        auto r = residual_day(run.model, d);
        r.faulty = d.date == fault_date;
        history.push_back(r);
    }
    const auto profile = seasonal_decompose(history);
    std::size_t within = 0, total = 0;
    for (const auto& d : run.shaded.days) {
        const auto pred = predict(run.model, d);
        const auto obs = d.matrix.column("P01");
        const auto loss = estimate_loss("P01", d.date, pwtest::slots_of(d), obs, pred, profile);
        if (d.date == fault_date) {
            // injected loss is half the unfaulted output, i.e. equal to what remains
            double injected = 0.0, recovered = 0.0;
            for (std::size_t i = 0; i < obs.size(); ++i) {
                injected += obs[i];
                recovered += -loss.anomaly_loss[i];
            }
            EXPECT_NEAR(recovered / injected, 1.0, 0.1);
            EXPECT_NEAR(loss.daily_loss_ratio, 0.5, 0.06);
            continue;
        }
        for (double a : loss.anomaly_loss) {
            ++total;
            within += std::abs(a) < 3 * 0.02 * 320.0;
        }
    }
    EXPECT_GE(static_cast<double>(within) / static_cast<double>(total), 0.99);
}

TEST(Loss, IdentitiesHold) {
    const auto run = shade_run({});
    const auto& d = run.shaded.days[3];
    SeasonalProfile seasonal = SeasonalProfile::zero();
    for (std::size_t s = 0; s < kSlotsPerDay; ++s) seasonal.by_slot[s] = 0.1 * static_cast<double>(s % 17);
    const auto obs = d.matrix.column("P01");
    const auto loss = estimate_loss("P01", d.date, pwtest::slots_of(d), obs, predict(run.model, d), seasonal);
    double lost = 0.0, expected = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        EXPECT_EQ(loss.predicted[i] + loss.residual[i], obs[i]);
        EXPECT_EQ(loss.anomaly_loss[i], loss.residual[i] - loss.seasonal[i]);
        lost += std::max(0.0, -loss.anomaly_loss[i]);
        expected += loss.predicted[i];
    }
    EXPECT_NEAR(loss.daily_loss_ratio, lost / expected, 1e-12);
}
