#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "panelwatch/detector.hpp"
#include "panelwatch/error.hpp"
#include "support.hpp"

using namespace panelwatch;
using namespace std::chrono_literals;
using pwtest::ymd;

namespace {

struct Array {
    pwtest::SimDays data;
    std::map<std::string, CandidateSet> candidates;
    std::map<std::string, ForecastModel> forecasters;
    std::span<const DaySlice> test() const { return std::span<const DaySlice>(data.days).subspan(history); }
    std::size_t history = 0;
};

// Simulates `history` clean days followed by `test` days and trains on the former.
Array trained(const ArrayLayout& layout, Date first, int history, int test, const std::vector<FaultSpec>& faults,
              std::uint64_t seed, std::size_t n = 5, const std::vector<WeatherProfile>& profiles = {}) {
    Array a;
    SimOptions opts;
    opts.daily_profiles = profiles;
    a.data = pwtest::sim_days(layout, first, history + test, WeatherProfile::Sunny, faults, seed, opts);
    a.history = static_cast<std::size_t>(history);
    auto training = std::make_shared<const std::vector<DaySlice>>(a.data.days.begin(), a.data.days.begin() + history);
    CandidateOptions options;
    options.fit.trees = 20;
    options.seed = seed;
    options.fit.seed = seed;
    for (const auto& p : layout.panels) {
        a.candidates.emplace(p.id, build_candidates(layout, p.id, n, options, training));
        a.forecasters.emplace(p.id, fit_forecaster(p.id, *training, a.data.sim.weather, p.capacity_w));
    }
    return a;
}

std::vector<InputLabel> labels_for(const std::set<std::string>& noisy, const std::vector<std::string>& ids) {
    std::vector<InputLabel> out;
    for (const auto& id : ids) {
        out.push_back({id, ymd(2019, 1, 1), noisy.count(id) ? InputQuality::Noisy : InputQuality::Normal, 0.0});
    }
    return out;
}

CandidateSet abcd_set() {
    return build_candidates(layouts::abcd(), "A", 2, CandidateOptions{.strategy = CandidateStrategy::AllSubsets},
                            std::make_shared<const std::vector<DaySlice>>());
}

}  // namespace

TEST(Candidates, AllSubsetsOnFourPanels) {
    const auto set = abcd_set();
    EXPECT_EQ(set.subsets(), (std::vector<std::vector<std::string>>{{"B", "C"}, {"B", "D"}, {"C", "D"}}));
}

TEST(Candidates, TooFewPanels) {
    auto layout = layouts::abcd();
    layout.panels.pop_back();
    try {
        build_candidates(layout, "A", 3, {}, nullptr);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooFewPanels);
    }
}

TEST(Candidates, RandomSubsetsRepeatable) {
    const auto layout = layouts::four_plane_home();
    CandidateOptions o{.strategy = CandidateStrategy::RandomSubsets, .random_count = 5, .seed = 77};
    const auto a = build_candidates(layout, "P03", 4, o, nullptr);
    const auto b = build_candidates(layout, "P03", 4, o, nullptr);
    EXPECT_EQ(a.subsets(), b.subsets());
    EXPECT_EQ(a.size(), 5u);
    o.seed = 78;
    EXPECT_NE(build_candidates(layout, "P03", 4, o, nullptr).subsets(), a.subsets());
}

TEST(Candidates, SubsetsDistinctAndExcludeTarget) {
    const auto layout = layouts::four_plane_home();
    for (auto strategy : {CandidateStrategy::SamePlaneFirst, CandidateStrategy::AllSubsets, CandidateStrategy::RandomSubsets}) {
        for (const auto& target : layout.panel_ids()) {
            const auto set = build_candidates(layout, target, 5, CandidateOptions{.strategy = strategy}, nullptr);
            std::set<std::vector<std::string>> seen;
            for (auto s : set.subsets()) {
                EXPECT_EQ(s.size(), 5u);
                EXPECT_EQ(std::count(s.begin(), s.end(), target), 0);
                std::sort(s.begin(), s.end());
                EXPECT_TRUE(seen.insert(s).second);
            }
            EXPECT_LE(set.size(), 200u);
        }
    }
}

TEST(Candidates, SamePlaneFirstLeadsWithDefaultInputs) {
    const auto layout = layouts::four_plane_home();
    const auto set = build_candidates(layout, "P08", 3, {}, nullptr);
    EXPECT_EQ(set.subsets().front(), select_inputs(layout, "P08", 3));
    EXPECT_EQ(set.size(), 11u);
}

TEST(Candidates, AllSubsetsFallsBackToRandomAboveCap) {
    const auto layout = layouts::single_plane(12);
    const auto set = build_candidates(layout, "P01", 5, CandidateOptions{.strategy = CandidateStrategy::AllSubsets}, nullptr);
    EXPECT_EQ(set.size(), 200u);  // C(11,5) = 462
}

TEST(SelectModel, AbcdWorkedExample) {
    const auto set = abcd_set();
    const auto sel = select_model(set, labels_for({"A", "B"}, {"A", "B", "C", "D"}));
    EXPECT_EQ(set.subsets()[sel.index], (std::vector<std::string>{"C", "D"}));
    EXPECT_EQ(sel.noisy_inputs, 0u);
}

TEST(SelectModel, NoNoisyPicksFirst) {
    const auto set = abcd_set();
    EXPECT_EQ(select_model(set, labels_for({}, {"A", "B", "C", "D"})).index, 0u);
}

TEST(SelectModel, AllNoisyThrows) {
    const auto set = abcd_set();
    try {
        select_model(set, labels_for({"A", "B", "C", "D"}, {"A", "B", "C", "D"}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoCleanModel);
    }
}

TEST(SelectModel, ExhaustiveOverNoisyLabelings) {
    const std::vector<std::string> ids{"A", "B", "C", "D"};
    const auto set = abcd_set();
    for (unsigned mask = 0; mask < 16; ++mask) {
        std::set<std::string> noisy;
        for (unsigned b = 0; b < 4; ++b) {
            if (mask & (1u << b)) noisy.insert(ids[b]);
        }
        std::optional<std::size_t> first_clean;
        for (std::size_t i = 0; i < set.size() && !first_clean; ++i) {
            const auto& s = set.subsets()[i];
            if (std::none_of(s.begin(), s.end(), [&](const auto& id) { return noisy.count(id) > 0; })) first_clean = i;
        }
        const auto labels = labels_for(noisy, ids);
        if (first_clean) {
            const auto sel = select_model(set, labels);
            EXPECT_EQ(sel.index, *first_clean) << mask;
            for (const auto& id : set.subsets()[sel.index]) EXPECT_EQ(noisy.count(id), 0u) << mask;
        } else {
            EXPECT_THROW(select_model(set, labels), Error) << mask;
        }
        const auto fallback = fewest_noisy(set, labels);
        std::size_t best = 99;
        for (const auto& s : set.subsets()) {
            best = std::min<std::size_t>(best, std::count_if(s.begin(), s.end(), [&](const auto& id) { return noisy.count(id) > 0; }));
        }
        EXPECT_EQ(fallback.noisy_inputs, best) << mask;
    }
}

TEST(DetectDay, FaultFreeDaysStayUnflagged) {
    std::size_t quiet = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto a = trained(layouts::single_plane(8), ymd(2019, 6, 1), 4, 3, {}, seed);
        for (const auto& day : a.test()) {
            for (const auto& [id, set] : a.candidates) {
                const auto d = detect_day(id, day, SeasonalProfile::zero(), set.model(0));
                ++total;
                quiet += !d.report.flagged && d.report.daily_loss_ratio < 0.1;
            }
        }
    }
    EXPECT_GE(static_cast<double>(quiet) / static_cast<double>(total), 0.95);
}

TEST(DetectDay, OpenCircuitAllDay) {
    const Date date = ymd(2019, 6, 6);
    const auto a = trained(layouts::single_plane(8), ymd(2019, 6, 1), 4, 2, {{"P04", date, FaultKind::OpenCircuit, 1.0, {}, {}}}, 1);
    const auto d = detect_day("P04", a.data.days[5], SeasonalProfile::zero(), a.candidates.at("P04").model(0));
    EXPECT_TRUE(d.report.flagged);
    EXPECT_GE(d.report.daily_loss_ratio, 0.9);
    EXPECT_GT(d.report.persistence, 0.95);
    EXPECT_EQ(d.report.model_inputs, a.candidates.at("P04").subsets()[0]);
    EXPECT_FALSE(d.report.class_label.has_value());
}

TEST(DetectDay, BriefLightOcclusionNotFlagged) {
    const Date date = ymd(2019, 6, 6);
    const auto a = trained(layouts::single_plane(8), ymd(2019, 6, 1), 4, 2,
                           {{"P04", date, FaultKind::Occlusion, 0.1, 11h, 11h + 30min}}, 1);
    EXPECT_FALSE(detect_day("P04", a.data.days[5], SeasonalProfile::zero(), a.candidates.at("P04").model(0)).report.flagged);
}

TEST(DetectDay, FlagMonotoneInSeverity) {
    for (std::uint64_t seed : {3u, 4u}) {
        bool flagged_before = false;
        for (double sev : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const Date date = ymd(2019, 6, 6);
            const auto a = trained(layouts::single_plane(8), ymd(2019, 6, 1), 4, 2,
                                   {{"P02", date, FaultKind::Occlusion, sev, {}, {}}}, seed);
            const bool flagged =
                detect_day("P02", a.data.days[5], SeasonalProfile::zero(), a.candidates.at("P02").model(0)).report.flagged;
            if (flagged_before) EXPECT_TRUE(flagged) << seed << " " << sev;
            flagged_before = flagged;
        }
        EXPECT_TRUE(flagged_before);
    }
}

TEST(DetectDay, MissingInputPanelPropagates) {
    const auto a = trained(layouts::single_plane(4), ymd(2019, 6, 1), 4, 1, {}, 0, 2);
    const auto& day = a.data.days.back();
    const auto sub = pwtest::make_day({"P01", "P02"}, {day.matrix.column("P01"), day.matrix.column("P02")});
    EXPECT_THROW(detect_day("P01", sub, SeasonalProfile::zero(), a.candidates.at("P01").model(0)), Error);
}

TEST(DetectArray, WaterDropsNeverFlagged) {
    std::vector<FaultSpec> faults;
    const auto dates = consecutive_dates(ymd(2019, 6, 6), 4);
    faults.push_back({"P01", dates[0], FaultKind::WaterDrops, 0.15, {}, {}});
    faults.push_back({"P03", dates[1], FaultKind::WaterDrops, 0.15, 6h, 9h});
    faults.push_back({"P05", dates[2], FaultKind::WaterDrops, 0.1, {}, {}});
    faults.push_back({"P06", dates[3], FaultKind::WaterDrops, 0.15, 7h, 12h});
    for (std::uint64_t seed : {5u, 6u}) {
        auto a = trained(layouts::single_plane(8), ymd(2019, 6, 1), 5, 4, faults, seed);
        for (const auto& r : detect_array(a.data.sim.layout, a.candidates, a.forecasters, a.test(), a.data.sim.weather)) {
            EXPECT_FALSE(r.flagged) << r.panel_id << " " << format_date(r.date);
        }
    }
}

TEST(DetectArray, SingleFaultFlagsExactlyThatPanel) {
    const Date date = ymd(2019, 7, 7);
    auto a = trained(layouts::single_plane(10), ymd(2019, 7, 1), 5, 3, {{"P06", date, FaultKind::Occlusion, 0.7, {}, {}}}, 8);
    const auto reports = detect_array(a.data.sim.layout, a.candidates, a.forecasters, a.test(), a.data.sim.weather);
    EXPECT_EQ(reports.size(), 30u);
    for (const auto& r : reports) EXPECT_EQ(r.flagged, r.panel_id == "P06" && r.date == date) << r.panel_id;
}

TEST(DetectArray, ConcurrentFaultsAllFlagged) {
    const Date date = ymd(2019, 1, 9);
    const std::vector<FaultSpec> faults{{"P02", date, FaultKind::Snow, 1.0, {}, {}},
                                        {"P03", date, FaultKind::Occlusion, 0.7, {}, {}},
                                        {"P09", date, FaultKind::OpenCircuit, 1.0, {}, {}}};
    auto a = trained(layouts::single_plane(12), ymd(2019, 1, 1), 8, 1, faults, 2);
    ArrayDetector det(a.data.sim.layout, a.candidates, a.forecasters);
    const auto result = det.detect_date(a.data.days.back(), a.data.sim.weather);
    const std::set<std::string> faulty{"P02", "P03", "P09"};
    ASSERT_EQ(result.audits.size(), result.reports.size());
    for (std::size_t i = 0; i < result.reports.size(); ++i) {
        const auto& r = result.reports[i];
        EXPECT_EQ(r.flagged, faulty.count(r.panel_id) > 0) << r.panel_id;
        const auto& audit = result.audits[i];
        ASSERT_EQ(audit.target, r.panel_id);
        const bool touches = std::any_of(r.model_inputs.begin(), r.model_inputs.end(),
                                         [&](const auto& id) { return faulty.count(id) > 0; });
        if (audit.clean_candidate_exists) {
            EXPECT_FALSE(touches) << r.panel_id;
            EXPECT_FALSE(r.low_confidence) << r.panel_id;
        } else {
            EXPECT_TRUE(r.low_confidence) << r.panel_id;
        }
    }
}

TEST(DetectArray, FullSnowIsSystemWide) {
    const auto layout = layouts::single_plane(8);
    const Date date = ymd(2019, 1, 7);
    std::vector<FaultSpec> faults;
    for (const auto& id : layout.panel_ids()) faults.push_back({id, date, FaultKind::Snow, 1.0, {}, {}});
    auto a = trained(layout, ymd(2019, 1, 1), 6, 2, faults, 4);
    ArrayDetector det(a.data.sim.layout, a.candidates, a.forecasters);
    const auto snow = det.detect_date(a.data.days[6], a.data.sim.weather);
    EXPECT_TRUE(snow.system_wide);
    for (const auto& r : snow.reports) {
        EXPECT_TRUE(r.flagged);
        EXPECT_TRUE(r.system_wide);
    }
    const auto next = det.detect_date(a.data.days[7], a.data.sim.weather);
    EXPECT_FALSE(next.system_wide);
}

TEST(DetectArray, NoCleanModelFallsBackWithLowConfidence) {
    // every other panel of P01's only candidate pool is faulty, yet the array still produces
    const auto layout = layouts::abcd();
    const Date date = ymd(2019, 6, 7);
    const std::vector<FaultSpec> faults{{"B", date, FaultKind::OpenCircuit, 1.0, {}, {}},
                                        {"C", date, FaultKind::OpenCircuit, 1.0, {}, {}}};
    auto a = trained(layout, ymd(2019, 6, 1), 6, 1, faults, 3, 2);
    ArrayDetector det(a.data.sim.layout, a.candidates, a.forecasters);
    const auto result = det.detect_date(a.data.days.back(), a.data.sim.weather);
    EXPECT_FALSE(result.system_wide);
    for (const auto& r : result.reports) {
        if (r.panel_id == "A" || r.panel_id == "D") {
            EXPECT_TRUE(r.low_confidence) << r.panel_id;
            EXPECT_DOUBLE_EQ(r.confidence, 0.5);
            EXPECT_FALSE(r.warning.empty());
        }
    }
}

TEST(DetectArray, Deterministic) {
    const Date date = ymd(2019, 7, 7);
    auto a = trained(layouts::single_plane(6), ymd(2019, 7, 1), 5, 3, {{"P03", date, FaultKind::Snow, 1.0, {}, {}}}, 8, 3);
    auto b = trained(layouts::single_plane(6), ymd(2019, 7, 1), 5, 3, {{"P03", date, FaultKind::Snow, 1.0, {}, {}}}, 8, 3);
    const auto ra = detect_array(a.data.sim.layout, a.candidates, a.forecasters, a.test(), a.data.sim.weather);
    const auto rb = detect_array(b.data.sim.layout, b.candidates, b.forecasters, b.test(), b.data.sim.weather);
    ASSERT_EQ(ra.size(), rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
        EXPECT_EQ(ra[i].panel_id, rb[i].panel_id);
        EXPECT_EQ(ra[i].date, rb[i].date);
        EXPECT_EQ(ra[i].flagged, rb[i].flagged);
        EXPECT_EQ(ra[i].daily_loss_ratio, rb[i].daily_loss_ratio);
        EXPECT_EQ(ra[i].persistence, rb[i].persistence);
        EXPECT_EQ(ra[i].model_inputs, rb[i].model_inputs);
    }
}

TEST(DetectArray, RecurringShadeRemovedOnceHistoryBuilds) {
    const auto layout = layouts::single_plane(6);
    SimOptions opts;
    opts.shades = {ShadeSpec{"P01", 8h, 13h, 0.5}};
    const auto data = pwtest::sim_days(layout, ymd(2019, 6, 1), 16, WeatherProfile::Sunny, {}, 9, opts);
    auto training = std::make_shared<const std::vector<DaySlice>>(data.days.begin(), data.days.begin() + 4);
    CandidateOptions options;
    options.fit.trees = 20;
    std::map<std::string, CandidateSet> cands;
    std::map<std::string, ForecastModel> fcs;
    for (const auto& p : layout.panels) {
        cands.emplace(p.id, build_candidates(layout, p.id, 3, options, training));
        fcs.emplace(p.id, fit_forecaster(p.id, *training, data.sim.weather, p.capacity_w));
    }
    ArrayDetector det(data.sim.layout, cands, fcs);
    const auto results = det.run(std::span<const DaySlice>(data.days).subspan(4), data.sim.weather);
    for (std::size_t i = 7; i < results.size(); ++i) {
        for (const auto& r : results[i].reports) EXPECT_FALSE(r.flagged) << i << " " << r.panel_id;
    }
}
