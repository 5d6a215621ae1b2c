#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fixtures.hpp"
#include "survstack/stacking.hpp"
#include "survstack/synthgen.hpp"

using namespace survstack;

namespace {

const std::array<Detector, 2> kRkiBayes = {Detector::RKI, Detector::Bayes};

CountSeries replay_series() {
    return CountSeries{"replay", fixtures::replay_series_counts(), 0};
}

OutbreakSpan replay_span() {
    // Active weeks 37..42 with the counts from the fixture; the peak is the
    // week with the largest total (week 39, count 9).
    OutbreakSpan span;
    span.start_week = fixtures::kReplayOutbreakStart;
    span.injected_cases = {3, 3, 8, 7, 2, 1};
    span.peak_week = 39;
    span.size_param_k = 3.0;
    return span;
}

} // namespace

TEST_CASE("fusion notation round-trips") {
    for (const char* text : {"P(mu,O3,1)", "S(!mu,O0,0)", "P(!mu,O2,12)", "S(mu,O1,4)"}) {
        const FusionConfig config = FusionConfig::parse(text);
        CHECK(config.name() == text);
    }
    CHECK(FusionConfig::parse("P(mu,O3,1)").mode == FusionMode::PValues);
    CHECK(FusionConfig::parse("S(mu,O3,1)").mode == FusionMode::Alarms);
    CHECK(FusionConfig::parse("S(mu,O3,1)").alpha == 0.005);
    CHECK_THROWS_AS(FusionConfig::parse("Q(mu,O0,0)"), std::invalid_argument);
    CHECK_THROWS_AS(FusionConfig::parse("P(mu,O9,0)"), std::invalid_argument);
    CHECK_THROWS_AS(FusionConfig::parse("P(mu,O0,-1)"), std::invalid_argument);
    CHECK_THROWS_AS(FusionConfig::parse("P(mu,O0)"), std::invalid_argument);
}

TEST_CASE("labelings on the worked example") {
    const CountSeries series = replay_series();
    const std::vector<OutbreakSpan> spans = {replay_span()};

    const auto o0 = label_outbreaks(series, spans, Labeling::O0);
    for (int w = 30; w < 44; ++w) {
        CHECK(static_cast<bool>(o0[static_cast<std::size_t>(w)]) == (w >= 37 && w <= 42));
    }

    // Counts on 36..42 are 1,4,4,9,8,3,2: strictly increasing inside O1 at
    // weeks 37 (4>1) and 39 (9>4); week 38 repeats 4.
    const auto o1 = label_outbreaks(series, spans, Labeling::O1);
    const auto o2 = label_outbreaks(series, spans, Labeling::O2);
    const auto o3 = label_outbreaks(series, spans, Labeling::O3);
    for (int w = 30; w < 44; ++w) {
        CHECK(static_cast<bool>(o1[static_cast<std::size_t>(w)]) == (w >= 37 && w <= 39));
        CHECK(static_cast<bool>(o2[static_cast<std::size_t>(w)]) == (w == 37 || w == 39));
        CHECK(static_cast<bool>(o3[static_cast<std::size_t>(w)]) == (w == 39));
    }
}

TEST_CASE("labeling definitions on a hand case") {
    // Active weeks 10..15, counts 1,2,5,9,4,2 with c9 = 1.
    std::vector<std::int64_t> counts(20, 1);
    counts[10] = 1;
    counts[11] = 2;
    counts[12] = 5;
    counts[13] = 9;
    counts[14] = 4;
    counts[15] = 2;
    CountSeries series{"hand", counts, 0};
    OutbreakSpan span;
    span.start_week = 10;
    span.injected_cases = {1, 2, 5, 9, 4, 2};
    span.peak_week = 13;
    span.size_param_k = 1.0;
    const std::vector<OutbreakSpan> spans = {span};

    const auto o1 = label_outbreaks(series, spans, Labeling::O1);
    const auto o2 = label_outbreaks(series, spans, Labeling::O2);
    const auto o3 = label_outbreaks(series, spans, Labeling::O3);
    std::vector<int> o1_weeks, o2_weeks, o3_weeks;
    for (int w = 0; w < 20; ++w) {
        if (o1[static_cast<std::size_t>(w)]) o1_weeks.push_back(w);
        if (o2[static_cast<std::size_t>(w)]) o2_weeks.push_back(w);
        if (o3[static_cast<std::size_t>(w)]) o3_weeks.push_back(w);
    }
    CHECK(o1_weeks == std::vector<int>{10, 11, 12, 13});
    CHECK(o2_weeks == std::vector<int>{11, 12, 13});
    CHECK(o3_weeks == std::vector<int>{13});

    // Single-week outbreak: O0 = O1 = O3; O2 only when the count rises.
    OutbreakSpan single;
    single.start_week = 17;
    single.injected_cases = {4};
    single.peak_week = 17;
    counts[17] += 4;
    CountSeries bumped{"hand2", counts, 0};
    const std::vector<OutbreakSpan> singles = {single};
    const auto s0 = label_outbreaks(bumped, singles, Labeling::O0);
    const auto s1 = label_outbreaks(bumped, singles, Labeling::O1);
    const auto s2 = label_outbreaks(bumped, singles, Labeling::O2);
    const auto s3 = label_outbreaks(bumped, singles, Labeling::O3);
    CHECK(s0[17] == 1);
    CHECK(s1[17] == 1);
    CHECK(s3[17] == 1);
    CHECK(s2[17] == (counts[17] > counts[16] ? 1 : 0));
}

TEST_CASE("worked-example feature row") {
    const CountSeries series = replay_series();
    const PValueMatrix pvalues =
        run_detectors(series, std::span<const Detector>(kRkiBayes), fixtures::kReplayWindow);
    FusionConfig config;
    config.mode = FusionMode::PValues;
    config.include_mean = true;
    config.mean_window = 4;
    config.window = 1;
    const StackDataset dataset = build_features(pvalues, series, config);

    REQUIRE(dataset.columns.size() == 5);
    CHECK(dataset.columns[0] == "mean");
    CHECK(dataset.columns[1] == "RKI_lag1");
    CHECK(dataset.columns[2] == "Bayes_lag1");
    CHECK(dataset.columns[3] == "RKI_lag0");
    CHECK(dataset.columns[4] == "Bayes_lag0");

    const std::size_t row = 39; // week 39
    CHECK(dataset.features[0][row] == doctest::Approx(2.25));
    CHECK(std::round(dataset.features[1][row] * 100) / 100 == doctest::Approx(0.14));
    CHECK(std::round(dataset.features[2][row] * 100) / 100 == doctest::Approx(0.10));
    CHECK(std::round(dataset.features[3][row] * 100) / 100 == doctest::Approx(0.00));
    CHECK(std::round(dataset.features[4][row] * 100) / 100 == doctest::Approx(0.00));
}

TEST_CASE("feature building: shapes, imputation, alarm mode") {
    std::vector<std::int64_t> counts(30, 2);
    counts[20] = 9;
    const CountSeries series{"s", counts, 0};
    const PValueMatrix pvalues =
        run_detectors(series, std::span<const Detector>(kAllDetectors), 7);

    FusionConfig bare;
    bare.mode = FusionMode::PValues;
    const StackDataset plain = build_features(pvalues, series, bare);
    CHECK(plain.columns.size() == kAllDetectors.size()); // w=0, no mean
    CHECK(plain.n_rows() == 30);                         // every week yields a row

    // Undefined cells impute 1.0 in P mode.
    for (std::size_t c = 0; c < plain.columns.size(); ++c) {
        CHECK(plain.features[c][0] == 1.0);
    }

    FusionConfig alarms;
    alarms.mode = FusionMode::Alarms;
    alarms.alpha = 0.005;
    alarms.window = 1;
    const StackDataset s_mode = build_features(pvalues, series, alarms);
    CHECK(s_mode.columns.size() == 2 * kAllDetectors.size());
    for (std::size_t c = 0; c < s_mode.columns.size(); ++c) {
        CHECK(s_mode.features[c][0] == 0.0); // undefined -> no alarm
        for (std::size_t r = 0; r < s_mode.n_rows(); ++r) {
            const double v = s_mode.features[c][r];
            CHECK((v == 0.0 || v == 1.0));
        }
    }

    // Mode S features equal thresholded mode P features cell-wise.
    FusionConfig p_with_lag = bare;
    p_with_lag.window = 1;
    const StackDataset p_mode = build_features(pvalues, series, p_with_lag);
    for (std::size_t c = 0; c < s_mode.columns.size(); ++c) {
        for (std::size_t r = 0; r < s_mode.n_rows(); ++r) {
            // Imputed cells differ by design (1.0 vs 0); compare the rest.
            const int week = static_cast<int>(r);
            const int lag = c < kAllDetectors.size() ? 1 : 0;
            const std::size_t d = c % kAllDetectors.size();
            if (week - lag < 0 ||
                !pvalues.defined(week - lag, static_cast<int>(d)))
                continue;
            CHECK(s_mode.features[c][r] == (p_mode.features[c][r] <= 0.005 ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("alarm threshold is inclusive") {
    PValueMatrix pvalues({Detector::C1}, 9);
    std::vector<std::int64_t> counts(9, 1);
    for (int t = 7; t < 9; ++t) pvalues.set(t, 0, 0.0);
    pvalues.set(7, 0, 0.005);
    pvalues.set(8, 0, 0.0050000001);
    FusionConfig alarms;
    alarms.mode = FusionMode::Alarms;
    const StackDataset dataset =
        build_features(pvalues, CountSeries{"s", counts, 0}, alarms);
    CHECK(dataset.features[0][7] == 1.0); // p == alpha alarms
    CHECK(dataset.features[0][8] == 0.0);
}

TEST_CASE("assemble splits and labels a bundle") {
    TestCaseSpec spec = default_grid()[1];
    const SeriesBundle bundle = generate_bundle(spec, 4, 2024);
    FusionConfig config;
    config.mode = FusionMode::PValues;
    config.include_mean = true;
    config.labeling = Labeling::O3;
    config.window = 1;
    auto [train, eval] = assemble(bundle, std::span<const Detector>(kAllDetectors), config);

    CHECK(train.n_rows() == 4 * 575);
    CHECK(eval.n_rows() == 4 * 49);
    std::size_t train_pos = 0;
    for (auto t : train.targets) train_pos += t;
    CHECK(train_pos == 4 * 4); // one peak per baseline span

    // Eval rows are labeled with the full active period.
    std::size_t eval_pos = 0;
    for (auto t : eval.targets) eval_pos += t;
    std::size_t active = 0;
    for (const auto& entry : bundle.series) {
        for (const auto& span : entry.eval_spans) {
            for (int w = span.start_week; w <= span.end_week(); ++w)
                if (span.active(w)) ++active;
        }
    }
    CHECK(eval_pos == active);

    // Labeling inclusion chain per bundle: O3 <= O2 <= O1 <= O0 positives.
    std::size_t pos[4] = {0, 0, 0, 0};
    for (int o = 0; o < 4; ++o) {
        FusionConfig c = config;
        c.labeling = static_cast<Labeling>(o);
        auto [tr, ev] = assemble(bundle, std::span<const Detector>(kAllDetectors), c);
        for (auto t : tr.targets) pos[o] += t;
        CHECK(tr.n_rows() == train.n_rows()); // row count independent of config
    }
    CHECK(pos[3] <= pos[2]);
    CHECK(pos[2] <= pos[1]);
    CHECK(pos[1] <= pos[0]);
}

TEST_CASE("re-assembly is bit-identical") {
    TestCaseSpec spec = default_grid()[20];
    const SeriesBundle bundle = generate_bundle(spec, 3, 77);
    FusionConfig config;
    config.include_mean = true;
    config.window = 2;
    config.labeling = Labeling::O1;
    auto [t1, e1] = assemble(bundle, std::span<const Detector>(kAllDetectors), config);
    auto [t2, e2] = assemble(bundle, std::span<const Detector>(kAllDetectors), config);
    CHECK(t1.columns == t2.columns);
    CHECK(t1.targets == t2.targets);
    CHECK(t1.features == t2.features);
    CHECK(e1.features == e2.features);
}

TEST_CASE("dataset persistence round-trips") {
    TestCaseSpec spec = default_grid()[0];
    const SeriesBundle bundle = generate_bundle(spec, 2, 5);
    FusionConfig config;
    config.include_mean = true;
    auto [train, eval] = assemble(bundle, std::span<const Detector>(kAllDetectors), config);

    const auto dir = std::filesystem::temp_directory_path() / "survstack_stacking_test";
    std::filesystem::create_directories(dir);
    write_dataset(train, dir / "train.csv", dir / "train.rows.csv");
    const StackDataset back = read_dataset(dir / "train.csv", dir / "train.rows.csv");
    CHECK(back.columns == train.columns);
    CHECK(back.targets == train.targets);
    REQUIRE(back.n_rows() == train.n_rows());
    for (std::size_t c = 0; c < train.features.size(); ++c) {
        for (std::size_t r = 0; r < train.n_rows(); ++r) {
            CHECK(back.features[c][r] == train.features[c][r]);
        }
    }
    for (std::size_t r = 0; r < train.n_rows(); ++r) {
        CHECK(back.rows[r].series == train.rows[r].series);
        CHECK(back.rows[r].week == train.rows[r].week);
    }
}
