#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "survstack/core.hpp"
#include "survstack/rng.hpp"

using namespace survstack;

TEST_CASE("count series validation") {
    CountSeries ok{"s", {0, 1, 2}, 0};
    CHECK_NOTHROW(validate(ok));
    CountSeries empty{"s", {}, 0};
    CHECK_THROWS_AS(validate(empty), std::invalid_argument);
    CountSeries negative{"s", {1, -1}, 0};
    CHECK_THROWS_AS(validate(negative), std::invalid_argument);
}

TEST_CASE("outbreak span validation enforces the peak rule") {
    CountSeries series{"s", {1, 1, 5, 9, 4, 1}, 0};
    OutbreakSpan span;
    span.start_week = 2;
    span.injected_cases = {4, 8, 3};
    span.size_param_k = 2.0;

    span.peak_week = 3; // week 3 holds the maximal total (9)
    CHECK_NOTHROW(validate(span, series));

    span.peak_week = 2;
    CHECK_THROWS_AS(validate(span, series), std::invalid_argument);

    // Tie on totals: earliest active week wins.
    CountSeries tied{"s", {1, 1, 9, 9, 4, 1}, 0};
    span.peak_week = 2;
    CHECK_NOTHROW(validate(span, tied));
    span.peak_week = 3;
    CHECK_THROWS_AS(validate(span, tied), std::invalid_argument);

    OutbreakSpan empty;
    empty.start_week = 0;
    empty.injected_cases = {0, 0};
    empty.peak_week = 0;
    CHECK_THROWS_AS(validate(empty, series), std::invalid_argument);
}

TEST_CASE("identical stream ids reproduce, distinct ids diverge") {
    RngStream a = derive_stream(1, {0, 0, "baseline"});
    RngStream b = derive_stream(1, {0, 0, "baseline"});
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    // Different series index, different seed, different purpose: within the
    // first 100 draws the streams must separate.
    const StreamId base{0, 0, "baseline"};
    for (const auto& [seed, id] : {std::pair<std::uint64_t, StreamId>{1, {0, 1, "baseline"}},
                                   {2, base},
                                   {1, {0, 0, "outbreak.0"}},
                                   {1, {1, 0, "baseline"}}}) {
        RngStream x = derive_stream(1, base);
        RngStream y = derive_stream(seed, id);
        bool differs = false;
        for (int i = 0; i < 100 && !differs; ++i) differs = x.next_u64() != y.next_u64();
        CHECK(differs);
    }
}

TEST_CASE("sampler moments are sane") {
    RngStream rng = derive_stream(99, {0, 0, "moments"});
    const int n = 200000;

    SUBCASE("poisson") {
        double sum = 0, sum2 = 0;
        const double lambda = 80.0; // exercises the additive-split path
        for (int i = 0; i < n; ++i) {
            const double x = static_cast<double>(rng.poisson(lambda));
            sum += x;
            sum2 += x * x;
        }
        const double mean = sum / n;
        const double var = sum2 / n - mean * mean;
        CHECK(mean == doctest::Approx(lambda).epsilon(0.01));
        CHECK(var == doctest::Approx(lambda).epsilon(0.05));
    }

    SUBCASE("negative binomial mean and dispersion") {
        double sum = 0, sum2 = 0;
        for (int i = 0; i < n; ++i) {
            const double x = static_cast<double>(rng.negative_binomial(5.0, 2.0));
            sum += x;
            sum2 += x * x;
        }
        const double mean = sum / n;
        const double var = sum2 / n - mean * mean;
        CHECK(mean == doctest::Approx(5.0).epsilon(0.02));
        CHECK(var / mean == doctest::Approx(2.0).epsilon(0.05));
    }

    SUBCASE("lognormal median") {
        int below_one = 0;
        for (int i = 0; i < n; ++i) {
            if (rng.lognormal(0.0, 0.5) < 1.0) ++below_one;
        }
        // Median of exp(N(0, s)) is 1.
        CHECK(static_cast<double>(below_one) / n == doctest::Approx(0.5).epsilon(0.02));
    }

    SUBCASE("uniform_int covers bounds") {
        std::set<std::int64_t> seen;
        for (int i = 0; i < 1000; ++i) seen.insert(rng.uniform_int(1, 10));
        CHECK(seen.size() == 10);
        CHECK(*seen.begin() == 1);
        CHECK(*seen.rbegin() == 10);
    }
}

TEST_CASE("bundle persistence round-trips exactly") {
    SeriesBundle bundle;
    bundle.test_case_id = 3;
    bundle.baseline_len = 20;
    bundle.eval_len = 10;
    BundleSeries entry;
    entry.series.series_id = "c3.s0";
    entry.series.counts.assign(30, 2);
    OutbreakSpan b0;
    b0.start_week = 5;
    b0.injected_cases = {1, 0, 4};
    b0.size_param_k = 2.5;
    for (std::size_t i = 0; i < b0.injected_cases.size(); ++i)
        entry.series.counts[5 + i] += b0.injected_cases[i];
    b0.peak_week = 7;
    entry.baseline_spans.push_back(b0);
    OutbreakSpan e0;
    e0.start_week = 22;
    e0.injected_cases = {6};
    e0.peak_week = 22;
    e0.size_param_k = 4.0;
    entry.series.counts[22] += 6;
    entry.eval_spans.push_back(e0);
    bundle.series.push_back(entry);
    // Second series, no overlap quirks.
    BundleSeries entry2 = entry;
    entry2.series.series_id = "c3.s1";
    bundle.series.push_back(entry2);
    validate(bundle);

    const auto dir = std::filesystem::temp_directory_path() / "survstack_core_test";
    std::filesystem::create_directories(dir);
    write_bundle(bundle, dir / "bundle.csv", dir / "bundle.spans.json");
    const SeriesBundle back = read_bundle(dir / "bundle.csv", dir / "bundle.spans.json");

    REQUIRE(back.series.size() == bundle.series.size());
    CHECK(back.test_case_id == bundle.test_case_id);
    CHECK(back.baseline_len == bundle.baseline_len);
    CHECK(back.eval_len == bundle.eval_len);
    for (std::size_t s = 0; s < bundle.series.size(); ++s) {
        CHECK(back.series[s].series.series_id == bundle.series[s].series.series_id);
        CHECK(back.series[s].series.counts == bundle.series[s].series.counts);
        REQUIRE(back.series[s].baseline_spans.size() == bundle.series[s].baseline_spans.size());
        for (std::size_t j = 0; j < bundle.series[s].baseline_spans.size(); ++j) {
            const auto& x = bundle.series[s].baseline_spans[j];
            const auto& y = back.series[s].baseline_spans[j];
            CHECK(x.start_week == y.start_week);
            CHECK(x.peak_week == y.peak_week);
            CHECK(x.size_param_k == y.size_param_k);
            CHECK(x.injected_cases == y.injected_cases);
        }
    }
}

TEST_CASE("parallel_for covers the range and propagates errors") {
    std::vector<int> hits(100, 0);
    parallel_for(100, 4, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](int i) {
                                     if (i == 7) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}
