#include "survstack/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace survstack {

using nlohmann::json;

void validate(const TestCaseSpec& spec) {
    if (spec.dispersion < 1.0) throw std::invalid_argument("TestCaseSpec: dispersion must be >= 1");
    if (!spec.trend && spec.trend_coeff != 0.0)
        throw std::invalid_argument("TestCaseSpec: trend coefficient without trend flag");
    if (!spec.seasonal && (spec.seasonal_amp[0] != 0.0 || spec.seasonal_amp[1] != 0.0))
        throw std::invalid_argument("TestCaseSpec: annual amplitude without seasonal flag");
    if (!spec.biannual && (spec.seasonal_amp[2] != 0.0 || spec.seasonal_amp[3] != 0.0))
        throw std::invalid_argument("TestCaseSpec: biannual amplitude without biannual flag");
    if (spec.fixed_k && *spec.fixed_k < 1)
        throw std::invalid_argument("TestCaseSpec: fixed k must be >= 1");
}

std::vector<TestCaseSpec> default_grid() {
    // Seven parameter variants applied to each structural combination:
    // intercept level, dispersion, harmonic amplitude, trend growth factor
    // over the 624 weeks.
    struct Variant {
        double theta;
        double phi;
        double amp;
        double growth;
    };
    const Variant variants[7] = {
        {std::log(2.0), 1.0, 0.4, 1.5},  {std::log(5.0), 1.0, 0.4, 2.0},
        {std::log(10.0), 1.0, 0.6, 2.0}, {std::log(2.0), 2.0, 0.6, 3.0},
        {std::log(5.0), 2.0, 0.8, 1.5},  {std::log(10.0), 2.0, 0.8, 3.0},
        {std::log(5.0), 1.0, 1.0, 2.0},
    };
    const bool combos[6][3] = {
        {false, false, false}, {false, true, false}, {false, true, true},
        {true, false, false},  {true, true, false},  {true, true, true},
    };
    std::vector<TestCaseSpec> grid;
    grid.reserve(42);
    for (int c = 0; c < 6; ++c) {
        for (int v = 0; v < 7; ++v) {
            const Variant& var = variants[v];
            TestCaseSpec spec;
            spec.id = c * 7 + v;
            spec.trend = combos[c][0];
            spec.seasonal = combos[c][1];
            spec.biannual = combos[c][2];
            spec.intercept = var.theta;
            spec.dispersion = var.phi;
            if (spec.trend) spec.trend_coeff = std::log(var.growth) / (kTotalWeeks - 1);
            if (spec.seasonal) {
                spec.seasonal_amp[0] = var.amp;
                spec.seasonal_amp[1] = var.amp / 2.0;
            }
            if (spec.biannual) {
                spec.seasonal_amp[2] = var.amp / 2.0;
                spec.seasonal_amp[3] = var.amp / 4.0;
            }
            validate(spec);
            grid.push_back(spec);
        }
    }
    return grid;
}

std::vector<TestCaseSpec> load_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open grid file " + path.string());
    json j = json::parse(in);
    std::vector<TestCaseSpec> grid;
    for (const auto& tc : j.at("test_cases")) {
        TestCaseSpec spec;
        spec.id = tc.at("id").get<int>();
        spec.trend = tc.at("trend").get<bool>();
        spec.seasonal = tc.at("seasonal").get<bool>();
        spec.biannual = tc.at("biannual").get<bool>();
        spec.intercept = tc.at("intercept").get<double>();
        spec.trend_coeff = tc.value("trend_coeff", 0.0);
        if (tc.contains("seasonal_amplitudes")) {
            const auto amps = tc.at("seasonal_amplitudes").get<std::vector<double>>();
            if (amps.size() != 4)
                throw std::runtime_error("grid file: seasonal_amplitudes needs 4 entries");
            std::copy(amps.begin(), amps.end(), spec.seasonal_amp.begin());
        }
        spec.dispersion = tc.at("dispersion").get<double>();
        if (tc.contains("k") && !tc.at("k").is_null()) spec.fixed_k = tc.at("k").get<int>();
        validate(spec);
        grid.push_back(spec);
    }
    return grid;
}

void write_grid(const std::vector<TestCaseSpec>& grid, const std::filesystem::path& path) {
    json cases = json::array();
    for (const auto& spec : grid) {
        json tc{{"id", spec.id},
                {"trend", spec.trend},
                {"seasonal", spec.seasonal},
                {"biannual", spec.biannual},
                {"intercept", spec.intercept},
                {"trend_coeff", spec.trend_coeff},
                {"seasonal_amplitudes", spec.seasonal_amp},
                {"dispersion", spec.dispersion}};
        if (spec.fixed_k) tc["k"] = *spec.fixed_k;
        cases.push_back(tc);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open grid file " + path.string());
    out << json{{"test_cases", cases}}.dump(2) << '\n';
}

std::string subset_label(const TestCaseSpec& spec) {
    std::string label;
    label += spec.trend ? "T" : "nT";
    label += spec.seasonal ? "-S1" : "-nS1";
    label += spec.biannual ? "-S2" : "-nS2";
    return label;
}

double baseline_mean(const TestCaseSpec& spec, int week) {
    const double t = static_cast<double>(week);
    const double annual = 2.0 * std::numbers::pi * t / 52.0;
    double log_mu = spec.intercept + spec.trend_coeff * t;
    log_mu += spec.seasonal_amp[0] * std::cos(annual) + spec.seasonal_amp[1] * std::sin(annual);
    log_mu += spec.seasonal_amp[2] * std::cos(2.0 * annual) +
              spec.seasonal_amp[3] * std::sin(2.0 * annual);
    return std::exp(log_mu);
}

double baseline_stddev(const TestCaseSpec& spec, int week) {
    return std::sqrt(spec.dispersion * baseline_mean(spec, week));
}

CountSeries sample_baseline(const TestCaseSpec& spec, RngStream& rng, int n_weeks) {
    CountSeries series;
    series.counts.reserve(static_cast<std::size_t>(n_weeks));
    for (int t = 0; t < n_weeks; ++t) {
        series.counts.push_back(rng.negative_binomial(baseline_mean(spec, t), spec.dispersion));
    }
    return series;
}

OutbreakSpan inject_outbreak(std::vector<std::int64_t>& counts, const TestCaseSpec& spec,
                             int start_week, double k, int max_week, RngStream& rng) {
    if (start_week < 0 || start_week >= static_cast<int>(counts.size()))
        throw std::invalid_argument("inject_outbreak: start week outside series");
    max_week = std::min(max_week, static_cast<int>(counts.size()) - 1);
    if (max_week < start_week) throw std::invalid_argument("inject_outbreak: empty target window");
    const double lambda = k * baseline_stddev(spec, start_week);

    std::vector<std::int64_t> injected;
    for (int attempt = 0;; ++attempt) {
        if (attempt >= kMaxGenerationAttempts)
            throw std::runtime_error("inject_outbreak: no cases landed inside the series");
        const std::int64_t total = rng.poisson(lambda);
        if (total < 1) continue;
        injected.assign(static_cast<std::size_t>(max_week - start_week + 1), 0);
        bool any = false;
        for (std::int64_t i = 0; i < total; ++i) {
            const double delay = rng.lognormal(0.0, 0.5);
            const int week = start_week + static_cast<int>(std::floor(delay));
            if (week > max_week) continue; // dropped
            ++injected[static_cast<std::size_t>(week - start_week)];
            any = true;
        }
        if (any) break;
    }
    while (!injected.empty() && injected.back() == 0) injected.pop_back();

    OutbreakSpan span;
    span.start_week = start_week;
    span.size_param_k = k;
    span.injected_cases = injected;
    for (std::size_t i = 0; i < injected.size(); ++i) {
        counts[static_cast<std::size_t>(start_week) + i] += injected[i];
    }
    // Peak: earliest active week with the maximal total count.
    std::int64_t best = -1;
    for (std::size_t i = 0; i < injected.size(); ++i) {
        if (injected[i] == 0) continue;
        const std::int64_t total = counts[static_cast<std::size_t>(start_week) + i];
        if (total > best) {
            best = total;
            span.peak_week = start_week + static_cast<int>(i);
        }
    }
    return span;
}

namespace {

double draw_k(const TestCaseSpec& spec, RngStream& rng) {
    if (spec.fixed_k) return static_cast<double>(*spec.fixed_k);
    return static_cast<double>(rng.uniform_int(1, 10));
}

bool overlaps(const OutbreakSpan& span, const std::vector<OutbreakSpan>& accepted) {
    for (const auto& other : accepted) {
        const int lo = std::max(span.start_week, other.start_week);
        const int hi = std::min(span.end_week(), other.end_week());
        for (int w = lo; w <= hi; ++w) {
            if (span.active(w) && other.active(w)) return true;
        }
    }
    return false;
}

} // namespace

SeriesBundle generate_bundle(const TestCaseSpec& spec, int n_series, std::uint64_t seed) {
    validate(spec);
    SeriesBundle bundle;
    bundle.test_case_id = spec.id;
    bundle.baseline_len = kBaselineLen;
    bundle.eval_len = kEvalLen;
    bundle.series.reserve(static_cast<std::size_t>(n_series));

    for (int s = 0; s < n_series; ++s) {
        BundleSeries entry;
        RngStream baseline_rng = derive_stream(seed, {spec.id, s, "baseline"});
        entry.series = sample_baseline(spec, baseline_rng, kTotalWeeks);
        entry.series.series_id = "c" + std::to_string(spec.id) + ".s" + std::to_string(s);

        for (int j = 0; j < kBaselineOutbreaks; ++j) {
            RngStream rng = derive_stream(seed, {spec.id, s, "outbreak." + std::to_string(j)});
            const double k = draw_k(spec, rng);
            bool placed = false;
            for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
                const int start =
                    static_cast<int>(rng.uniform_int(kBaselineStartMin, kBaselineStartMax));
                std::vector<std::int64_t> scratch = entry.series.counts;
                OutbreakSpan span = inject_outbreak(scratch, spec, start, k, kBaselineLen - 1, rng);
                if (overlaps(span, entry.baseline_spans)) continue;
                entry.series.counts = std::move(scratch);
                entry.baseline_spans.push_back(std::move(span));
                placed = true;
                break;
            }
            if (!placed)
                throw std::runtime_error("generate_bundle: could not place disjoint outbreaks");
        }
        std::sort(entry.baseline_spans.begin(), entry.baseline_spans.end(),
                  [](const auto& a, const auto& b) { return a.start_week < b.start_week; });

        RngStream eval_rng = derive_stream(seed, {spec.id, s, "outbreak.eval"});
        const double k = draw_k(spec, eval_rng);
        const int start = static_cast<int>(eval_rng.uniform_int(kEvalStartMin, kEvalStartMax));
        entry.eval_spans.push_back(
            inject_outbreak(entry.series.counts, spec, start, k, kTotalWeeks - 1, eval_rng));

        bundle.series.push_back(std::move(entry));
    }
    validate(bundle);
    return bundle;
}

} // namespace survstack
