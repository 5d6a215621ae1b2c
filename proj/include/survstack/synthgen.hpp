// synthgen.hpp -- synthetic weekly-count benchmark generation.
//
// A test case is a log-linear baseline model (intercept, optional trend,
// annual and biannual harmonics) with negative-binomial dispersion, plus
// an outbreak-size mode. Each generated series spans 624 weeks: weeks
// 0..574 are baseline data carrying four injected outbreaks, weeks
// 575..623 are evaluation data carrying exactly one.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "survstack/core.hpp"
#include "survstack/rng.hpp"

namespace survstack {

inline constexpr int kTotalWeeks = 624;
inline constexpr int kBaselineLen = 575;
inline constexpr int kEvalLen = 49;
inline constexpr int kBaselineOutbreaks = 4;
inline constexpr int kBaselineStartMin = 56;
inline constexpr int kBaselineStartMax = 570;
inline constexpr int kEvalStartMin = 575;
inline constexpr int kEvalStartMax = 620;
inline constexpr int kMaxGenerationAttempts = 1000;

struct TestCaseSpec {
    int id = 0;
    bool trend = false;    // T
    bool seasonal = false; // S1, annual
    bool biannual = false; // S2, semi-annual
    double intercept = 0.0;                        // theta
    double trend_coeff = 0.0;                      // beta, per week
    std::array<double, 4> seasonal_amp = {0, 0, 0, 0}; // cos/sin annual, cos/sin biannual
    double dispersion = 1.0;                       // phi >= 1, variance = phi * mean
    std::optional<int> fixed_k;                    // nullopt: k uniform on {1..10} per outbreak
};

void validate(const TestCaseSpec& spec);

// The 42-case default grid: 6 structural (trend, seasonal, biannual)
// combinations x 7 parameter variants, ids 0..41.
std::vector<TestCaseSpec> default_grid();

// JSON persistence for editable grids; schema in the repo README.
std::vector<TestCaseSpec> load_grid(const std::filesystem::path& path);
void write_grid(const std::vector<TestCaseSpec>& grid, const std::filesystem::path& path);

// Canonical subset label, e.g. "T-S1-nS2" for trend + annual seasonality.
std::string subset_label(const TestCaseSpec& spec);

// exp(theta + beta t + g1 cos(2 pi t / 52) + g2 sin(2 pi t / 52)
//              + g3 cos(4 pi t / 52) + g4 sin(4 pi t / 52))
double baseline_mean(const TestCaseSpec& spec, int week);

// Theoretical baseline standard deviation sqrt(phi * mean) at a week.
double baseline_stddev(const TestCaseSpec& spec, int week);

// Independent draws, count_t ~ NB(mean = mu_b(t), var = phi mu_b(t)).
CountSeries sample_baseline(const TestCaseSpec& spec, RngStream& rng, int n_weeks = kTotalWeeks);

// Adds one outbreak in place: total cases N ~ Poisson(k * sigma_b(start)),
// each case delayed by floor(LogNormal(0, 0.5)) weeks from start. Cases
// past max_week are dropped; the draw repeats until at least one case
// lands. Returns the span (per-week injected cases, peak week).
OutbreakSpan inject_outbreak(std::vector<std::int64_t>& counts, const TestCaseSpec& spec,
                             int start_week, double k, int max_week, RngStream& rng);

// Full bundle for one test case: n_series series, four baseline outbreaks
// with disjoint active weeks (starts uniform on [56, 570], clipped to the
// baseline window) and one evaluation outbreak (start uniform on
// [575, 620], clipped to week 623). Deterministic in (spec, seed).
SeriesBundle generate_bundle(const TestCaseSpec& spec, int n_series, std::uint64_t seed);

} // namespace survstack
