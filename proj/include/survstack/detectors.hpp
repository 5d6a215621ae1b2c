// detectors.hpp -- sliding-window surveillance detectors.
//
// Each detector fits a null distribution to the m counts preceding week t
// and returns the one-tailed p-value P(X >= c_t): the probability, under
// the fitted null, of seeing the current count or anything higher. Small
// values flag unusually high counts.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "survstack/core.hpp"

namespace survstack {

enum class Detector { C1, C2, C3, Bayes, RKI };

inline constexpr std::array<Detector, 5> kAllDetectors = {
    Detector::C1, Detector::C2, Detector::C3, Detector::Bayes, Detector::RKI};

std::string_view to_string(Detector d);
Detector detector_from_string(std::string_view name);

// Earliest week index with enough history for the detector.
int min_history(Detector d, int m);

// The window variance divisor. Population (divisor m) follows the defining
// formulas; Sample (divisor m-1) matches common reference implementations.
enum class VarianceDivisor { Population, Sample };

struct WindowStats {
    double mu = 0.0;
    double sigma2 = 0.0;
    int m = 0;
};

// Mean and variance of counts[t-m .. t-1]. Requires t >= m and t within
// the series; throws std::out_of_range otherwise.
WindowStats window_stats(const CountSeries& series, int t, int m = 7,
                         VarianceDivisor divisor = VarianceDivisor::Population);

// P(X >= x) for X ~ N(mu, sigma2). sigma2 == 0 degenerates to a point
// mass: 1 if x <= mu, else 0. Throws std::domain_error for sigma2 < 0.
double gaussian_upper_tail(double x, double mu, double sigma2);

// P(X >= c) for X ~ Poisson(lambda), inclusive. Throws for lambda <= 0.
double poisson_upper_tail(std::int64_t c, double lambda);

// P(X >= c) for X ~ NB(size, prob) with pmf
//   Gamma(k+size) / (Gamma(size) k!) * prob^size * (1-prob)^k,
// mean size*(1-prob)/prob. Throws for size <= 0 or prob outside (0,1).
double negbin_upper_tail(std::int64_t c, double size, double prob);

double c1_pvalue(const CountSeries& series, int t, int m = 7,
                 VarianceDivisor divisor = VarianceDivisor::Population);
double c2_pvalue(const CountSeries& series, int t, int m = 7,
                 VarianceDivisor divisor = VarianceDivisor::Population);
double c3_pvalue(const CountSeries& series, int t, int m = 7,
                 VarianceDivisor divisor = VarianceDivisor::Population);
double bayes_pvalue(const CountSeries& series, int t, int m = 7,
                    VarianceDivisor divisor = VarianceDivisor::Population);
double rki_pvalue(const CountSeries& series, int t, int m = 7,
                  VarianceDivisor divisor = VarianceDivisor::Population);

double detector_pvalue(Detector d, const CountSeries& series, int t, int m = 7,
                       VarianceDivisor divisor = VarianceDivisor::Population);

// Per-week, per-detector p-values with a defined mask. Cell (t, d) is
// defined iff t >= min_history(d, m).
class PValueMatrix {
public:
    PValueMatrix() = default;
    PValueMatrix(std::vector<Detector> detectors, int n_weeks);

    int weeks() const { return n_weeks_; }
    const std::vector<Detector>& detectors() const { return detectors_; }
    int detector_index(Detector d) const; // -1 when absent

    bool defined(int week, int detector) const;
    double value(int week, int detector) const; // throws if undefined
    void set(int week, int detector, double p);

private:
    std::vector<Detector> detectors_;
    int n_weeks_ = 0;
    std::vector<double> values_;
    std::vector<std::uint8_t> defined_;
};

PValueMatrix run_detectors(const CountSeries& series,
                           std::span<const Detector> detectors, int m = 7,
                           VarianceDivisor divisor = VarianceDivisor::Population);

// CSV columns: test_case,series,week,detector,p_value,defined. Undefined
// cells are written with an empty p_value field.
void write_pvalues(const std::vector<PValueMatrix>& per_series, int test_case_id,
                   const std::filesystem::path& csv_path);

std::vector<PValueMatrix> read_pvalues(const std::filesystem::path& csv_path,
                                       int expected_test_case);

} // namespace survstack
