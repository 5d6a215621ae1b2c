#include "survstack/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace survstack {

std::string_view to_string(Detector d) {
    switch (d) {
        case Detector::C1: return "C1";
        case Detector::C2: return "C2";
        case Detector::C3: return "C3";
        case Detector::Bayes: return "Bayes";
        case Detector::RKI: return "RKI";
    }
    throw std::invalid_argument("unknown detector");
}

Detector detector_from_string(std::string_view name) {
    for (Detector d : kAllDetectors) {
        if (to_string(d) == name) return d;
    }
    throw std::invalid_argument("unknown detector name: " + std::string(name));
}

int min_history(Detector d, int m) {
    switch (d) {
        case Detector::C1:
        case Detector::Bayes:
        case Detector::RKI: return m;
        case Detector::C2: return m + 2;
        case Detector::C3: return m + 4;
    }
    throw std::invalid_argument("unknown detector");
}

WindowStats window_stats(const CountSeries& series, int t, int m, VarianceDivisor divisor) {
    if (m < 1) throw std::invalid_argument("window_stats: m must be >= 1");
    if (t < m) throw std::out_of_range("window_stats: insufficient history");
    if (t > series.size()) throw std::out_of_range("window_stats: t beyond series");
    double sum = 0.0;
    for (int i = 1; i <= m; ++i) sum += static_cast<double>(series.counts[static_cast<std::size_t>(t - i)]);
    const double mu = sum / m;
    double ss = 0.0;
    for (int i = 1; i <= m; ++i) {
        const double d = static_cast<double>(series.counts[static_cast<std::size_t>(t - i)]) - mu;
        ss += d * d;
    }
    const int div = divisor == VarianceDivisor::Population ? m : m - 1;
    const double sigma2 = div > 0 ? ss / div : 0.0;
    return WindowStats{mu, sigma2, m};
}

double gaussian_upper_tail(double x, double mu, double sigma2) {
    if (sigma2 < 0.0 || std::isnan(sigma2)) throw std::domain_error("gaussian_upper_tail: negative variance");
    if (sigma2 == 0.0) return x <= mu ? 1.0 : 0.0;
    if (std::isnan(x)) throw std::domain_error("gaussian_upper_tail: NaN input");
    const double z = (x - mu) / std::sqrt(sigma2);
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

namespace {

// Tail machinery shared by the discrete distributions. The sum runs on the
// side that avoids cancellation: the complement P(X <= c-1) when c sits at
// or below the mean, the direct sum P(X >= c) when c is in the upper tail
// (there the terms decrease strictly, so a small-term stopping rule is
// safe). log_pmf(k) is summed in linear space after exponentiation.
template <typename LogPmf>
double discrete_upper_tail(std::int64_t c, double mean, LogPmf&& log_pmf) {
    if (c <= 0) return 1.0;
    if (static_cast<double>(c - 1) < mean) {
        double lower = 0.0;
        for (std::int64_t k = 0; k < c; ++k) lower += std::exp(log_pmf(k));
        return std::max(0.0, 1.0 - lower);
    }
    double sum = 0.0;
    for (std::int64_t k = c; k - c <= 200000; ++k) {
        const double term = std::exp(log_pmf(k));
        sum += term;
        if (term < 1e-18 * sum || term == 0.0) break;
    }
    return std::min(1.0, sum);
}

double log_poisson_pmf(std::int64_t k, double lambda) {
    return -lambda + static_cast<double>(k) * std::log(lambda) - std::lgamma(static_cast<double>(k) + 1.0);
}

} // namespace

double poisson_upper_tail(std::int64_t c, double lambda) {
    if (!(lambda > 0.0)) throw std::domain_error("poisson_upper_tail: lambda must be positive");
    if (c < 0) throw std::invalid_argument("poisson_upper_tail: negative count");
    return discrete_upper_tail(c, lambda,
                               [lambda](std::int64_t k) { return log_poisson_pmf(k, lambda); });
}

double negbin_upper_tail(std::int64_t c, double size, double prob) {
    if (!(size > 0.0)) throw std::domain_error("negbin_upper_tail: size must be positive");
    if (!(prob > 0.0 && prob < 1.0)) throw std::domain_error("negbin_upper_tail: prob must be in (0,1)");
    if (c < 0) throw std::invalid_argument("negbin_upper_tail: negative count");
    const double mean = size * (1.0 - prob) / prob;
    const double log_prob_term = size * std::log(prob);
    const double log_q = std::log1p(-prob);
    auto log_pmf = [&](std::int64_t k) {
        const double kd = static_cast<double>(k);
        return std::lgamma(kd + size) - std::lgamma(size) - std::lgamma(kd + 1.0) + log_prob_term +
               kd * log_q;
    };
    return discrete_upper_tail(c, mean, log_pmf);
}

double c1_pvalue(const CountSeries& series, int t, int m, VarianceDivisor divisor) {
    if (t >= series.size()) throw std::out_of_range("c1_pvalue: t beyond series");
    const WindowStats ws = window_stats(series, t, m, divisor);
    const double ct = static_cast<double>(series.counts[static_cast<std::size_t>(t)]);
    return gaussian_upper_tail(ct, ws.mu, ws.sigma2);
}

double c2_pvalue(const CountSeries& series, int t, int m, VarianceDivisor divisor) {
    if (t >= series.size()) throw std::out_of_range("c2_pvalue: t beyond series");
    if (t < m + 2) throw std::out_of_range("c2_pvalue: insufficient history");
    const WindowStats ws = window_stats(series, t - 2, m, divisor);
    const double ct = static_cast<double>(series.counts[static_cast<std::size_t>(t)]);
    return gaussian_upper_tail(ct, ws.mu, ws.sigma2);
}

namespace {

// C2-style z-score with the degenerate-window rule: sigma2 == 0 maps to 0
// when the count does not exceed the window mean and +inf when it does.
double gap_zscore(const CountSeries& series, int u, int m, VarianceDivisor divisor) {
    const WindowStats ws = window_stats(series, u - 2, m, divisor);
    const double c = static_cast<double>(series.counts[static_cast<std::size_t>(u)]);
    if (ws.sigma2 == 0.0) {
        return c > ws.mu ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return (c - ws.mu) / std::sqrt(ws.sigma2);
}

} // namespace

double c3_pvalue(const CountSeries& series, int t, int m, VarianceDivisor divisor) {
    if (t >= series.size()) throw std::out_of_range("c3_pvalue: t beyond series");
    if (t < m + 4) throw std::out_of_range("c3_pvalue: insufficient history");
    const double zt = gap_zscore(series, t, m, divisor);
    if (std::isinf(zt)) return 0.0;
    double statistic = zt;
    for (int i = 1; i <= 2; ++i) {
        const double zi = gap_zscore(series, t - i, m, divisor);
        statistic -= std::max(0.0, zi - 1.0); // -inf when zi is +inf
    }
    return gaussian_upper_tail(statistic, 0.0, 1.0);
}

double bayes_pvalue(const CountSeries& series, int t, int m, VarianceDivisor divisor) {
    if (t >= series.size()) throw std::out_of_range("bayes_pvalue: t beyond series");
    const WindowStats ws = window_stats(series, t, m, divisor);
    const std::int64_t ct = series.counts[static_cast<std::size_t>(t)];
    const double size = m * ws.mu + 0.5; // window sum + 1/2
    const double prob = static_cast<double>(m) / (m + 1.0);
    return negbin_upper_tail(ct, size, prob);
}

double rki_pvalue(const CountSeries& series, int t, int m, VarianceDivisor divisor) {
    if (t >= series.size()) throw std::out_of_range("rki_pvalue: t beyond series");
    const WindowStats ws = window_stats(series, t, m, divisor);
    const std::int64_t ct = series.counts[static_cast<std::size_t>(t)];
    if (ws.mu <= 20.0) {
        const double lambda = std::floor(ws.mu) + 1.0;
        return poisson_upper_tail(ct, lambda);
    }
    return gaussian_upper_tail(static_cast<double>(ct), ws.mu, ws.sigma2);
}

double detector_pvalue(Detector d, const CountSeries& series, int t, int m, VarianceDivisor divisor) {
    switch (d) {
        case Detector::C1: return c1_pvalue(series, t, m, divisor);
        case Detector::C2: return c2_pvalue(series, t, m, divisor);
        case Detector::C3: return c3_pvalue(series, t, m, divisor);
        case Detector::Bayes: return bayes_pvalue(series, t, m, divisor);
        case Detector::RKI: return rki_pvalue(series, t, m, divisor);
    }
    throw std::invalid_argument("unknown detector");
}

PValueMatrix::PValueMatrix(std::vector<Detector> detectors, int n_weeks)
    : detectors_(std::move(detectors)),
      n_weeks_(n_weeks),
      values_(static_cast<std::size_t>(n_weeks) * detectors_.size(), 0.0),
      defined_(static_cast<std::size_t>(n_weeks) * detectors_.size(), 0) {}

int PValueMatrix::detector_index(Detector d) const {
    for (std::size_t i = 0; i < detectors_.size(); ++i) {
        if (detectors_[i] == d) return static_cast<int>(i);
    }
    return -1;
}

bool PValueMatrix::defined(int week, int detector) const {
    return defined_[static_cast<std::size_t>(week) * detectors_.size() +
                    static_cast<std::size_t>(detector)] != 0;
}

double PValueMatrix::value(int week, int detector) const {
    const auto idx =
        static_cast<std::size_t>(week) * detectors_.size() + static_cast<std::size_t>(detector);
    if (!defined_[idx]) throw std::out_of_range("PValueMatrix: undefined cell");
    return values_[idx];
}

void PValueMatrix::set(int week, int detector, double p) {
    const auto idx =
        static_cast<std::size_t>(week) * detectors_.size() + static_cast<std::size_t>(detector);
    values_[idx] = p;
    defined_[idx] = 1;
}

PValueMatrix run_detectors(const CountSeries& series, std::span<const Detector> detectors, int m,
                           VarianceDivisor divisor) {
    PValueMatrix matrix(std::vector<Detector>(detectors.begin(), detectors.end()), series.size());
    for (std::size_t d = 0; d < detectors.size(); ++d) {
        const int first = min_history(detectors[d], m);
        for (int t = first; t < series.size(); ++t) {
            matrix.set(t, static_cast<int>(d), detector_pvalue(detectors[d], series, t, m, divisor));
        }
    }
    return matrix;
}

void write_pvalues(const std::vector<PValueMatrix>& per_series, int test_case_id,
                   const std::filesystem::path& csv_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
    csv << "test_case,series,week,detector,p_value,defined\n";
    csv.precision(17);
    for (std::size_t s = 0; s < per_series.size(); ++s) {
        const auto& matrix = per_series[s];
        for (int t = 0; t < matrix.weeks(); ++t) {
            for (std::size_t d = 0; d < matrix.detectors().size(); ++d) {
                csv << test_case_id << ',' << s << ',' << t << ','
                    << to_string(matrix.detectors()[d]) << ',';
                if (matrix.defined(t, static_cast<int>(d)))
                    csv << matrix.value(t, static_cast<int>(d)) << ",1\n";
                else
                    csv << ",0\n";
            }
        }
    }
    if (!csv) throw std::runtime_error("write failed: " + csv_path.string());
}

std::vector<PValueMatrix> read_pvalues(const std::filesystem::path& csv_path,
                                       int expected_test_case) {
    std::ifstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(csv, line)) throw std::runtime_error("empty p-value csv");

    // First pass collects shape, second fills. Single pass with growth:
    struct Cell {
        std::size_t series;
        int week;
        Detector detector;
        bool defined;
        double value;
    };
    std::vector<Cell> cells;
    std::vector<Detector> detectors;
    std::size_t n_series = 0;
    int n_weeks = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        if (std::stoi(field) != expected_test_case)
            throw std::runtime_error("p-value csv: test case mismatch");
        Cell cell{};
        std::getline(ss, field, ',');
        cell.series = std::stoul(field);
        std::getline(ss, field, ',');
        cell.week = std::stoi(field);
        std::getline(ss, field, ',');
        cell.detector = detector_from_string(field);
        std::getline(ss, field, ',');
        std::string defined_field;
        std::getline(ss, defined_field, ',');
        cell.defined = defined_field == "1";
        cell.value = cell.defined ? std::stod(field) : 0.0;
        if (std::find(detectors.begin(), detectors.end(), cell.detector) == detectors.end())
            detectors.push_back(cell.detector);
        n_series = std::max(n_series, cell.series + 1);
        n_weeks = std::max(n_weeks, cell.week + 1);
        cells.push_back(cell);
    }
    std::vector<PValueMatrix> result(n_series, PValueMatrix(detectors, n_weeks));
    for (const auto& cell : cells) {
        if (cell.defined) {
            const int d = result[cell.series].detector_index(cell.detector);
            result[cell.series].set(cell.week, d, cell.value);
        }
    }
    return result;
}

} // namespace survstack
