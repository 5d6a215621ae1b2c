// stacking.hpp -- fusion datasets: detector outputs as features, outbreak
// labelings as targets.
//
// A configuration is written M(a,o,w): M is P (raw p-values) or S (binary
// alarms at level alpha), a is mu/!mu for the mean feature, o one of
// O0..O3, w the number of lagged output columns per detector.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "survstack/core.hpp"
#include "survstack/detectors.hpp"

namespace survstack {

enum class FusionMode { PValues, Alarms }; // P | S

enum class Labeling { O0, O1, O2, O3 };

std::string_view to_string(Labeling o);
Labeling labeling_from_string(std::string_view name);

struct FusionConfig {
    FusionMode mode = FusionMode::PValues;
    double alpha = 0.005;       // alarm threshold, mode S only (p <= alpha)
    bool include_mean = false;  // mean of the last mean_window counts
    int window = 0;             // w: lagged outputs per detector
    Labeling labeling = Labeling::O0;
    int mean_window = 7;

    // "P(mu,O3,1)" style notation; parse() inverts name() exactly.
    std::string name() const;
    static FusionConfig parse(std::string_view text);
};

// Per-week binary targets for one series under the given strategy:
//   O0: every active span week
//   O1: active span weeks from the start through the peak
//   O2: weeks in O1 whose total count strictly exceeds the previous week's
//   O3: the peak week only
void label_outbreaks(const CountSeries& series, std::span<const OutbreakSpan> spans,
                     Labeling strategy, std::vector<std::uint8_t>& labels);
std::vector<std::uint8_t> label_outbreaks(const CountSeries& series,
                                          std::span<const OutbreakSpan> spans, Labeling strategy);

struct StackDataset {
    std::vector<std::string> columns;           // feature names, in order
    std::vector<std::vector<double>> features;  // column-major: features[col][row]
    std::vector<std::uint8_t> targets;          // empty until labeled
    struct RowRef {
        int series = 0;
        int week = 0;
    };
    std::vector<RowRef> rows;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_cols() const { return columns.size(); }
    void gather_row(std::size_t row, std::vector<double>& out) const;
};

// Feature rows for every week of one series. Column order: the mean first
// when configured, then lag w .. lag 1 blocks (one column per detector),
// then the lag-0 block. Undefined detector outputs (too little history or
// negative lag week) impute the no-alarm extreme: 1.0 in mode P, 0 in
// mode S. Targets are left empty.
StackDataset build_features(const PValueMatrix& pvalues, const CountSeries& series,
                            const FusionConfig& config, int series_index = 0);

// Train/eval datasets for a bundle. Train rows cover weeks 0..574 of every
// series, labeled per config.labeling over the baseline spans; eval rows
// cover weeks 575..623, always labeled O0 over the evaluation spans
// (detection is judged on whole epidemic periods). Detectors run on the
// full series so eval windows see real history.
std::pair<StackDataset, StackDataset> assemble(const SeriesBundle& bundle,
                                               std::span<const Detector> detectors,
                                               const FusionConfig& config, int m = 7,
                                               VarianceDivisor divisor = VarianceDivisor::Population);

// Same split, but reusing per-series detector output computed elsewhere.
std::pair<StackDataset, StackDataset> assemble(const SeriesBundle& bundle,
                                               const std::vector<PValueMatrix>& pvalues,
                                               const FusionConfig& config);

// CSV with a header row: feature columns then target. A rows sidecar CSV
// (series,week) maps rows back to their origin.
void write_dataset(const StackDataset& dataset, const std::filesystem::path& csv_path,
                   const std::filesystem::path& rows_path);
StackDataset read_dataset(const std::filesystem::path& csv_path,
                          const std::filesystem::path& rows_path);

} // namespace survstack
