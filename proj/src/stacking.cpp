#include "survstack/stacking.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace survstack {

std::string_view to_string(Labeling o) {
    switch (o) {
        case Labeling::O0: return "O0";
        case Labeling::O1: return "O1";
        case Labeling::O2: return "O2";
        case Labeling::O3: return "O3";
    }
    throw std::invalid_argument("unknown labeling");
}

Labeling labeling_from_string(std::string_view name) {
    if (name == "O0") return Labeling::O0;
    if (name == "O1") return Labeling::O1;
    if (name == "O2") return Labeling::O2;
    if (name == "O3") return Labeling::O3;
    throw std::invalid_argument("unknown labeling: " + std::string(name));
}

std::string FusionConfig::name() const {
    std::string s = mode == FusionMode::PValues ? "P(" : "S(";
    s += include_mean ? "mu," : "!mu,";
    s += to_string(labeling);
    s += ',';
    s += std::to_string(window);
    s += ')';
    return s;
}

FusionConfig FusionConfig::parse(std::string_view text) {
    FusionConfig config;
    if (text.size() < 4) throw std::invalid_argument("bad fusion notation: " + std::string(text));
    if (text[0] == 'P')
        config.mode = FusionMode::PValues;
    else if (text[0] == 'S')
        config.mode = FusionMode::Alarms;
    else
        throw std::invalid_argument("bad fusion notation: " + std::string(text));
    if (text[1] != '(' || text.back() != ')')
        throw std::invalid_argument("bad fusion notation: " + std::string(text));
    std::string inner(text.substr(2, text.size() - 3));
    std::istringstream ss(inner);
    std::string field;
    if (!std::getline(ss, field, ',')) throw std::invalid_argument("bad fusion notation");
    if (field == "mu")
        config.include_mean = true;
    else if (field == "!mu")
        config.include_mean = false;
    else
        throw std::invalid_argument("bad fusion notation (mean flag): " + field);
    if (!std::getline(ss, field, ',')) throw std::invalid_argument("bad fusion notation");
    config.labeling = labeling_from_string(field);
    if (!std::getline(ss, field, ',')) throw std::invalid_argument("bad fusion notation");
    std::size_t pos = 0;
    config.window = std::stoi(field, &pos);
    if (pos != field.size() || config.window < 0)
        throw std::invalid_argument("bad fusion notation (window): " + field);
    if (std::getline(ss, field, ',')) throw std::invalid_argument("bad fusion notation");
    return config;
}

void label_outbreaks(const CountSeries& series, std::span<const OutbreakSpan> spans,
                     Labeling strategy, std::vector<std::uint8_t>& labels) {
    labels.assign(series.counts.size(), 0);
    for (const auto& span : spans) {
        switch (strategy) {
            case Labeling::O0:
                for (int w = span.start_week; w <= span.end_week(); ++w)
                    if (span.active(w)) labels[static_cast<std::size_t>(w)] = 1;
                break;
            case Labeling::O1:
                for (int w = span.start_week; w <= span.peak_week; ++w)
                    if (span.active(w)) labels[static_cast<std::size_t>(w)] = 1;
                break;
            case Labeling::O2:
                for (int w = span.start_week; w <= span.peak_week; ++w) {
                    if (!span.active(w) || w == 0) continue;
                    if (series.counts[static_cast<std::size_t>(w)] >
                        series.counts[static_cast<std::size_t>(w - 1)])
                        labels[static_cast<std::size_t>(w)] = 1;
                }
                break;
            case Labeling::O3:
                labels[static_cast<std::size_t>(span.peak_week)] = 1;
                break;
        }
    }
}

std::vector<std::uint8_t> label_outbreaks(const CountSeries& series,
                                          std::span<const OutbreakSpan> spans, Labeling strategy) {
    std::vector<std::uint8_t> labels;
    label_outbreaks(series, spans, strategy, labels);
    return labels;
}

void StackDataset::gather_row(std::size_t row, std::vector<double>& out) const {
    out.resize(features.size());
    for (std::size_t c = 0; c < features.size(); ++c) out[c] = features[c][row];
}

namespace {

// Mean of the up-to-m counts before week t; 0 when there is no history.
double mean_feature(const CountSeries& series, int t, int m) {
    const int lo = std::max(0, t - m);
    if (t <= lo) return 0.0;
    double sum = 0.0;
    for (int u = lo; u < t; ++u) sum += static_cast<double>(series.counts[static_cast<std::size_t>(u)]);
    return sum / (t - lo);
}

double detector_feature(const PValueMatrix& pvalues, int week, int detector,
                        const FusionConfig& config) {
    const bool missing = week < 0 || !pvalues.defined(week, detector);
    if (config.mode == FusionMode::PValues) {
        return missing ? 1.0 : pvalues.value(week, detector);
    }
    if (missing) return 0.0;
    return pvalues.value(week, detector) <= config.alpha ? 1.0 : 0.0;
}

} // namespace

StackDataset build_features(const PValueMatrix& pvalues, const CountSeries& series,
                            const FusionConfig& config, int series_index) {
    if (pvalues.weeks() != series.size())
        throw std::invalid_argument("build_features: p-value matrix misaligned with series");
    StackDataset dataset;
    const auto& detectors = pvalues.detectors();
    if (config.include_mean) dataset.columns.emplace_back("mean");
    for (int lag = config.window; lag >= 0; --lag) {
        for (Detector d : detectors) {
            dataset.columns.push_back(std::string(to_string(d)) + "_lag" + std::to_string(lag));
        }
    }
    const int n = series.size();
    dataset.features.assign(dataset.columns.size(),
                            std::vector<double>(static_cast<std::size_t>(n)));
    dataset.rows.resize(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) dataset.rows[static_cast<std::size_t>(t)] = {series_index, t};

    std::size_t col = 0;
    if (config.include_mean) {
        for (int t = 0; t < n; ++t)
            dataset.features[col][static_cast<std::size_t>(t)] =
                mean_feature(series, t, config.mean_window);
        ++col;
    }
    for (int lag = config.window; lag >= 0; --lag) {
        for (std::size_t d = 0; d < detectors.size(); ++d) {
            auto& column = dataset.features[col++];
            for (int t = 0; t < n; ++t) {
                column[static_cast<std::size_t>(t)] =
                    detector_feature(pvalues, t - lag, static_cast<int>(d), config);
            }
        }
    }
    return dataset;
}

namespace {

void append_rows(StackDataset& dest, const StackDataset& src, int from_week, int to_week,
                 const std::vector<std::uint8_t>& labels) {
    if (dest.columns.empty()) {
        dest.columns = src.columns;
        dest.features.assign(dest.columns.size(), {});
    }
    for (std::size_t r = 0; r < src.n_rows(); ++r) {
        const int week = src.rows[r].week;
        if (week < from_week || week > to_week) continue;
        for (std::size_t c = 0; c < src.features.size(); ++c)
            dest.features[c].push_back(src.features[c][r]);
        dest.targets.push_back(labels[static_cast<std::size_t>(week)]);
        dest.rows.push_back(src.rows[r]);
    }
}

} // namespace

std::pair<StackDataset, StackDataset> assemble(const SeriesBundle& bundle,
                                               const std::vector<PValueMatrix>& pvalues,
                                               const FusionConfig& config) {
    if (pvalues.size() != bundle.series.size())
        throw std::invalid_argument("assemble: p-values do not match bundle series");
    StackDataset train, eval;
    for (std::size_t s = 0; s < bundle.series.size(); ++s) {
        const auto& entry = bundle.series[s];
        const StackDataset all =
            build_features(pvalues[s], entry.series, config, static_cast<int>(s));
        const auto train_labels =
            label_outbreaks(entry.series, entry.baseline_spans, config.labeling);
        const auto eval_labels = label_outbreaks(entry.series, entry.eval_spans, Labeling::O0);
        append_rows(train, all, 0, bundle.baseline_len - 1, train_labels);
        append_rows(eval, all, bundle.baseline_len, bundle.total_weeks() - 1, eval_labels);
    }
    return {std::move(train), std::move(eval)};
}

std::pair<StackDataset, StackDataset> assemble(const SeriesBundle& bundle,
                                               std::span<const Detector> detectors,
                                               const FusionConfig& config, int m,
                                               VarianceDivisor divisor) {
    std::vector<PValueMatrix> pvalues;
    pvalues.reserve(bundle.series.size());
    for (const auto& entry : bundle.series)
        pvalues.push_back(run_detectors(entry.series, detectors, m, divisor));
    return assemble(bundle, pvalues, config);
}

void write_dataset(const StackDataset& dataset, const std::filesystem::path& csv_path,
                   const std::filesystem::path& rows_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
    csv.precision(17);
    for (const auto& name : dataset.columns) csv << name << ',';
    csv << "target\n";
    for (std::size_t r = 0; r < dataset.n_rows(); ++r) {
        for (std::size_t c = 0; c < dataset.features.size(); ++c) csv << dataset.features[c][r] << ',';
        csv << static_cast<int>(dataset.targets.empty() ? 0 : dataset.targets[r]) << '\n';
    }
    if (!csv) throw std::runtime_error("write failed: " + csv_path.string());

    std::ofstream rows(rows_path);
    if (!rows) throw std::runtime_error("cannot open " + rows_path.string());
    rows << "series,week\n";
    for (const auto& ref : dataset.rows) rows << ref.series << ',' << ref.week << '\n';
    if (!rows) throw std::runtime_error("write failed: " + rows_path.string());
}

StackDataset read_dataset(const std::filesystem::path& csv_path,
                          const std::filesystem::path& rows_path) {
    std::ifstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(csv, line)) throw std::runtime_error("empty dataset csv");
    StackDataset dataset;
    {
        std::istringstream header(line);
        std::string name;
        while (std::getline(header, name, ',')) dataset.columns.push_back(name);
        if (dataset.columns.empty() || dataset.columns.back() != "target")
            throw std::runtime_error("dataset csv: missing target column");
        dataset.columns.pop_back();
    }
    dataset.features.assign(dataset.columns.size(), {});
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        for (auto& column : dataset.features) {
            if (!std::getline(ss, field, ',')) throw std::runtime_error("dataset csv: short row");
            column.push_back(std::stod(field));
        }
        if (!std::getline(ss, field, ',')) throw std::runtime_error("dataset csv: short row");
        dataset.targets.push_back(field == "1" ? 1 : 0);
    }

    std::ifstream rows(rows_path);
    if (!rows) throw std::runtime_error("cannot open " + rows_path.string());
    if (!std::getline(rows, line)) throw std::runtime_error("empty rows csv");
    while (std::getline(rows, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        StackDataset::RowRef ref;
        std::getline(ss, field, ',');
        ref.series = std::stoi(field);
        std::getline(ss, field, ',');
        ref.week = std::stoi(field);
        dataset.rows.push_back(ref);
    }
    if (dataset.rows.size() != dataset.targets.size())
        throw std::runtime_error("dataset csv/rows sidecar length mismatch");
    return dataset;
}

} // namespace survstack
