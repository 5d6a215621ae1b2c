// core.hpp -- shared domain types and their persistence.
//
// Week indices are 0-based everywhere, in memory and on disk.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace survstack {

// Weekly infection counts for one monitored series.
struct CountSeries {
    std::string series_id;
    std::vector<std::int64_t> counts;
    int origin_week = 0;

    int size() const { return static_cast<int>(counts.size()); }
};

// Throws std::invalid_argument on violation (empty, negative counts).
void validate(const CountSeries& series);

// An injected epidemic period. injected_cases[i] is the number of extra
// cases added at week start_week + i; the last entry is always positive.
struct OutbreakSpan {
    int start_week = 0;
    std::vector<std::int64_t> injected_cases;
    int peak_week = 0;
    double size_param_k = 0.0;

    int length() const { return static_cast<int>(injected_cases.size()); }
    int end_week() const { return start_week + length() - 1; } // inclusive
    bool active(int week) const {
        return week >= start_week && week <= end_week() &&
               injected_cases[static_cast<std::size_t>(week - start_week)] > 0;
    }
    std::int64_t total_cases() const;
};

// Checks span shape and, against the full series, the peak-week rule:
// peak_week is the earliest active week attaining the maximal total count
// among the span's active weeks.
void validate(const OutbreakSpan& span, const CountSeries& series);

struct BundleSeries {
    CountSeries series;
    std::vector<OutbreakSpan> baseline_spans;
    std::vector<OutbreakSpan> eval_spans;
};

// One test case worth of generated series with outbreak annotations.
struct SeriesBundle {
    int test_case_id = 0;
    std::vector<BundleSeries> series;
    int baseline_len = 575;
    int eval_len = 49;

    int total_weeks() const { return baseline_len + eval_len; }
};

void validate(const SeriesBundle& bundle);

// CSV columns: test_case,series,week,count,outbreak_active,span_id.
// span_id is b<i> for baseline spans, e<i> for evaluation spans, empty
// outside any span's active weeks. Span metadata (start, peak, k, injected
// cases, series ids) goes to a JSON sidecar; together the two files
// round-trip the bundle exactly.
void write_bundle(const SeriesBundle& bundle,
                  const std::filesystem::path& csv_path,
                  const std::filesystem::path& json_path);

SeriesBundle read_bundle(const std::filesystem::path& csv_path,
                         const std::filesystem::path& json_path);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions from
// workers are rethrown on the calling thread.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

} // namespace survstack
