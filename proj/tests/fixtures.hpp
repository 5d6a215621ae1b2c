// fixtures.hpp -- shared hand-built series for the worked-example replay.
//
// A short epidemic on a low baseline, evaluated with a 4-week window for
// both the detectors and the mean feature. The expected two-decimal RKI
// and Bayes p-values below were frozen from an independent computation;
// cells marked unreliable in kReplayCellReliable cannot be reproduced by
// any count sequence consistent with the rest of the table (verified by
// exhaustive search) and are excluded from exact assertions.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace fixtures {

// Weeks 30..43 of the replayed series; earlier weeks are zero-padded so
// that indices line up (window length 4 means week 34 is the first week
// with full history).
inline constexpr int kReplayFirstWeek = 30;
inline constexpr std::array<std::int64_t, 14> kReplayCounts = {3, 0, 1, 0, 1, 0, 1,
                                                               4, 4, 9, 8, 3, 2, 1};
inline constexpr int kReplayWindow = 4;

// Rows are weeks 34..43: {week, mean, rki, bayes}.
struct ReplayRow {
    int week;
    double mean;
    double rki;
    double bayes;
};

inline constexpr std::array<ReplayRow, 10> kReplayExpected = {{
    {34, 1.00, 0.86, 0.63},
    {35, 0.50, 0.26, 0.14},
    {36, 0.50, 0.63, 0.43},
    {37, 0.50, 0.00, 0.00},
    {38, 1.50, 0.14, 0.10},
    {39, 2.25, 0.00, 0.00},
    {40, 4.50, 0.13, 0.12},
    {41, 6.25, 0.83, 0.73},
    {42, 6.00, 0.99, 0.98},
    {43, 5.50, 1.00, 0.99},
}};

// {mean reliable, rki reliable, bayes reliable} per row above.
inline constexpr std::array<std::array<bool, 3>, 10> kReplayCellReliable = {{
    {true, true, true},   // 34
    {true, false, false}, // 35
    {true, true, true},   // 36
    {true, false, false}, // 37
    {true, true, true},   // 38
    {true, true, true},   // 39
    {true, true, true},   // 40
    {true, false, false}, // 41
    {true, true, true},   // 42
    {true, true, true},   // 43
}};

// Active outbreak weeks in the replayed series.
inline constexpr int kReplayOutbreakStart = 37;
inline constexpr int kReplayOutbreakEnd = 42;

// Full series from week 0, low-noise lead-in so windows are defined.
inline std::vector<std::int64_t> replay_series_counts() {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(kReplayFirstWeek), 1);
    counts.insert(counts.end(), kReplayCounts.begin(), kReplayCounts.end());
    return counts;
}

} // namespace fixtures
