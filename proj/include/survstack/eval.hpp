// eval.hpp -- ROC and detection-rate curves, partial areas, rank tables.
//
// Scores are oriented so that higher means more alarming; detectors
// contribute 1 - p, a trained fusion model contributes its probability
// output. A threshold sweep alarms every week with score >= theta, moving
// theta down through the distinct scores; tied scores flip together.

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace survstack {

struct ScoredWeek {
    int series = 0;
    int week = 0;
    double score = 0.0;
    bool outbreak = false;
    int span_id = -1; // >= 0 iff outbreak
};

struct CurvePoint {
    double x = 0.0; // false alarm rate
    double y = 0.0; // true positive rate or detection rate
};

// Monotone polyline from (0,0) to (1,1).
struct Curve {
    std::vector<CurvePoint> points;
};

// y = alarmed outbreak weeks / outbreak weeks, x = alarmed non-outbreak
// weeks / non-outbreak weeks. Requires both classes present.
Curve roc_curve(std::span<const ScoredWeek> scored);

// y = fraction of spans with at least one alarmed active week. Spans are
// identified by the (series, span_id) pairs carried on outbreak weeks;
// every span must contribute at least one scored week. Requires at least
// one span and one non-outbreak week.
Curve detection_curve(std::span<const ScoredWeek> scored);

// Area under the linearly interpolated curve restricted to x in [0, e],
// normalized by e. Throws std::domain_error unless 0 < e <= 1.
double partial_auc(const Curve& curve, double e);

double pauc(std::span<const ScoredWeek> scored, double e = 0.01);
double dauc(std::span<const ScoredWeek> scored, double e = 0.01);

// Average fractional ranks (1 = best = largest value, ties share the mean
// of their positions) per method, overall and per structural subset.
struct RankTable {
    std::vector<std::string> methods;
    std::vector<std::string> subsets;          // "overall" first
    std::vector<std::vector<double>> avg_rank; // [method][subset]

    double rank_of(const std::string& method, const std::string& subset) const;
};

// values[method] holds one score per test case; subset_of[i] names the
// structural subset of test case i. Every method must cover every case.
RankTable rank_methods(const std::vector<std::string>& methods,
                       const std::map<std::string, std::vector<double>>& values,
                       const std::vector<std::string>& subset_of);

} // namespace survstack
