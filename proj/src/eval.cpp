#include "survstack/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace survstack {

namespace {

void append_point(std::vector<CurvePoint>& points, double x, double y) {
    if (!points.empty() && points.back().x == x && points.back().y == y) return;
    points.push_back({x, y});
}

} // namespace

Curve roc_curve(std::span<const ScoredWeek> scored) {
    std::int64_t n_pos = 0, n_neg = 0;
    for (const auto& sw : scored) (sw.outbreak ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("roc_curve: needs both outbreak and non-outbreak weeks");

    std::vector<std::pair<double, bool>> items;
    items.reserve(scored.size());
    for (const auto& sw : scored) items.emplace_back(sw.score, sw.outbreak);
    std::sort(items.begin(), items.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    Curve curve;
    append_point(curve.points, 0.0, 0.0);
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < items.size()) {
        const double score = items[i].first;
        while (i < items.size() && items[i].first == score) {
            (items[i].second ? tp : fp)++;
            ++i;
        }
        append_point(curve.points, static_cast<double>(fp) / static_cast<double>(n_neg),
                     static_cast<double>(tp) / static_cast<double>(n_pos));
    }
    append_point(curve.points, 1.0, 1.0);
    return curve;
}

Curve detection_curve(std::span<const ScoredWeek> scored) {
    std::int64_t n_neg = 0;
    std::map<std::pair<int, int>, double> span_max; // (series, span_id) -> max active score
    for (const auto& sw : scored) {
        if (sw.outbreak) {
            auto [it, inserted] = span_max.try_emplace({sw.series, sw.span_id}, sw.score);
            if (!inserted) it->second = std::max(it->second, sw.score);
        } else {
            ++n_neg;
        }
    }
    if (span_max.empty()) throw std::invalid_argument("detection_curve: no spans");
    if (n_neg == 0) throw std::invalid_argument("detection_curve: no non-outbreak weeks");
    const auto n_spans = static_cast<std::int64_t>(span_max.size());

    std::vector<double> neg_scores;
    neg_scores.reserve(static_cast<std::size_t>(n_neg));
    std::vector<double> thresholds;
    thresholds.reserve(scored.size());
    for (const auto& sw : scored) {
        thresholds.push_back(sw.score);
        if (!sw.outbreak) neg_scores.push_back(sw.score);
    }
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::sort(neg_scores.begin(), neg_scores.end(), std::greater<>());
    std::vector<double> max_scores;
    max_scores.reserve(span_max.size());
    for (const auto& [key, score] : span_max) max_scores.push_back(score);
    std::sort(max_scores.begin(), max_scores.end(), std::greater<>());

    Curve curve;
    append_point(curve.points, 0.0, 0.0);
    std::size_t fp = 0, detected = 0;
    for (const double theta : thresholds) {
        while (fp < neg_scores.size() && neg_scores[fp] >= theta) ++fp;
        while (detected < max_scores.size() && max_scores[detected] >= theta) ++detected;
        append_point(curve.points, static_cast<double>(fp) / static_cast<double>(n_neg),
                     static_cast<double>(detected) / static_cast<double>(n_spans));
    }
    append_point(curve.points, 1.0, 1.0);
    return curve;
}

double partial_auc(const Curve& curve, double e) {
    if (!(e > 0.0 && e <= 1.0)) throw std::domain_error("partial_auc: e must be in (0,1]");
    if (curve.points.size() < 2) throw std::invalid_argument("partial_auc: degenerate curve");
    double area = 0.0; // already normalized by e, segment by segment
    for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
        const auto& a = curve.points[i];
        const auto& b = curve.points[i + 1];
        if (a.x >= e) break;
        double x2 = b.x, y2 = b.y;
        if (b.x > e) {
            x2 = e;
            y2 = a.y + (b.y - a.y) * ((e - a.x) / (b.x - a.x));
        }
        area += ((x2 - a.x) / e) * (0.5 * (a.y + y2));
    }
    return area;
}

double pauc(std::span<const ScoredWeek> scored, double e) {
    return partial_auc(roc_curve(scored), e);
}

double dauc(std::span<const ScoredWeek> scored, double e) {
    return partial_auc(detection_curve(scored), e);
}

double RankTable::rank_of(const std::string& method, const std::string& subset) const {
    for (std::size_t m = 0; m < methods.size(); ++m) {
        if (methods[m] != method) continue;
        for (std::size_t s = 0; s < subsets.size(); ++s) {
            if (subsets[s] == subset) return avg_rank[m][s];
        }
    }
    throw std::out_of_range("RankTable: unknown method or subset");
}

RankTable rank_methods(const std::vector<std::string>& methods,
                       const std::map<std::string, std::vector<double>>& values,
                       const std::vector<std::string>& subset_of) {
    if (methods.empty()) throw std::invalid_argument("rank_methods: no methods");
    const std::size_t n_cases = subset_of.size();
    for (const auto& m : methods) {
        auto it = values.find(m);
        if (it == values.end() || it->second.size() != n_cases)
            throw std::invalid_argument("rank_methods: missing values for method " + m);
    }

    RankTable table;
    table.methods = methods;
    table.subsets.push_back("overall");
    for (const auto& s : subset_of) {
        if (std::find(table.subsets.begin(), table.subsets.end(), s) == table.subsets.end())
            table.subsets.push_back(s);
    }

    // ranks[m][c]: fractional rank of method m on test case c.
    std::vector<std::vector<double>> ranks(methods.size(), std::vector<double>(n_cases, 0.0));
    for (std::size_t c = 0; c < n_cases; ++c) {
        std::vector<std::pair<double, std::size_t>> order; // (value, method index)
        order.reserve(methods.size());
        for (std::size_t m = 0; m < methods.size(); ++m)
            order.emplace_back(values.at(methods[m])[c], m);
        std::sort(order.begin(), order.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j < order.size() && order[j].first == order[i].first) ++j;
            // positions i+1 .. j share the mean rank
            const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
            for (std::size_t k = i; k < j; ++k) ranks[order[k].second][c] = mean_rank;
            i = j;
        }
    }

    table.avg_rank.assign(methods.size(), std::vector<double>(table.subsets.size(), 0.0));
    for (std::size_t m = 0; m < methods.size(); ++m) {
        for (std::size_t s = 0; s < table.subsets.size(); ++s) {
            double sum = 0.0;
            int count = 0;
            for (std::size_t c = 0; c < n_cases; ++c) {
                if (s == 0 || subset_of[c] == table.subsets[s]) {
                    sum += ranks[m][c];
                    ++count;
                }
            }
            table.avg_rank[m][s] = count > 0 ? sum / count : 0.0;
        }
    }
    return table;
}

} // namespace survstack
