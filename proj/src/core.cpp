#include "survstack/core.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace survstack {

using nlohmann::json;

std::int64_t OutbreakSpan::total_cases() const {
    return std::accumulate(injected_cases.begin(), injected_cases.end(), std::int64_t{0});
}

void validate(const CountSeries& series) {
    if (series.counts.empty()) throw std::invalid_argument("CountSeries: empty counts");
    for (auto c : series.counts) {
        if (c < 0) throw std::invalid_argument("CountSeries: negative count");
    }
}

void validate(const OutbreakSpan& span, const CountSeries& series) {
    if (span.injected_cases.empty())
        throw std::invalid_argument("OutbreakSpan: no injected cases");
    bool any_positive = false;
    for (auto c : span.injected_cases) {
        if (c < 0) throw std::invalid_argument("OutbreakSpan: negative injected count");
        any_positive = any_positive || c > 0;
    }
    if (!any_positive) throw std::invalid_argument("OutbreakSpan: all-zero injected cases");
    if (span.injected_cases.back() == 0)
        throw std::invalid_argument("OutbreakSpan: trailing zero weeks not trimmed");
    if (span.start_week < 0 || span.end_week() >= series.size())
        throw std::invalid_argument("OutbreakSpan: span outside series");
    if (!span.active(span.peak_week))
        throw std::invalid_argument("OutbreakSpan: peak week not active");
    // Earliest active week with maximal total count.
    std::int64_t best = -1;
    int best_week = -1;
    for (int w = span.start_week; w <= span.end_week(); ++w) {
        if (!span.active(w)) continue;
        const std::int64_t total = series.counts[static_cast<std::size_t>(w)];
        if (total > best) {
            best = total;
            best_week = w;
        }
    }
    if (span.peak_week != best_week)
        throw std::invalid_argument("OutbreakSpan: peak week is not the earliest maximum");
}

void validate(const SeriesBundle& bundle) {
    for (const auto& entry : bundle.series) {
        validate(entry.series);
        if (entry.series.size() != bundle.total_weeks())
            throw std::invalid_argument("SeriesBundle: series length mismatch");
        for (const auto& span : entry.baseline_spans) {
            validate(span, entry.series);
            for (int w = span.start_week; w <= span.end_week(); ++w) {
                if (span.active(w) && w >= bundle.baseline_len)
                    throw std::invalid_argument("SeriesBundle: baseline span reaches evaluation weeks");
            }
        }
        for (const auto& span : entry.eval_spans) {
            validate(span, entry.series);
            for (int w = span.start_week; w <= span.end_week(); ++w) {
                if (span.active(w) && w < bundle.baseline_len)
                    throw std::invalid_argument("SeriesBundle: evaluation span reaches baseline weeks");
            }
        }
        // Baseline spans must not share active weeks.
        std::vector<int> active;
        for (const auto& span : entry.baseline_spans) {
            for (int w = span.start_week; w <= span.end_week(); ++w) {
                if (span.active(w)) active.push_back(w);
            }
        }
        std::sort(active.begin(), active.end());
        if (std::adjacent_find(active.begin(), active.end()) != active.end())
            throw std::invalid_argument("SeriesBundle: overlapping baseline spans");
    }
}

namespace {

json span_to_json(const OutbreakSpan& span) {
    return json{{"start_week", span.start_week},
                {"peak_week", span.peak_week},
                {"k", span.size_param_k},
                {"injected_cases", span.injected_cases}};
}

OutbreakSpan span_from_json(const json& j) {
    OutbreakSpan span;
    span.start_week = j.at("start_week").get<int>();
    span.peak_week = j.at("peak_week").get<int>();
    span.size_param_k = j.at("k").get<double>();
    span.injected_cases = j.at("injected_cases").get<std::vector<std::int64_t>>();
    return span;
}

} // namespace

void write_bundle(const SeriesBundle& bundle,
                  const std::filesystem::path& csv_path,
                  const std::filesystem::path& json_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
    csv << "test_case,series,week,count,outbreak_active,span_id\n";
    for (std::size_t s = 0; s < bundle.series.size(); ++s) {
        const auto& entry = bundle.series[s];
        const int n = entry.series.size();
        // Active-week lookup: span label per week, empty when none.
        std::vector<std::string> label(static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < entry.baseline_spans.size(); ++i) {
            const auto& span = entry.baseline_spans[i];
            for (int w = span.start_week; w <= span.end_week(); ++w)
                if (span.active(w)) label[static_cast<std::size_t>(w)] = "b" + std::to_string(i);
        }
        for (std::size_t i = 0; i < entry.eval_spans.size(); ++i) {
            const auto& span = entry.eval_spans[i];
            for (int w = span.start_week; w <= span.end_week(); ++w)
                if (span.active(w)) label[static_cast<std::size_t>(w)] = "e" + std::to_string(i);
        }
        for (int w = 0; w < n; ++w) {
            const auto& tag = label[static_cast<std::size_t>(w)];
            csv << bundle.test_case_id << ',' << s << ',' << w << ','
                << entry.series.counts[static_cast<std::size_t>(w)] << ','
                << (tag.empty() ? 0 : 1) << ',' << tag << '\n';
        }
    }
    if (!csv) throw std::runtime_error("write failed: " + csv_path.string());

    json meta;
    meta["test_case"] = bundle.test_case_id;
    meta["baseline_len"] = bundle.baseline_len;
    meta["eval_len"] = bundle.eval_len;
    json series_meta = json::array();
    for (const auto& entry : bundle.series) {
        json spans_b = json::array();
        for (const auto& span : entry.baseline_spans) spans_b.push_back(span_to_json(span));
        json spans_e = json::array();
        for (const auto& span : entry.eval_spans) spans_e.push_back(span_to_json(span));
        series_meta.push_back(json{{"series_id", entry.series.series_id},
                                   {"origin_week", entry.series.origin_week},
                                   {"baseline_spans", spans_b},
                                   {"eval_spans", spans_e}});
    }
    meta["series"] = series_meta;
    std::ofstream js(json_path);
    if (!js) throw std::runtime_error("cannot open " + json_path.string());
    js << meta.dump(2) << '\n';
    if (!js) throw std::runtime_error("write failed: " + json_path.string());
}

SeriesBundle read_bundle(const std::filesystem::path& csv_path,
                         const std::filesystem::path& json_path) {
    std::ifstream js(json_path);
    if (!js) throw std::runtime_error("cannot open " + json_path.string());
    json meta = json::parse(js);

    SeriesBundle bundle;
    bundle.test_case_id = meta.at("test_case").get<int>();
    bundle.baseline_len = meta.at("baseline_len").get<int>();
    bundle.eval_len = meta.at("eval_len").get<int>();
    for (const auto& sm : meta.at("series")) {
        BundleSeries entry;
        entry.series.series_id = sm.at("series_id").get<std::string>();
        entry.series.origin_week = sm.at("origin_week").get<int>();
        for (const auto& sj : sm.at("baseline_spans")) entry.baseline_spans.push_back(span_from_json(sj));
        for (const auto& sj : sm.at("eval_spans")) entry.eval_spans.push_back(span_from_json(sj));
        bundle.series.push_back(std::move(entry));
    }

    std::ifstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(csv, line)) throw std::runtime_error("empty bundle csv");
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        const int tc = std::stoi(field);
        std::getline(ss, field, ',');
        const auto s = static_cast<std::size_t>(std::stoul(field));
        std::getline(ss, field, ',');
        const auto w = static_cast<std::size_t>(std::stoul(field));
        std::getline(ss, field, ',');
        const std::int64_t count = std::stoll(field);
        if (tc != bundle.test_case_id) throw std::runtime_error("bundle csv: test case mismatch");
        if (s >= bundle.series.size()) throw std::runtime_error("bundle csv: series index out of range");
        auto& counts = bundle.series[s].series.counts;
        if (counts.size() != w) throw std::runtime_error("bundle csv: weeks out of order");
        counts.push_back(count);
    }
    validate(bundle);
    return bundle;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int t = 0; t < jobs; ++t) {
        workers.emplace_back([&, t] {
            try {
                for (;;) {
                    const int i = next.fetch_add(1);
                    if (i >= n) break;
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace survstack
