#include "survstack/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace survstack {

using nlohmann::json;

namespace {

// Fusion notation contains commas, so the method column is quoted.
std::string csv_field(const std::string& value) {
    if (value.find(',') == std::string::npos) return value;
    return '"' + value + '"';
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

} // namespace

std::string MethodSpec::name() const {
    if (kind == Kind::BaseDetector) return std::string(to_string(detector));
    return fusion.name();
}

MethodSpec MethodSpec::parse(std::string_view text) {
    MethodSpec spec;
    for (Detector d : kAllDetectors) {
        if (text == to_string(d)) {
            spec.kind = Kind::BaseDetector;
            spec.detector = d;
            return spec;
        }
    }
    spec.kind = Kind::Fusion;
    spec.fusion = FusionConfig::parse(text);
    return spec;
}

std::vector<MethodSpec> parse_method_list(const std::string& comma_separated) {
    // Commas inside M(a,o,w) parentheses do not separate methods.
    std::vector<MethodSpec> methods;
    std::string current;
    int depth = 0;
    auto flush = [&] {
        if (current.empty()) return;
        methods.push_back(MethodSpec::parse(current));
        current.clear();
    };
    for (char ch : comma_separated) {
        if (ch == '(') ++depth;
        if (ch == ')') --depth;
        if (ch == ',' && depth == 0) {
            flush();
            continue;
        }
        if (ch == ' ' || ch == '"') continue;
        current += ch;
    }
    flush();
    if (methods.empty()) throw std::invalid_argument("no methods given");
    return methods;
}

std::vector<MethodSpec> default_methods() {
    std::vector<MethodSpec> methods;
    for (Detector d : kAllDetectors) {
        MethodSpec spec;
        spec.kind = MethodSpec::Kind::BaseDetector;
        spec.detector = d;
        methods.push_back(spec);
    }
    methods.push_back(MethodSpec::parse("S(mu,O3,1)"));
    methods.push_back(MethodSpec::parse("P(mu,O3,1)"));
    return methods;
}

std::uint64_t derive_seed(std::uint64_t base, std::int64_t item, std::string_view tag) {
    std::uint64_t h = base ^ 0x9e3779b97f4a7c15ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0xbf58476d1ce4e5b9ULL;
        h ^= h >> 29;
    };
    mix(static_cast<std::uint64_t>(item));
    for (unsigned char c : tag) mix(c);
    return h;
}

std::vector<ScoredWeek> score_method(const MethodSpec& method, const SeriesBundle& bundle,
                                     const std::vector<PValueMatrix>& pvalues,
                                     const ExperimentPlan& plan) {
    std::vector<ScoredWeek> scored;
    scored.reserve(bundle.series.size() * static_cast<std::size_t>(bundle.eval_len));

    auto outbreak_info = [&](int series, int week) -> std::pair<bool, int> {
        const auto& spans = bundle.series[static_cast<std::size_t>(series)].eval_spans;
        for (std::size_t j = 0; j < spans.size(); ++j) {
            if (spans[j].active(week)) return {true, static_cast<int>(j)};
        }
        return {false, -1};
    };

    if (method.kind == MethodSpec::Kind::BaseDetector) {
        for (std::size_t s = 0; s < bundle.series.size(); ++s) {
            const int d = pvalues[s].detector_index(method.detector);
            if (d < 0) throw std::invalid_argument("score_method: detector not in p-value matrix");
            for (int t = bundle.baseline_len; t < bundle.total_weeks(); ++t) {
                const auto [is_outbreak, span_id] = outbreak_info(static_cast<int>(s), t);
                scored.push_back({static_cast<int>(s), t, 1.0 - pvalues[s].value(t, d),
                                  is_outbreak, span_id});
            }
        }
        return scored;
    }

    FusionConfig fusion = method.fusion;
    fusion.mean_window = plan.m; // mean feature shares the detector window
    auto [train, eval] = assemble(bundle, pvalues, fusion);
    ForestParams params = plan.forest;
    params.seed = derive_seed(plan.seed, bundle.test_case_id, method.name());
    ForestModel model = fit_forest(train.features, train.targets, train.columns, params, 1);
    std::vector<double> row;
    for (std::size_t r = 0; r < eval.n_rows(); ++r) {
        eval.gather_row(r, row);
        const auto [is_outbreak, span_id] = outbreak_info(eval.rows[r].series, eval.rows[r].week);
        scored.push_back(
            {eval.rows[r].series, eval.rows[r].week, model.predict_proba(row), is_outbreak, span_id});
    }
    return scored;
}

CaseResult run_case(const TestCaseSpec& spec, const ExperimentPlan& plan) {
    TestCaseSpec effective = spec;
    if (plan.fixed_k) effective.fixed_k = plan.fixed_k;
    const SeriesBundle bundle = generate_bundle(effective, plan.n_series, plan.seed);

    std::vector<PValueMatrix> pvalues;
    pvalues.reserve(bundle.series.size());
    for (const auto& entry : bundle.series)
        pvalues.push_back(run_detectors(entry.series, plan.detectors, plan.m, plan.divisor));

    CaseResult result;
    result.test_case = spec.id;
    result.subset = subset_label(spec);
    for (const auto& method : plan.methods) {
        const auto scored = score_method(method, bundle, pvalues, plan);
        result.dauc[method.name()] = dauc(scored, plan.e);
        result.pauc[method.name()] = pauc(scored, plan.e);
    }
    return result;
}

std::vector<CaseResult> run_experiment(const ExperimentPlan& plan) {
    std::vector<CaseResult> results(plan.grid.size());
    parallel_for(static_cast<int>(plan.grid.size()), plan.jobs,
                 [&](int i) { results[static_cast<std::size_t>(i)] = run_case(plan.grid[static_cast<std::size_t>(i)], plan); });
    return results;
}

RankTable rank_results(const std::vector<CaseResult>& results,
                       const std::vector<std::string>& methods) {
    std::map<std::string, std::vector<double>> values;
    std::vector<std::string> subset_of;
    for (const auto& result : results) {
        subset_of.push_back(result.subset);
        for (const auto& m : methods) {
            auto it = result.dauc.find(m);
            if (it == result.dauc.end())
                throw std::invalid_argument("rank_results: missing method " + m);
            values[m].push_back(it->second);
        }
    }
    return rank_methods(methods, values, subset_of);
}

void write_results(const std::vector<CaseResult>& results, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out.precision(17);
    out << "test_case,method,dauc_1pct,pauc_1pct\n";
    for (const auto& result : results) {
        for (const auto& [method, value] : result.dauc) {
            out << result.test_case << ',' << csv_field(method) << ',' << value << ','
                << result.pauc.at(method) << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<CaseResult> read_results(const std::filesystem::path& path,
                                     const std::vector<TestCaseSpec>& grid) {
    std::map<int, std::string> subset_by_id;
    for (const auto& spec : grid) subset_by_id[spec.id] = subset_label(spec);
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty results csv");
    std::map<int, CaseResult> by_case;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 4) throw std::runtime_error("results csv: malformed row");
        const int tc = std::stoi(fields[0]);
        const std::string& method = fields[1];
        const double dv = std::stod(fields[2]);
        const double pv = std::stod(fields[3]);
        auto& result = by_case[tc];
        result.test_case = tc;
        auto it = subset_by_id.find(tc);
        if (it == subset_by_id.end())
            throw std::runtime_error("results csv: unknown test case " + std::to_string(tc));
        result.subset = it->second;
        result.dauc[method] = dv;
        result.pauc[method] = pv;
    }
    std::vector<CaseResult> results;
    results.reserve(by_case.size());
    for (auto& [tc, result] : by_case) results.push_back(std::move(result));
    return results;
}

void write_ranks(const RankTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out.precision(17);
    out << "method,subset,avg_rank\n";
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
        for (std::size_t s = 0; s < table.subsets.size(); ++s) {
            out << csv_field(table.methods[m]) << ',' << table.subsets[s] << ','
                << table.avg_rank[m][s] << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_boxplot(const std::vector<CaseResult>& results, int k,
                   const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out.precision(17);
    out << "method,k,test_case,dauc_1pct,pauc_1pct\n";
    for (const auto& result : results) {
        for (const auto& [method, value] : result.dauc) {
            out << csv_field(method) << ',' << k << ',' << result.test_case << ',' << value << ','
                << result.pauc.at(method) << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::uint64_t plan_config_hash(const ExperimentPlan& plan) {
    std::ostringstream ss;
    ss.precision(17);
    ss << plan.seed << '|' << plan.e << '|' << plan.n_series << '|' << plan.m << '|'
       << (plan.divisor == VarianceDivisor::Population ? "m" : "m-1") << '|'
       << plan.forest.n_trees << '|' << plan.forest.min_samples_leaf << '|'
       << plan.forest.max_features << '|' << plan.forest.bootstrap << '|'
       << plan.forest.positive_weight << '|';
    if (plan.fixed_k) ss << 'k' << *plan.fixed_k;
    ss << '|';
    for (const auto& d : plan.detectors) ss << to_string(d) << ';';
    ss << '|';
    for (const auto& method : plan.methods) ss << method.name() << ';';
    ss << '|';
    for (const auto& spec : plan.grid) {
        ss << spec.id << ':' << spec.trend << spec.seasonal << spec.biannual << ':'
           << spec.intercept << ':' << spec.trend_coeff << ':' << spec.dispersion << ':';
        for (double a : spec.seasonal_amp) ss << a << ',';
        if (spec.fixed_k) ss << 'k' << *spec.fixed_k;
        ss << ';';
    }
    const std::string text = ss.str();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_manifest(const std::filesystem::path& out_dir, const std::string& stage,
                    const ExperimentPlan& plan, double elapsed_seconds) {
    json j;
    j["stage"] = stage;
    j["seed"] = plan.seed;
    j["config_hash"] = plan_config_hash(plan);
    j["n_test_cases"] = plan.grid.size();
    j["elapsed_seconds"] = elapsed_seconds;
    std::vector<std::string> names;
    for (const auto& method : plan.methods) names.push_back(method.name());
    j["methods"] = names;
    std::ofstream out(out_dir / ("manifest_" + stage + ".json"));
    if (!out) throw std::runtime_error("cannot write manifest for " + stage);
    out << j.dump(2) << '\n';
}

} // namespace survstack
