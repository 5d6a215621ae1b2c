// survstack -- batch CLI over the surveillance stacking library.
//
// Stages communicate through files under --out only, so any stage can be
// rerun in isolation:
//   generate -> bundles/case_<id>.csv (+ .spans.json), grid.json
//   detect   -> pvalues/case_<id>.csv
//   dataset  -> datasets/case_<id>_<method>_{train,eval}.csv (+ .rows.csv)
//   train    -> models/case_<id>_<method>.json
//   evaluate -> results.csv (+ curves/)
//   rank     -> ranks.csv
//   experiment chains all of the above; fixed-k runs append boxplot.csv.

#include <cctype>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "survstack/pipeline.hpp"

namespace fs = std::filesystem;
using namespace survstack;

namespace {

struct CommonOpts {
    std::string out_dir = "out";
    std::string grid_file;
    std::uint64_t seed = 7;
    std::string methods = "C1,C2,C3,Bayes,RKI,S(mu,O3,1),P(mu,O3,1)";
    double e = 0.01;
    std::string k_mode = "uniform";
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    int n_series = 100;
    int m = 7;
    std::string divisor = "m";
    int n_trees = 100;
    int min_leaf = 5;
    bool curves = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "master seed");
    cmd->add_option("--grid", opts.grid_file, "test-case grid JSON (default: built-in 42 cases)");
    cmd->add_option("--jobs", opts.jobs, "worker threads");
}

ExperimentPlan make_plan(const CommonOpts& opts) {
    ExperimentPlan plan;
    plan.seed = opts.seed;
    try {
        plan.methods = parse_method_list(opts.methods);
    } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError(std::string("--methods: ") + e.what());
    }
    plan.e = opts.e;
    plan.n_series = opts.n_series;
    plan.m = opts.m;
    if (opts.divisor == "m")
        plan.divisor = VarianceDivisor::Population;
    else if (opts.divisor == "m-1")
        plan.divisor = VarianceDivisor::Sample;
    else
        throw CLI::ValidationError("--variance-divisor must be m or m-1");
    plan.forest.n_trees = opts.n_trees;
    plan.forest.min_samples_leaf = opts.min_leaf;
    plan.jobs = std::max(1, opts.jobs);
    if (opts.k_mode != "uniform") {
        bool ok = opts.k_mode.rfind("fixed:", 0) == 0;
        if (ok) {
            try {
                std::size_t end = 0;
                const std::string digits = opts.k_mode.substr(6);
                const int k = std::stoi(digits, &end);
                ok = end == digits.size() && k >= 1;
                if (ok) plan.fixed_k = k;
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok) throw CLI::ValidationError("--k must be uniform or fixed:<int>");
    }
    // Grid last: a missing or malformed grid file is a data error, not usage.
    plan.grid = opts.grid_file.empty() ? default_grid() : load_grid(opts.grid_file);
    return plan;
}

std::string sanitize(const std::string& method) {
    std::string out;
    for (char c : method) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out += c;
        } else if (c == ',' || c == '(') {
            out += '_';
        } // ')' and '!' dropped
    }
    return out;
}

fs::path bundle_csv(const fs::path& out, int id) {
    return out / "bundles" / ("case_" + std::to_string(id) + ".csv");
}
fs::path bundle_json(const fs::path& out, int id) {
    return out / "bundles" / ("case_" + std::to_string(id) + ".spans.json");
}
fs::path pvalue_csv(const fs::path& out, int id) {
    return out / "pvalues" / ("case_" + std::to_string(id) + ".csv");
}
fs::path dataset_csv(const fs::path& out, int id, const std::string& method, const char* part) {
    return out / "datasets" /
           ("case_" + std::to_string(id) + "_" + sanitize(method) + "_" + part + ".csv");
}
fs::path rows_csv(const fs::path& out, int id, const std::string& method, const char* part) {
    return out / "datasets" /
           ("case_" + std::to_string(id) + "_" + sanitize(method) + "_" + part + ".rows.csv");
}
fs::path model_json(const fs::path& out, int id, const std::string& method) {
    return out / "models" / ("case_" + std::to_string(id) + "_" + sanitize(method) + ".json");
}

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void stage_generate(const ExperimentPlan& plan, const fs::path& out) {
    StageTimer timer;
    fs::create_directories(out / "bundles");
    write_grid(plan.grid, out / "grid.json");
    parallel_for(static_cast<int>(plan.grid.size()), plan.jobs, [&](int i) {
        TestCaseSpec spec = plan.grid[static_cast<std::size_t>(i)];
        if (plan.fixed_k) spec.fixed_k = plan.fixed_k;
        const SeriesBundle bundle = generate_bundle(spec, plan.n_series, plan.seed);
        write_bundle(bundle, bundle_csv(out, spec.id), bundle_json(out, spec.id));
    });
    write_manifest(out, "generate", plan, timer.seconds());
    std::cout << "generated " << plan.grid.size() << " bundles in " << out / "bundles"
              << "\n";
}

void stage_detect(const ExperimentPlan& plan, const fs::path& out) {
    StageTimer timer;
    fs::create_directories(out / "pvalues");
    parallel_for(static_cast<int>(plan.grid.size()), plan.jobs, [&](int i) {
        const int id = plan.grid[static_cast<std::size_t>(i)].id;
        const SeriesBundle bundle = read_bundle(bundle_csv(out, id), bundle_json(out, id));
        std::vector<PValueMatrix> matrices;
        matrices.reserve(bundle.series.size());
        for (const auto& entry : bundle.series)
            matrices.push_back(run_detectors(entry.series, plan.detectors, plan.m, plan.divisor));
        write_pvalues(matrices, id, pvalue_csv(out, id));
    });
    write_manifest(out, "detect", plan, timer.seconds());
    std::cout << "wrote detector p-values for " << plan.grid.size() << " cases\n";
}

void stage_dataset(const ExperimentPlan& plan, const fs::path& out) {
    StageTimer timer;
    fs::create_directories(out / "datasets");
    int fusion_methods = 0;
    for (const auto& method : plan.methods)
        if (method.kind == MethodSpec::Kind::Fusion) ++fusion_methods;
    if (fusion_methods == 0) {
        std::cout << "no fusion methods requested; nothing to assemble\n";
        return;
    }
    parallel_for(static_cast<int>(plan.grid.size()), plan.jobs, [&](int i) {
        const int id = plan.grid[static_cast<std::size_t>(i)].id;
        const SeriesBundle bundle = read_bundle(bundle_csv(out, id), bundle_json(out, id));
        const auto pvalues = read_pvalues(pvalue_csv(out, id), id);
        for (const auto& method : plan.methods) {
            if (method.kind != MethodSpec::Kind::Fusion) continue;
            FusionConfig fusion = method.fusion;
            fusion.mean_window = plan.m;
            auto [train, eval] = assemble(bundle, pvalues, fusion);
            const std::string name = method.name();
            write_dataset(train, dataset_csv(out, id, name, "train"),
                          rows_csv(out, id, name, "train"));
            write_dataset(eval, dataset_csv(out, id, name, "eval"),
                          rows_csv(out, id, name, "eval"));
        }
    });
    write_manifest(out, "dataset", plan, timer.seconds());
    std::cout << "assembled datasets for " << fusion_methods << " fusion methods\n";
}

void stage_train(const ExperimentPlan& plan, const fs::path& out) {
    StageTimer timer;
    fs::create_directories(out / "models");
    std::vector<std::pair<int, const MethodSpec*>> units;
    for (const auto& spec : plan.grid) {
        for (const auto& method : plan.methods) {
            if (method.kind == MethodSpec::Kind::Fusion) units.emplace_back(spec.id, &method);
        }
    }
    parallel_for(static_cast<int>(units.size()), plan.jobs, [&](int u) {
        const auto [id, method] = units[static_cast<std::size_t>(u)];
        const std::string name = method->name();
        const StackDataset train =
            read_dataset(dataset_csv(out, id, name, "train"), rows_csv(out, id, name, "train"));
        ForestParams params = plan.forest;
        params.seed = derive_seed(plan.seed, id, name);
        const ForestModel model =
            fit_forest(train.features, train.targets, train.columns, params, 1);
        save_forest(model, model_json(out, id, name));
    });
    write_manifest(out, "train", plan, timer.seconds());
    std::cout << "trained " << units.size() << " fusion models\n";
}

void stage_evaluate(const ExperimentPlan& plan, const fs::path& out, bool curves) {
    StageTimer timer;
    if (curves) fs::create_directories(out / "curves");
    std::vector<CaseResult> results(plan.grid.size());
    parallel_for(static_cast<int>(plan.grid.size()), plan.jobs, [&](int i) {
        const TestCaseSpec& spec = plan.grid[static_cast<std::size_t>(i)];
        const SeriesBundle bundle = read_bundle(bundle_csv(out, spec.id), bundle_json(out, spec.id));
        const auto pvalues = read_pvalues(pvalue_csv(out, spec.id), spec.id);
        CaseResult result;
        result.test_case = spec.id;
        result.subset = subset_label(spec);
        std::ofstream curve_out;
        if (curves) {
            curve_out.open(out / "curves" / ("case_" + std::to_string(spec.id) + ".csv"));
            curve_out << "method,x,y\n";
            curve_out.precision(17);
        }
        for (const auto& method : plan.methods) {
            std::vector<ScoredWeek> scored;
            if (method.kind == MethodSpec::Kind::BaseDetector) {
                scored = score_method(method, bundle, pvalues, plan);
            } else {
                const std::string name = method.name();
                const ForestModel model = load_forest(model_json(out, spec.id, name));
                const StackDataset eval = read_dataset(dataset_csv(out, spec.id, name, "eval"),
                                                       rows_csv(out, spec.id, name, "eval"));
                std::vector<double> row;
                for (std::size_t r = 0; r < eval.n_rows(); ++r) {
                    eval.gather_row(r, row);
                    const int series = eval.rows[r].series;
                    const int week = eval.rows[r].week;
                    bool outbreak = false;
                    int span_id = -1;
                    const auto& spans =
                        bundle.series[static_cast<std::size_t>(series)].eval_spans;
                    for (std::size_t j = 0; j < spans.size(); ++j) {
                        if (spans[j].active(week)) {
                            outbreak = true;
                            span_id = static_cast<int>(j);
                        }
                    }
                    scored.push_back({series, week, model.predict_proba(row), outbreak, span_id});
                }
            }
            result.dauc[method.name()] = dauc(scored, plan.e);
            result.pauc[method.name()] = pauc(scored, plan.e);
            if (curves) {
                std::string label = method.name();
                if (label.find(',') != std::string::npos) label = '"' + label + '"';
                const Curve curve = detection_curve(scored);
                for (const auto& p : curve.points)
                    curve_out << label << ',' << p.x << ',' << p.y << '\n';
            }
        }
        results[static_cast<std::size_t>(i)] = std::move(result);
    });
    write_results(results, out / "results.csv");
    if (plan.fixed_k) {
        write_boxplot(results, *plan.fixed_k,
                      out / ("boxplot_k" + std::to_string(*plan.fixed_k) + ".csv"));
    }
    write_manifest(out, "evaluate", plan, timer.seconds());
    std::cout << "evaluated " << plan.methods.size() << " methods on " << plan.grid.size()
              << " cases -> " << (out / "results.csv") << "\n";
}

void stage_rank(const ExperimentPlan& plan, const fs::path& out) {
    StageTimer timer;
    const auto results = read_results(out / "results.csv", plan.grid);
    std::vector<std::string> names;
    for (const auto& method : plan.methods) names.push_back(method.name());
    const RankTable table = rank_results(results, names);
    write_ranks(table, out / "ranks.csv");
    write_manifest(out, "rank", plan, timer.seconds());
    std::cout << "ranked " << names.size() << " methods -> " << (out / "ranks.csv") << "\n";
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
        std::printf("  %-14s overall %.3f\n", table.methods[m].c_str(), table.avg_rank[m][0]);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"statistical syndromic surveillance: detectors, fusion, evaluation"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto* gen = app.add_subcommand("generate", "generate synthetic bundles");
    add_common(gen, opts);
    gen->add_option("--k", opts.k_mode, "outbreak size: uniform or fixed:<int>");
    gen->add_option("--series", opts.n_series, "series per test case");

    auto* det = app.add_subcommand("detect", "run detectors over generated bundles");
    add_common(det, opts);
    det->add_option("--m", opts.m, "reference window length");
    det->add_option("--variance-divisor", opts.divisor, "m (population) or m-1 (sample)");

    auto* dat = app.add_subcommand("dataset", "assemble fusion datasets");
    add_common(dat, opts);
    dat->add_option("--methods", opts.methods, "comma-separated method list");

    auto* tra = app.add_subcommand("train", "train fusion models");
    add_common(tra, opts);
    tra->add_option("--methods", opts.methods, "comma-separated method list");
    tra->add_option("--trees", opts.n_trees, "trees per forest");
    tra->add_option("--min-leaf", opts.min_leaf, "minimum samples per leaf");

    auto* eva = app.add_subcommand("evaluate", "score methods and write results.csv");
    add_common(eva, opts);
    eva->add_option("--methods", opts.methods, "comma-separated method list");
    eva->add_option("--e", opts.e, "false-alarm budget for the partial areas");
    eva->add_option("--k", opts.k_mode, "k mode used at generation (for boxplot rows)");
    eva->add_flag("--curves", opts.curves, "dump detection curves per case");

    auto* ran = app.add_subcommand("rank", "aggregate results.csv into ranks.csv");
    add_common(ran, opts);
    ran->add_option("--methods", opts.methods, "comma-separated method list");

    auto* exp = app.add_subcommand("experiment", "run every stage in order");
    add_common(exp, opts);
    exp->add_option("--methods", opts.methods, "comma-separated method list");
    exp->add_option("--e", opts.e, "false-alarm budget");
    exp->add_option("--k", opts.k_mode, "outbreak size: uniform or fixed:<int>");
    exp->add_option("--series", opts.n_series, "series per test case");
    exp->add_option("--m", opts.m, "reference window length");
    exp->add_option("--variance-divisor", opts.divisor, "m (population) or m-1 (sample)");
    exp->add_option("--trees", opts.n_trees, "trees per forest");
    exp->add_option("--min-leaf", opts.min_leaf, "minimum samples per leaf");
    exp->add_flag("--curves", opts.curves, "dump detection curves per case");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1; // help/version exit 0, usage errors 1
    }

    try {
        const ExperimentPlan plan = make_plan(opts);
        const fs::path out(opts.out_dir);
        fs::create_directories(out);
        if (gen->parsed()) {
            stage_generate(plan, out);
        } else if (det->parsed()) {
            stage_detect(plan, out);
        } else if (dat->parsed()) {
            stage_dataset(plan, out);
        } else if (tra->parsed()) {
            stage_train(plan, out);
        } else if (eva->parsed()) {
            stage_evaluate(plan, out, opts.curves);
        } else if (ran->parsed()) {
            stage_rank(plan, out);
        } else if (exp->parsed()) {
            stage_generate(plan, out);
            stage_detect(plan, out);
            stage_dataset(plan, out);
            stage_train(plan, out);
            stage_evaluate(plan, out, opts.curves);
            stage_rank(plan, out);
        }
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
