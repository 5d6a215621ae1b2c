// pipeline.hpp -- experiment orchestration over the library modules.
//
// A method under comparison is either a base detector (scored as 1 - p on
// the evaluation weeks) or a fusion configuration (a forest trained on the
// baseline weeks, scored by its probability output). Results are dAUC/pAUC
// at the configured false-alarm budget, per test case, plus rank tables.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "survstack/core.hpp"
#include "survstack/detectors.hpp"
#include "survstack/eval.hpp"
#include "survstack/forest.hpp"
#include "survstack/stacking.hpp"
#include "survstack/synthgen.hpp"

namespace survstack {

struct MethodSpec {
    enum class Kind { BaseDetector, Fusion };
    Kind kind = Kind::BaseDetector;
    Detector detector = Detector::C1;
    FusionConfig fusion;

    std::string name() const;
    // "C1".."RKI" or M(a,o,w) fusion notation.
    static MethodSpec parse(std::string_view text);
};

std::vector<MethodSpec> parse_method_list(const std::string& comma_separated);

struct ExperimentPlan {
    std::vector<TestCaseSpec> grid;
    std::uint64_t seed = 7;
    std::vector<Detector> detectors{kAllDetectors.begin(), kAllDetectors.end()};
    std::vector<MethodSpec> methods;
    double e = 0.01;
    std::optional<int> fixed_k; // overrides every spec's outbreak-size mode
    int n_series = 100;
    int m = 7;
    VarianceDivisor divisor = VarianceDivisor::Population;
    ForestParams forest;
    int jobs = 1;
};

// Default comparison set: the five detectors plus S(mu,O3,1) and P(mu,O3,1).
std::vector<MethodSpec> default_methods();

struct CaseResult {
    int test_case = 0;
    std::string subset;
    std::map<std::string, double> dauc; // method -> value
    std::map<std::string, double> pauc;
};

// Deterministic in (spec, plan): generation, detection, training and
// scoring all derive their randomness from plan.seed.
CaseResult run_case(const TestCaseSpec& spec, const ExperimentPlan& plan);

// All grid cases, parallel across cases up to plan.jobs.
std::vector<CaseResult> run_experiment(const ExperimentPlan& plan);

// Scored evaluation weeks for one method on one prepared bundle.
std::vector<ScoredWeek> score_method(const MethodSpec& method, const SeriesBundle& bundle,
                                     const std::vector<PValueMatrix>& pvalues,
                                     const ExperimentPlan& plan);

RankTable rank_results(const std::vector<CaseResult>& results,
                       const std::vector<std::string>& methods);

// results.csv: test_case,method,dauc_1pct,pauc_1pct
void write_results(const std::vector<CaseResult>& results, const std::filesystem::path& path);
std::vector<CaseResult> read_results(const std::filesystem::path& path,
                                     const std::vector<TestCaseSpec>& grid);

// ranks.csv: method,subset,avg_rank
void write_ranks(const RankTable& table, const std::filesystem::path& path);

// boxplot_k<k>.csv rows for fixed-k sweeps:
// method,k,test_case,dauc_1pct,pauc_1pct. One file per k so reruns
// rewrite rather than append; concatenate for plotting.
void write_boxplot(const std::vector<CaseResult>& results, int k,
                   const std::filesystem::path& path);

// Stable hash of the plan's observable configuration, used in manifests.
std::uint64_t plan_config_hash(const ExperimentPlan& plan);

// manifest_<stage>.json next to stage outputs: seed, config hash, timing.
void write_manifest(const std::filesystem::path& out_dir, const std::string& stage,
                    const ExperimentPlan& plan, double elapsed_seconds);

std::uint64_t derive_seed(std::uint64_t base, std::int64_t item, std::string_view tag);

} // namespace survstack
