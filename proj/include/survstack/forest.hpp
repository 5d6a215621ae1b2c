// forest.hpp -- randomized decision-tree ensemble for binary targets.
//
// Trees are grown on bootstrap resamples with Gini splits over a random
// feature subset per node; the ensemble score is the unweighted mean of
// leaf positive fractions, giving a ranking score in [0,1].

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace survstack {

struct ForestParams {
    int n_trees = 100;
    int min_samples_leaf = 5;
    // 0: ceil(sqrt(#features)); -1: all features; k > 0: exactly k.
    int max_features = 0;
    bool bootstrap = true;
    std::uint64_t seed = 0;
    // Weight applied to positive rows in impurity and leaf fractions;
    // 1.0 leaves classes unweighted.
    double positive_weight = 1.0;
};

struct TreeNode {
    int feature = -1; // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0; // leaf positive fraction
    int n_samples = 0;

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    double predict(std::span<const double> row) const;
};

struct ForestModel {
    ForestParams params;
    std::vector<std::string> columns;
    std::vector<DecisionTree> trees;
    // Training data had a single class; the model is the constant
    // indicator of that class.
    bool single_class = false;
    double constant_value = 0.0;

    // Mean over trees of leaf positive fractions. Throws
    // std::invalid_argument if row length differs from the schema.
    double predict_proba(std::span<const double> row) const;
};

// feature_columns is column-major: feature_columns[c][r]. Deterministic in
// (data, params); trees may be trained on up to `jobs` threads without
// changing the result.
ForestModel fit_forest(const std::vector<std::vector<double>>& feature_columns,
                       const std::vector<std::uint8_t>& targets,
                       std::vector<std::string> column_names, const ForestParams& params,
                       int jobs = 1);

// Self-describing JSON: params, column names, trees as nested nodes.
// Loading restores predictions exactly.
void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path);

} // namespace survstack
