#include "survstack/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "survstack/core.hpp"
#include "survstack/rng.hpp"

namespace survstack {

using nlohmann::json;

double DecisionTree::predict(std::span<const double> row) const {
    int node = 0;
    while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
        const TreeNode& n = nodes[static_cast<std::size_t>(node)];
        node = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

double ForestModel::predict_proba(std::span<const double> row) const {
    if (row.size() != columns.size())
        throw std::invalid_argument("predict_proba: row does not match training schema");
    if (single_class) return constant_value;
    double sum = 0.0;
    for (const auto& tree : trees) sum += tree.predict(row);
    return sum / static_cast<double>(trees.size());
}

namespace {

constexpr double kMinGain = 1e-12;

struct NodeWork {
    int node_index;
    std::size_t begin;
    std::size_t end;
};

class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::vector<double>>& columns,
                const std::vector<std::uint8_t>& y, const ForestParams& params, int n_subset,
                bool nonneg)
        : columns_(columns), y_(y), params_(params), n_subset_(n_subset), nonneg_(nonneg) {
        feature_pool_.resize(columns.size());
        for (std::size_t f = 0; f < columns.size(); ++f) feature_pool_[f] = static_cast<int>(f);
    }

    DecisionTree build(std::vector<std::uint32_t> indices, RngStream& rng) {
        DecisionTree tree;
        tree.nodes.reserve(256);
        tree.nodes.emplace_back();
        std::vector<NodeWork> stack;
        stack.push_back({0, 0, indices.size()});
        while (!stack.empty()) {
            const NodeWork work = stack.back();
            stack.pop_back();
            grow(tree, work, indices, rng, stack);
        }
        return tree;
    }

private:
    struct Split {
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
        bool valid() const { return feature >= 0; }
    };

    double weight_of(std::size_t count_pos, std::size_t count_neg) const {
        return params_.positive_weight * static_cast<double>(count_pos) +
               static_cast<double>(count_neg);
    }

    double gini(std::size_t count_pos, std::size_t count_neg) const {
        const double w = weight_of(count_pos, count_neg);
        if (w <= 0.0) return 0.0;
        const double p = params_.positive_weight * static_cast<double>(count_pos) / w;
        const double q = static_cast<double>(count_neg) / w;
        return 1.0 - p * p - q * q;
    }

    void grow(DecisionTree& tree, const NodeWork& work, std::vector<std::uint32_t>& indices,
              RngStream& rng, std::vector<NodeWork>& stack) {
        const std::size_t n = work.end - work.begin;
        std::size_t pos = 0;
        for (std::size_t i = work.begin; i < work.end; ++i) pos += y_[indices[i]];
        const std::size_t neg = n - pos;

        TreeNode& node = tree.nodes[static_cast<std::size_t>(work.node_index)];
        node.n_samples = static_cast<int>(n);
        node.value = weight_of(pos, 0) / weight_of(pos, neg);

        const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        if (pos == 0 || neg == 0 || n < 2 * min_leaf) return;

        const Split split = best_split(work, indices, rng, pos, neg);
        if (!split.valid()) return;

        // Partition in place: left gets rows with value <= threshold.
        const auto& column = columns_[static_cast<std::size_t>(split.feature)];
        auto middle = std::partition(
            indices.begin() + static_cast<std::ptrdiff_t>(work.begin),
            indices.begin() + static_cast<std::ptrdiff_t>(work.end),
            [&](std::uint32_t r) { return column[r] <= split.threshold; });
        const auto mid = static_cast<std::size_t>(middle - indices.begin());

        TreeNode& parent = tree.nodes[static_cast<std::size_t>(work.node_index)];
        parent.feature = split.feature;
        parent.threshold = split.threshold;
        parent.left = static_cast<int>(tree.nodes.size());
        parent.right = parent.left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        const int left = tree.nodes[static_cast<std::size_t>(work.node_index)].left;
        const int right = tree.nodes[static_cast<std::size_t>(work.node_index)].right;
        // Left is processed first.
        stack.push_back({right, mid, work.end});
        stack.push_back({left, work.begin, mid});
    }

    // Candidate evaluation walks values in ascending order and considers a
    // boundary between every pair of distinct consecutive values. The given
    // callbacks fetch the i-th sorted value and label.
    template <typename Value, typename Label>
    void scan_boundaries(int feature, std::size_t n, std::size_t pos, double parent_gini,
                         double parent_weight, Value&& value_at, Label&& label_at, Split& best) {
        const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        std::size_t left_pos = 0;
        std::size_t i = 0;
        while (i < n) {
            const double value = value_at(i);
            while (i < n && value_at(i) == value) {
                left_pos += label_at(i);
                ++i;
            }
            if (i >= n) break; // no boundary after the last group
            if (i < min_leaf || n - i < min_leaf) continue;
            const std::size_t left_n = i;
            const std::size_t right_n = n - i;
            const std::size_t right_pos = pos - left_pos;
            const double wl = weight_of(left_pos, left_n - left_pos);
            const double wr = weight_of(right_pos, right_n - right_pos);
            const double gain = parent_gini -
                                (wl / parent_weight) * gini(left_pos, left_n - left_pos) -
                                (wr / parent_weight) * gini(right_pos, right_n - right_pos);
            if (gain <= kMinGain) continue;
            const double next = value_at(i);
            double threshold = value + (next - value) / 2.0;
            if (threshold >= next) threshold = value; // adjacent doubles
            if (gain > best.gain ||
                (gain == best.gain &&
                 (feature < best.feature ||
                  (feature == best.feature && threshold < best.threshold)))) {
                best = {gain, feature, threshold};
            }
        }
    }

    Split best_split(const NodeWork& work, const std::vector<std::uint32_t>& indices,
                     RngStream& rng, std::size_t pos, std::size_t neg) {
        const std::size_t n = work.end - work.begin;
        const double parent_gini = gini(pos, neg);
        const double parent_weight = weight_of(pos, neg);

        // Random feature subset, evaluated in ascending index order so
        // that equal gains break ties toward the lowest feature.
        const auto n_features = static_cast<int>(columns_.size());
        int chosen = n_subset_;
        if (chosen >= n_features) {
            chosen = n_features;
        } else {
            for (int i = 0; i < chosen; ++i) {
                const auto j = static_cast<std::size_t>(
                    rng.uniform_int(i, static_cast<std::int64_t>(n_features) - 1));
                std::swap(feature_pool_[static_cast<std::size_t>(i)], feature_pool_[j]);
            }
        }
        std::sort(feature_pool_.begin(), feature_pool_.begin() + chosen);

        Split best;
        for (int fi = 0; fi < chosen; ++fi) {
            const int feature = feature_pool_[static_cast<std::size_t>(fi)];
            const auto& column = columns_[static_cast<std::size_t>(feature)];
            if (nonneg_) {
                // Non-negative doubles share the ordering of their bit
                // patterns, so value and label pack into one sortable key.
                keys_.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const std::uint32_t r = indices[work.begin + i];
                    std::uint64_t bits;
                    std::memcpy(&bits, &column[r], sizeof(bits));
                    keys_[i] = (bits << 1) | y_[r];
                }
                std::sort(keys_.begin(), keys_.end());
                auto value_at = [this](std::size_t i) {
                    const std::uint64_t bits = keys_[i] >> 1;
                    double v;
                    std::memcpy(&v, &bits, sizeof(v));
                    return v;
                };
                auto label_at = [this](std::size_t i) {
                    return static_cast<std::size_t>(keys_[i] & 1);
                };
                scan_boundaries(feature, n, pos, parent_gini, parent_weight, value_at, label_at,
                                best);
            } else {
                scratch_.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const std::uint32_t r = indices[work.begin + i];
                    scratch_[i] = {column[r], y_[r]};
                }
                std::sort(scratch_.begin(), scratch_.end(),
                          [](const Entry& a, const Entry& b) { return a.value < b.value; });
                auto value_at = [this](std::size_t i) { return scratch_[i].value; };
                auto label_at = [this](std::size_t i) {
                    return static_cast<std::size_t>(scratch_[i].label);
                };
                scan_boundaries(feature, n, pos, parent_gini, parent_weight, value_at, label_at,
                                best);
            }
        }
        return best;
    }

    struct Entry {
        double value;
        std::uint8_t label;
    };

    const std::vector<std::vector<double>>& columns_;
    const std::vector<std::uint8_t>& y_;
    const ForestParams& params_;
    int n_subset_;
    bool nonneg_ = false;
    std::vector<int> feature_pool_;
    std::vector<Entry> scratch_;
    std::vector<std::uint64_t> keys_;
};

} // namespace

ForestModel fit_forest(const std::vector<std::vector<double>>& feature_columns,
                       const std::vector<std::uint8_t>& targets,
                       std::vector<std::string> column_names, const ForestParams& params,
                       int jobs) {
    if (feature_columns.empty()) throw std::invalid_argument("fit_forest: no features");
    const std::size_t n = targets.size();
    if (n == 0) throw std::invalid_argument("fit_forest: no rows");
    for (const auto& column : feature_columns) {
        if (column.size() != n) throw std::invalid_argument("fit_forest: ragged feature columns");
    }
    if (column_names.size() != feature_columns.size())
        throw std::invalid_argument("fit_forest: column names do not match features");
    if (params.n_trees < 1 || params.min_samples_leaf < 1)
        throw std::invalid_argument("fit_forest: bad parameters");

    ForestModel model;
    model.params = params;
    model.columns = std::move(column_names);

    std::size_t pos = 0;
    for (auto t : targets) pos += t;
    if (pos == 0 || pos == n) {
        model.single_class = true;
        model.constant_value = pos == 0 ? 0.0 : 1.0;
        return model;
    }

    int n_subset;
    if (params.max_features == 0) {
        n_subset = static_cast<int>(
            std::ceil(std::sqrt(static_cast<double>(feature_columns.size()))));
    } else if (params.max_features < 0) {
        n_subset = static_cast<int>(feature_columns.size());
    } else {
        n_subset = std::min<int>(params.max_features, static_cast<int>(feature_columns.size()));
    }

    bool nonneg = true;
    for (const auto& column : feature_columns) {
        for (double v : column) {
            if (!std::isfinite(v)) throw std::invalid_argument("fit_forest: non-finite feature");
            nonneg = nonneg && !std::signbit(v);
        }
    }

    model.trees.resize(static_cast<std::size_t>(params.n_trees));
    parallel_for(params.n_trees, jobs, [&](int t) {
        RngStream rng = derive_stream(params.seed, {0, t, "tree"});
        std::vector<std::uint32_t> indices(n);
        if (params.bootstrap) {
            for (auto& idx : indices)
                idx = static_cast<std::uint32_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
        } else {
            for (std::size_t i = 0; i < n; ++i) indices[i] = static_cast<std::uint32_t>(i);
        }
        TreeBuilder builder(feature_columns, targets, params, n_subset, nonneg);
        model.trees[static_cast<std::size_t>(t)] = builder.build(std::move(indices), rng);
    });
    return model;
}

namespace {

json node_to_json(const DecisionTree& tree, int index) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
    if (node.is_leaf()) {
        return json{{"fraction", node.value}, {"n", node.n_samples}};
    }
    return json{{"feature", node.feature},
                {"threshold", node.threshold},
                {"n", node.n_samples},
                {"left", node_to_json(tree, node.left)},
                {"right", node_to_json(tree, node.right)}};
}

int node_from_json(const json& j, DecisionTree& tree) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.contains("feature")) {
        tree.nodes[static_cast<std::size_t>(index)].feature = j.at("feature").get<int>();
        tree.nodes[static_cast<std::size_t>(index)].threshold = j.at("threshold").get<double>();
        tree.nodes[static_cast<std::size_t>(index)].n_samples = j.at("n").get<int>();
        const int left = node_from_json(j.at("left"), tree);
        const int right = node_from_json(j.at("right"), tree);
        tree.nodes[static_cast<std::size_t>(index)].left = left;
        tree.nodes[static_cast<std::size_t>(index)].right = right;
    } else {
        tree.nodes[static_cast<std::size_t>(index)].value = j.at("fraction").get<double>();
        tree.nodes[static_cast<std::size_t>(index)].n_samples = j.at("n").get<int>();
    }
    return index;
}

} // namespace

void save_forest(const ForestModel& model, const std::filesystem::path& path) {
    json j;
    j["params"] = json{{"n_trees", model.params.n_trees},
                       {"min_samples_leaf", model.params.min_samples_leaf},
                       {"max_features", model.params.max_features},
                       {"bootstrap", model.params.bootstrap},
                       {"seed", model.params.seed},
                       {"positive_weight", model.params.positive_weight}};
    j["columns"] = model.columns;
    j["single_class"] = model.single_class;
    j["constant_value"] = model.constant_value;
    json trees = json::array();
    for (const auto& tree : model.trees) trees.push_back(node_to_json(tree, 0));
    j["trees"] = std::move(trees);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << j.dump() << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ForestModel load_forest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j = json::parse(in);
    ForestModel model;
    const auto& p = j.at("params");
    model.params.n_trees = p.at("n_trees").get<int>();
    model.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
    model.params.max_features = p.at("max_features").get<int>();
    model.params.bootstrap = p.at("bootstrap").get<bool>();
    model.params.seed = p.at("seed").get<std::uint64_t>();
    model.params.positive_weight = p.at("positive_weight").get<double>();
    model.columns = j.at("columns").get<std::vector<std::string>>();
    model.single_class = j.at("single_class").get<bool>();
    model.constant_value = j.at("constant_value").get<double>();
    for (const auto& tj : j.at("trees")) {
        DecisionTree tree;
        node_from_json(tj, tree);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

} // namespace survstack
