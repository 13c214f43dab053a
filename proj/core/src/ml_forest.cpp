#include <algorithm>
#include <cmath>
#include <numeric>

#include "rng.hpp"
#include "vulnscore/error.hpp"
#include "vulnscore/ml.hpp"

namespace vulnscore::ml {

using json = nlohmann::json;

namespace {

/// Index of the most frequent class; ties go to the more severe value.
int plurality(std::span<const std::size_t> counts, cvss3::Metric metric) {
    int best = -1;
    for (int c = 0; c < static_cast<int>(counts.size()); ++c) {
        if (counts[c] == 0) continue;
        if (best < 0 || counts[c] > counts[best] ||
            (counts[c] == counts[best] &&
             cvss3::severity_rank(metric, c) > cvss3::severity_rank(metric, best))) {
            best = c;
        }
    }
    return best < 0 ? 0 : best;
}

double sum_of_squares(std::span<const std::size_t> counts) {
    double s = 0.0;
    for (auto c : counts) s += static_cast<double>(c) * static_cast<double>(c);
    return s;
}

}  // namespace

/// Grows one CART tree with Gini impurity on a (bootstrap) sample.
class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                cvss3::Metric metric, const ForestParams& params, std::size_t mtry,
                std::uint64_t seed)
        : rows_(rows),
          labels_(labels),
          metric_(metric),
          params_(params),
          mtry_(mtry),
          classes_(static_cast<std::size_t>(cvss3::value_count(metric))),
          rng_(seed) {}

    DecisionTree build(std::vector<std::size_t> sample) {
        DecisionTree tree;
        grow(tree, sample, 0);
        return tree;
    }

private:
    int grow(DecisionTree& tree, std::vector<std::size_t>& sample, int depth) {
        const int id = static_cast<int>(tree.nodes_.size());
        tree.nodes_.emplace_back();

        std::vector<std::size_t> counts(classes_, 0);
        for (auto i : sample) ++counts[static_cast<std::size_t>(labels_[i])];
        const int label = plurality(counts, metric_);
        tree.nodes_[id].label = label;

        const std::size_t n = sample.size();
        const bool pure = counts[static_cast<std::size_t>(label)] == n;
        const auto min_leaf = static_cast<std::size_t>(std::max(params_.min_leaf, 1));
        if (pure || depth >= params_.max_depth || n < 2 * min_leaf) return id;

        const std::size_t dim = rows_.front().size();
        std::vector<std::size_t> features(dim);
        std::iota(features.begin(), features.end(), std::size_t{0});
        rng_.shuffle(std::span<std::size_t>(features));

        const double parent = static_cast<double>(n) - sum_of_squares(counts) / static_cast<double>(n);
        double best_impurity = parent;
        int best_feature = -1;
        double best_threshold = 0.0;

        std::vector<std::size_t> order(sample);
        std::vector<std::size_t> left(classes_);
        std::vector<std::size_t> right(classes_);
        std::size_t examined = 0;
        for (std::size_t f : features) {
            if (examined >= mtry_ && best_feature >= 0) break;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return rows_[a][f] < rows_[b][f];
            });
            if (rows_[order.front()][f] == rows_[order.back()][f]) continue;  // constant here
            ++examined;

            std::fill(left.begin(), left.end(), 0);
            right = counts;
            for (std::size_t pos = 1; pos < n; ++pos) {
                const auto moved = static_cast<std::size_t>(labels_[order[pos - 1]]);
                ++left[moved];
                --right[moved];
                const double lo = rows_[order[pos - 1]][f];
                const double hi = rows_[order[pos]][f];
                if (lo == hi || pos < min_leaf || n - pos < min_leaf) continue;
                const auto nl = static_cast<double>(pos);
                const auto nr = static_cast<double>(n - pos);
                const double impurity =
                    (nl - sum_of_squares(left) / nl) + (nr - sum_of_squares(right) / nr);
                if (impurity < best_impurity - 1e-12) {
                    best_impurity = impurity;
                    best_feature = static_cast<int>(f);
                    best_threshold = lo + (hi - lo) / 2.0;
                    if (best_threshold >= hi) best_threshold = lo;
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> lhs;
        std::vector<std::size_t> rhs;
        for (auto i : sample) {
            (rows_[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? lhs : rhs).push_back(i);
        }
        sample.clear();
        sample.shrink_to_fit();

        const int l = grow(tree, lhs, depth + 1);
        const int r = grow(tree, rhs, depth + 1);
        auto& node = tree.nodes_[id];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    const std::vector<std::vector<double>>& rows_;
    const std::vector<int>& labels_;
    cvss3::Metric metric_;
    const ForestParams& params_;
    std::size_t mtry_;
    std::size_t classes_;
    detail::Rng rng_;
};

int DecisionTree::predict(std::span<const double> x) const {
    int id = 0;
    while (nodes_[static_cast<std::size_t>(id)].feature >= 0) {
        const auto& n = nodes_[static_cast<std::size_t>(id)];
        id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(id)].label;
}

std::size_t DecisionTree::depth() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes_[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return best;
}

namespace {

json node_to_json(const DecisionTree& tree, int id, cvss3::Metric metric) {
    const auto& n = tree.nodes()[static_cast<std::size_t>(id)];
    if (n.feature < 0) return {{"leaf_label", std::string(1, cvss3::value_letter(metric, n.label))}};
    return {{"feature_index", n.feature},
            {"threshold", n.threshold},
            {"left", node_to_json(tree, n.left, metric)},
            {"right", node_to_json(tree, n.right, metric)}};
}

}  // namespace

json DecisionTree::to_json(cvss3::Metric metric) const { return node_to_json(*this, 0, metric); }

DecisionTree DecisionTree::from_json(const json& j, cvss3::Metric metric, std::size_t dim) {
    DecisionTree tree;
    auto read = [&](auto&& self, const json& node, int depth) -> int {
        if (!node.is_object() || depth > 64) throw ValidationError("tree", "malformed tree node");
        const int id = static_cast<int>(tree.nodes_.size());
        tree.nodes_.emplace_back();
        if (auto leaf = node.find("leaf_label"); leaf != node.end()) {
            const auto s = leaf->get<std::string>();
            if (s.size() != 1) throw ValidationError("tree.leaf_label", "expected one letter");
            tree.nodes_[static_cast<std::size_t>(id)].label = cvss3::value_from_letter(metric, s[0]);
            return id;
        }
        const int feature = node.at("feature_index").get<int>();
        if (feature < 0 || static_cast<std::size_t>(feature) >= dim) {
            throw ValidationError("tree.feature_index", "out of range");
        }
        const double threshold = node.at("threshold").get<double>();
        const int l = self(self, node.at("left"), depth + 1);
        const int r = self(self, node.at("right"), depth + 1);
        auto& n = tree.nodes_[static_cast<std::size_t>(id)];
        n.feature = feature;
        n.threshold = threshold;
        n.left = l;
        n.right = r;
        return id;
    };
    read(read, j, 0);
    return tree;
}

RandomForest::RandomForest(cvss3::Metric metric, std::size_t dim, std::vector<DecisionTree> trees)
    : metric_(metric), dim_(dim), trees_(std::move(trees)) {
    if (trees_.empty()) throw DomainError("random forest needs at least one tree");
}

int RandomForest::predict(std::span<const double> x) const {
    std::vector<int> votes;
    votes.reserve(trees_.size());
    for (const auto& t : trees_) votes.push_back(t.predict(x));
    return tally_votes(votes, metric_);
}

json RandomForest::to_json() const {
    json trees = json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json(metric_));
    return {{"algorithm", "rf"}, {"trees", std::move(trees)}};
}

RandomForest RandomForest::from_json(const json& j, cvss3::Metric metric, std::size_t dim) {
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(DecisionTree::from_json(t, metric, dim));
    return RandomForest(metric, dim, std::move(trees));
}

Classifier train_random_forest(const Dataset& train, cvss3::Metric metric,
                               const ForestParams& params, std::uint64_t seed) {
    if (train.empty()) throw DomainError("cannot train on an empty dataset");
    if (params.trees < 1) throw DomainError("random forest needs at least one tree");
    const auto rows = train.feature_rows();
    const auto labels = train.labels(metric);
    const std::size_t dim = feature_dimension(train.feature_mode());
    const std::size_t mtry =
        params.features_per_split
            ? static_cast<std::size_t>(std::clamp(*params.features_per_split, 1, static_cast<int>(dim)))
            : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim))));

    std::vector<DecisionTree> trees;
    trees.reserve(static_cast<std::size_t>(params.trees));
    const std::size_t n = rows.size();
    for (int t = 0; t < params.trees; ++t) {
        const std::uint64_t tree_seed = detail::mix_seed(seed, static_cast<std::uint64_t>(t));
        std::vector<std::size_t> sample(n);
        if (params.bootstrap) {
            detail::Rng draw(detail::mix_seed(tree_seed, 0xb007));
            for (auto& s : sample) s = draw.below(n);
        } else {
            std::iota(sample.begin(), sample.end(), std::size_t{0});
        }
        TreeBuilder builder(rows, labels, metric, params, mtry, tree_seed);
        trees.push_back(builder.build(std::move(sample)));
    }
    return Classifier(RandomForest(metric, dim, std::move(trees)), metric, dim);
}

}  // namespace vulnscore::ml
