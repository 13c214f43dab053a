#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "rng.hpp"
#include "vulnscore/digest.hpp"
#include "vulnscore/error.hpp"
#include "vulnscore/ml.hpp"

namespace vulnscore::ml {

Dataset::Dataset(std::vector<LabeledExample> examples, FeatureMode mode)
    : examples_(std::move(examples)), mode_(mode) {
    std::set<ExampleKey> keys;
    for (const auto& e : examples_) {
        if (!keys.insert(e.key).second) {
            throw ValidationError("dataset", "duplicate key " + e.key.program + " " +
                                                 e.key.version + " " + e.key.function);
        }
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.mode_ = mode_;
    out.examples_.reserve(indices.size());
    for (auto i : indices) out.examples_.push_back(examples_.at(i));
    return out;
}

std::vector<std::vector<double>> Dataset::feature_rows() const {
    std::vector<std::vector<double>> rows;
    rows.reserve(examples_.size());
    for (const auto& e : examples_) rows.push_back(e.features.project(mode_));
    return rows;
}

std::vector<int> Dataset::labels(cvss3::Metric metric) const {
    std::vector<int> out;
    out.reserve(examples_.size());
    for (const auto& e : examples_) out.push_back(e.labels.get(metric));
    return out;
}

std::string Dataset::digest() const {
    std::string canonical(feature_mode_name(mode_));
    canonical += '\n';
    char buf[32];
    for (const auto& e : examples_) {
        canonical += e.key.program + '\t' + e.key.version + '\t' + e.key.function;
        for (double v : e.features.project(mode_)) {
            std::snprintf(buf, sizeof buf, "\t%.17g", v);
            canonical += buf;
        }
        canonical += '\t' + cvss3::serialize_vector(e.labels) + '\n';
    }
    return sha256_hex(canonical);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction,
                                          std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw DomainError("train fraction must lie strictly between 0 and 1");
    }
    const std::size_t n = d.size();
    if (n < 2) throw DomainError("dataset too small to split: " + std::to_string(n) + " examples");
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train == n) {
        throw DomainError("split of " + std::to_string(n) + " examples leaves an empty side");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    detail::Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    const std::span<const std::size_t> all(order);
    return {d.subset(all.first(n_train)), d.subset(all.subspan(n_train))};
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw DomainError("k-fold needs k >= 2");
    if (static_cast<std::size_t>(k) > n) {
        throw DomainError("k = " + std::to_string(k) + " exceeds " + std::to_string(n) +
                          " training examples");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    detail::Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    const auto folds = static_cast<std::size_t>(k);
    std::vector<std::vector<std::size_t>> out(folds);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t size = n / folds + (f < n % folds ? 1 : 0);
        out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                      order.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return out;
}

std::vector<std::pair<Dataset, Dataset>> kfold(const Dataset& train, int k, std::uint64_t seed) {
    const auto folds = kfold_indices(train.size(), k, seed);
    std::vector<std::pair<Dataset, Dataset>> out;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> rest;
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g != f) rest.insert(rest.end(), folds[g].begin(), folds[g].end());
        }
        out.emplace_back(train.subset(rest), train.subset(folds[f]));
    }
    return out;
}

std::string_view algorithm_name(Algorithm a) noexcept {
    return a == Algorithm::RandomForest ? "rf" : "nb";
}

Algorithm algorithm_from_name(std::string_view name) {
    if (name == "rf") return Algorithm::RandomForest;
    if (name == "nb") return Algorithm::NaiveBayes;
    throw ParseError("unknown algorithm '" + std::string(name) + "' (expected rf or nb)");
}

}  // namespace vulnscore::ml
