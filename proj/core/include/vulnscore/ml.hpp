#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vulnscore/cvss3.hpp"
#include "vulnscore/features.hpp"

namespace vulnscore::ml {

struct ExampleKey {
    std::string program;
    std::string version;
    std::string function;

    friend auto operator<=>(const ExampleKey&, const ExampleKey&) = default;
};

struct LabeledExample {
    ExampleKey key;
    FeatureVector features;
    cvss3::Vector labels;
};

/// Labeled examples sharing one feature mode. Keys are unique.
class Dataset {
public:
    Dataset() = default;
    /// Throws ValidationError on a duplicate key.
    Dataset(std::vector<LabeledExample> examples, FeatureMode mode);

    const std::vector<LabeledExample>& examples() const noexcept { return examples_; }
    FeatureMode feature_mode() const noexcept { return mode_; }
    std::size_t size() const noexcept { return examples_.size(); }
    bool empty() const noexcept { return examples_.empty(); }

    /// Subset in the order given by `indices`.
    Dataset subset(std::span<const std::size_t> indices) const;

    /// Projected feature rows, one per example.
    std::vector<std::vector<double>> feature_rows() const;
    std::vector<int> labels(cvss3::Metric metric) const;

    /// SHA-256 over a canonical rendering of keys, features and labels.
    std::string digest() const;

private:
    std::vector<LabeledExample> examples_;
    FeatureMode mode_ = FeatureMode::Extended10;
};

/// Deterministic shuffle by `seed`; the first floor(train_fraction * n)
/// examples form the training set. Throws DomainError when either side would
/// be empty.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction,
                                          std::uint64_t seed);

/// k near-equal folds over a seeded shuffle; the first n % k folds hold one
/// extra example. Entry i trains on every fold but i and validates on fold i.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int k, std::uint64_t seed);
std::vector<std::pair<Dataset, Dataset>> kfold(const Dataset& train, int k, std::uint64_t seed);

enum class Algorithm { RandomForest, NaiveBayes };

std::string_view algorithm_name(Algorithm a) noexcept;
/// "rf" / "nb".
Algorithm algorithm_from_name(std::string_view name);

struct ForestParams {
    int trees = 100;
    int max_depth = 16;
    int min_leaf = 1;
    bool bootstrap = true;
    /// Features examined per split; defaults to ceil(sqrt(d)).
    std::optional<int> features_per_split;
};

struct NaiveBayesParams {
    /// Added variance is this fraction of the largest per-feature variance.
    double var_smoothing = 1e-9;
};

struct TrainParams {
    ForestParams forest;
    NaiveBayesParams naive_bayes;
};

/// CART tree over dense feature rows; labels are metric value ordinals.
class DecisionTree {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        int label = 0;
    };

    int predict(std::span<const double> x) const;
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::size_t depth() const;

    nlohmann::json to_json(cvss3::Metric metric) const;
    static DecisionTree from_json(const nlohmann::json& j, cvss3::Metric metric, std::size_t dim);

private:
    friend class TreeBuilder;
    std::vector<Node> nodes_;
};

class RandomForest {
public:
    RandomForest(cvss3::Metric metric, std::size_t dim, std::vector<DecisionTree> trees);
    int predict(std::span<const double> x) const;
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

    nlohmann::json to_json() const;
    static RandomForest from_json(const nlohmann::json& j, cvss3::Metric metric, std::size_t dim);

private:
    cvss3::Metric metric_;
    std::size_t dim_;
    std::vector<DecisionTree> trees_;
};

/// Gaussian class-conditional model over the classes seen in training.
class GaussianNaiveBayes {
public:
    GaussianNaiveBayes(cvss3::Metric metric, std::vector<int> classes, std::vector<double> priors,
                       std::vector<std::vector<double>> means,
                       std::vector<std::vector<double>> variances);

    int predict(std::span<const double> x) const;
    const std::vector<int>& classes() const noexcept { return classes_; }
    const std::vector<std::vector<double>>& variances() const noexcept { return variances_; }

    nlohmann::json to_json() const;
    static GaussianNaiveBayes from_json(const nlohmann::json& j, cvss3::Metric metric,
                                        std::size_t dim);

private:
    cvss3::Metric metric_;
    std::vector<int> classes_;
    std::vector<double> log_priors_;
    std::vector<double> priors_;
    std::vector<std::vector<double>> means_;
    std::vector<std::vector<double>> variances_;
};

/// A trained single-metric classifier of either family.
class Classifier {
public:
    Classifier(RandomForest rf, cvss3::Metric metric, std::size_t dim);
    Classifier(GaussianNaiveBayes nb, cvss3::Metric metric, std::size_t dim);

    cvss3::Metric metric() const noexcept { return metric_; }
    std::size_t dimension() const noexcept { return dim_; }
    Algorithm algorithm() const noexcept;

    /// Throws DomainError when x has the wrong dimension.
    int predict(std::span<const double> x) const;

    nlohmann::json to_json() const;
    static Classifier from_json(const nlohmann::json& j, cvss3::Metric metric, std::size_t dim);

    const std::variant<RandomForest, GaussianNaiveBayes>& model() const noexcept { return model_; }

private:
    std::variant<RandomForest, GaussianNaiveBayes> model_;
    cvss3::Metric metric_;
    std::size_t dim_;
};

Classifier train_random_forest(const Dataset& train, cvss3::Metric metric,
                               const ForestParams& params, std::uint64_t seed);
Classifier train_naive_bayes(const Dataset& train, cvss3::Metric metric,
                             const NaiveBayesParams& params, std::uint64_t seed);
Classifier train_classifier(const Dataset& train, cvss3::Metric metric, Algorithm algo,
                            const TrainParams& params, std::uint64_t seed);

/// Fraction of examples whose predicted metric value equals the label.
double classifier_accuracy(const Classifier& c, const Dataset& d);

struct CrossValidated {
    Classifier classifier;
    std::size_t fold = 0;
    double validation_accuracy = 0.0;
    std::vector<double> fold_accuracies;
};

/// Trains one classifier per fold pair and keeps the one with the highest
/// validation accuracy; ties go to the lowest fold index.
CrossValidated cross_validate(const Dataset& train, cvss3::Metric metric, int k, Algorithm algo,
                              const TrainParams& params, std::uint64_t seed);

/// Most frequent value; ties go to the more severe value.
int tally_votes(std::span<const int> votes, cvss3::Metric metric);
int majority_vote(std::span<const Classifier> ensemble, std::span<const double> x,
                  cvss3::Metric metric);

struct EnsembleMember {
    std::uint64_t seed = 0;
    std::size_t fold = 0;
    double validation_accuracy = 0.0;
    Classifier classifier;
};

struct ModelMetadata {
    Algorithm algorithm = Algorithm::RandomForest;
    std::vector<std::uint64_t> seeds;
    FeatureMode feature_mode = FeatureMode::Extended10;
    std::string training_digest;
    int kfolds = 4;
    std::size_t training_examples = 0;
    TrainParams params;
};

inline constexpr std::size_t kEnsembleSize = 10;
inline constexpr std::string_view kModelFormat = "vulnscore-model/1";

/// One voting ensemble of kEnsembleSize cross-validated classifiers per metric.
class TrainedModelSet {
public:
    TrainedModelSet(ModelMetadata metadata, std::array<std::vector<EnsembleMember>, 8> ensembles);

    const ModelMetadata& metadata() const noexcept { return metadata_; }
    const std::vector<EnsembleMember>& ensemble(cvss3::Metric m) const {
        return ensembles_[static_cast<std::size_t>(m)];
    }
    std::size_t dimension() const noexcept { return feature_dimension(metadata_.feature_mode); }

    int predict(cvss3::Metric m, std::span<const double> x) const;

    nlohmann::json to_json() const;
    static TrainedModelSet from_json(const nlohmann::json& j);

private:
    ModelMetadata metadata_;
    std::array<std::vector<EnsembleMember>, 8> ensembles_;
};

/// `seeds` must hold exactly kEnsembleSize values. Up to `jobs` threads train
/// (metric, seed) pairs; the result does not depend on `jobs`.
TrainedModelSet train_model_set(const Dataset& train, Algorithm algo, int k,
                                std::span<const std::uint64_t> seeds,
                                const TrainParams& params = {}, unsigned jobs = 1);

/// x must have the model's feature dimension.
cvss3::Vector predict_metrics(const TrainedModelSet& m, std::span<const double> x);
cvss3::Vector predict_metrics(const TrainedModelSet& m, const FeatureVector& x);

/// Throws DomainError for an empty test set or a feature-mode mismatch.
double accuracy(const TrainedModelSet& m, const Dataset& test, cvss3::Metric metric);

}  // namespace vulnscore::ml
