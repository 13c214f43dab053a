#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "rng.hpp"
#include "vulnscore/error.hpp"
#include "vulnscore/ml.hpp"

namespace vulnscore::ml {

using json = nlohmann::json;

Classifier::Classifier(RandomForest rf, cvss3::Metric metric, std::size_t dim)
    : model_(std::move(rf)), metric_(metric), dim_(dim) {}

Classifier::Classifier(GaussianNaiveBayes nb, cvss3::Metric metric, std::size_t dim)
    : model_(std::move(nb)), metric_(metric), dim_(dim) {}

Algorithm Classifier::algorithm() const noexcept {
    return std::holds_alternative<RandomForest>(model_) ? Algorithm::RandomForest
                                                        : Algorithm::NaiveBayes;
}

int Classifier::predict(std::span<const double> x) const {
    if (x.size() != dim_) {
        throw DomainError("classifier expects " + std::to_string(dim_) + " features, got " +
                          std::to_string(x.size()));
    }
    return std::visit([&](const auto& m) { return m.predict(x); }, model_);
}

json Classifier::to_json() const {
    return std::visit([](const auto& m) { return m.to_json(); }, model_);
}

Classifier Classifier::from_json(const json& j, cvss3::Metric metric, std::size_t dim) {
    const auto algo = j.at("algorithm").get<std::string>();
    if (algo == "rf") return Classifier(RandomForest::from_json(j, metric, dim), metric, dim);
    if (algo == "nb") return Classifier(GaussianNaiveBayes::from_json(j, metric, dim), metric, dim);
    throw ValidationError("classifier.algorithm", "unknown algorithm '" + algo + "'");
}

Classifier train_classifier(const Dataset& train, cvss3::Metric metric, Algorithm algo,
                            const TrainParams& params, std::uint64_t seed) {
    return algo == Algorithm::RandomForest
               ? train_random_forest(train, metric, params.forest, seed)
               : train_naive_bayes(train, metric, params.naive_bayes, seed);
}

double classifier_accuracy(const Classifier& c, const Dataset& d) {
    if (d.empty()) throw DomainError("accuracy of an empty dataset is undefined");
    std::size_t correct = 0;
    for (const auto& e : d.examples()) {
        if (c.predict(e.features.project(d.feature_mode())) == e.labels.get(c.metric())) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(d.size());
}

CrossValidated cross_validate(const Dataset& train, cvss3::Metric metric, int k, Algorithm algo,
                              const TrainParams& params, std::uint64_t seed) {
    const auto pairs = kfold(train, k, seed);
    std::optional<CrossValidated> best;
    std::vector<double> accuracies;
    for (std::size_t f = 0; f < pairs.size(); ++f) {
        const auto& [fit, validate] = pairs[f];
        auto model = train_classifier(fit, metric, algo, params, detail::mix_seed(seed, f + 1));
        const double acc = classifier_accuracy(model, validate);
        accuracies.push_back(acc);
        if (!best || acc > best->validation_accuracy) {
            best.emplace(CrossValidated{std::move(model), f, acc, {}});
        }
    }
    best->fold_accuracies = std::move(accuracies);
    return std::move(*best);
}

int tally_votes(std::span<const int> votes, cvss3::Metric metric) {
    if (votes.empty()) throw DomainError("cannot vote with an empty ensemble");
    std::vector<std::size_t> counts(static_cast<std::size_t>(cvss3::value_count(metric)), 0);
    for (int v : votes) ++counts.at(static_cast<std::size_t>(v));
    int best = -1;
    for (int c = 0; c < static_cast<int>(counts.size()); ++c) {
        const auto n = counts[static_cast<std::size_t>(c)];
        if (n == 0) continue;
        if (best < 0 || n > counts[static_cast<std::size_t>(best)] ||
            (n == counts[static_cast<std::size_t>(best)] &&
             cvss3::severity_rank(metric, c) > cvss3::severity_rank(metric, best))) {
            best = c;
        }
    }
    return best;
}

int majority_vote(std::span<const Classifier> ensemble, std::span<const double> x,
                  cvss3::Metric metric) {
    std::vector<int> votes;
    votes.reserve(ensemble.size());
    for (const auto& c : ensemble) votes.push_back(c.predict(x));
    return tally_votes(votes, metric);
}

// ---------------------------------------------------------------------------

TrainedModelSet::TrainedModelSet(ModelMetadata metadata,
                                 std::array<std::vector<EnsembleMember>, 8> ensembles)
    : metadata_(std::move(metadata)), ensembles_(std::move(ensembles)) {
    for (auto m : cvss3::kMetrics) {
        const auto& e = ensemble(m);
        if (e.size() != kEnsembleSize) {
            throw ValidationError(std::string("ensembles.") + std::string(cvss3::metric_name(m)),
                                  "expected " + std::to_string(kEnsembleSize) + " members, got " +
                                      std::to_string(e.size()));
        }
        for (const auto& member : e) {
            if (member.classifier.metric() != m || member.classifier.dimension() != dimension()) {
                throw ValidationError(std::string("ensembles.") + std::string(cvss3::metric_name(m)),
                                      "member does not match metric or feature mode");
            }
        }
    }
}

int TrainedModelSet::predict(cvss3::Metric m, std::span<const double> x) const {
    std::vector<int> votes;
    for (const auto& member : ensemble(m)) votes.push_back(member.classifier.predict(x));
    return tally_votes(votes, m);
}

json TrainedModelSet::to_json() const {
    const auto& p = metadata_.params;
    json params = {{"trees", p.forest.trees},
                   {"max_depth", p.forest.max_depth},
                   {"min_leaf", p.forest.min_leaf},
                   {"bootstrap", p.forest.bootstrap},
                   {"var_smoothing", p.naive_bayes.var_smoothing}};
    params["features_per_split"] =
        p.forest.features_per_split ? json(*p.forest.features_per_split) : json(nullptr);

    json ensembles = json::object();
    for (auto m : cvss3::kMetrics) {
        json members = json::array();
        for (const auto& member : ensemble(m)) {
            members.push_back({{"seed", member.seed},
                               {"fold", member.fold},
                               {"validation_accuracy", member.validation_accuracy},
                               {"classifier", member.classifier.to_json()}});
        }
        ensembles[std::string(cvss3::metric_name(m))] = std::move(members);
    }
    return {{"format", kModelFormat},
            {"metadata",
             {{"algorithm", algorithm_name(metadata_.algorithm)},
              {"seeds", metadata_.seeds},
              {"feature_mode", feature_mode_name(metadata_.feature_mode)},
              {"training_digest", metadata_.training_digest},
              {"training_examples", metadata_.training_examples},
              {"kfolds", metadata_.kfolds},
              {"ensemble", "majority vote over the per-seed cross-validation winners"},
              {"params", std::move(params)}}},
            {"ensembles", std::move(ensembles)}};
}

TrainedModelSet TrainedModelSet::from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != kModelFormat) {
            throw ValidationError("$.format", "unsupported model format");
        }
        const auto& md = j.at("metadata");
        ModelMetadata meta;
        meta.algorithm = algorithm_from_name(md.at("algorithm").get<std::string>());
        meta.seeds = md.at("seeds").get<std::vector<std::uint64_t>>();
        meta.feature_mode = feature_mode_from_name(md.at("feature_mode").get<std::string>());
        meta.training_digest = md.at("training_digest").get<std::string>();
        meta.training_examples = md.at("training_examples").get<std::size_t>();
        meta.kfolds = md.at("kfolds").get<int>();
        const auto& p = md.at("params");
        meta.params.forest.trees = p.at("trees").get<int>();
        meta.params.forest.max_depth = p.at("max_depth").get<int>();
        meta.params.forest.min_leaf = p.at("min_leaf").get<int>();
        meta.params.forest.bootstrap = p.at("bootstrap").get<bool>();
        if (!p.at("features_per_split").is_null()) {
            meta.params.forest.features_per_split = p.at("features_per_split").get<int>();
        }
        meta.params.naive_bayes.var_smoothing = p.at("var_smoothing").get<double>();

        const std::size_t dim = feature_dimension(meta.feature_mode);
        std::array<std::vector<EnsembleMember>, 8> ensembles;
        for (auto m : cvss3::kMetrics) {
            for (const auto& member : j.at("ensembles").at(std::string(cvss3::metric_name(m)))) {
                ensembles[static_cast<std::size_t>(m)].push_back(
                    {member.at("seed").get<std::uint64_t>(), member.at("fold").get<std::size_t>(),
                     member.at("validation_accuracy").get<double>(),
                     Classifier::from_json(member.at("classifier"), m, dim)});
            }
        }
        return TrainedModelSet(std::move(meta), std::move(ensembles));
    } catch (const json::exception& e) {
        throw ValidationError("$", std::string("malformed model: ") + e.what());
    }
}

TrainedModelSet train_model_set(const Dataset& train, Algorithm algo, int k,
                                std::span<const std::uint64_t> seeds, const TrainParams& params,
                                unsigned jobs) {
    if (seeds.size() != kEnsembleSize) {
        throw DomainError("expected " + std::to_string(kEnsembleSize) + " seeds, got " +
                          std::to_string(seeds.size()));
    }
    // Fail fast on an invalid k before spawning work.
    kfold_indices(train.size(), k, seeds.front());

    const std::size_t tasks = cvss3::kMetrics.size() * seeds.size();
    std::vector<std::optional<EnsembleMember>> slots(tasks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto work = [&] {
        for (std::size_t t = next++; t < tasks; t = next++) {
            try {
                const auto metric = cvss3::kMetrics[t / seeds.size()];
                const auto seed = seeds[t % seeds.size()];
                auto cv = cross_validate(train, metric, k, algo, params, seed);
                slots[t].emplace(EnsembleMember{seed, cv.fold, cv.validation_accuracy,
                                                std::move(cv.classifier)});
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, tasks);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);

    std::array<std::vector<EnsembleMember>, 8> ensembles;
    for (std::size_t t = 0; t < tasks; ++t) {
        ensembles[t / seeds.size()].push_back(std::move(*slots[t]));
    }
    ModelMetadata meta;
    meta.algorithm = algo;
    meta.seeds.assign(seeds.begin(), seeds.end());
    meta.feature_mode = train.feature_mode();
    meta.training_digest = train.digest();
    meta.kfolds = k;
    meta.training_examples = train.size();
    meta.params = params;
    return TrainedModelSet(std::move(meta), std::move(ensembles));
}

cvss3::Vector predict_metrics(const TrainedModelSet& m, std::span<const double> x) {
    if (x.size() != m.dimension()) {
        throw DomainError("model expects " + std::to_string(m.dimension()) + " features (" +
                          std::string(feature_mode_name(m.metadata().feature_mode)) + "), got " +
                          std::to_string(x.size()));
    }
    cvss3::Vector v;
    for (auto metric : cvss3::kMetrics) v.set(metric, m.predict(metric, x));
    return v;
}

cvss3::Vector predict_metrics(const TrainedModelSet& m, const FeatureVector& x) {
    return predict_metrics(m, x.project(m.metadata().feature_mode));
}

double accuracy(const TrainedModelSet& m, const Dataset& test, cvss3::Metric metric) {
    if (test.empty()) throw DomainError("accuracy of an empty test set is undefined");
    if (test.feature_mode() != m.metadata().feature_mode) {
        throw DomainError("test set feature mode does not match the model");
    }
    std::size_t correct = 0;
    for (const auto& e : test.examples()) {
        if (m.predict(metric, e.features.project(test.feature_mode())) == e.labels.get(metric)) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace vulnscore::ml
