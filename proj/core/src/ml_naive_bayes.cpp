#include <algorithm>
#include <cmath>
#include <numbers>

#include "vulnscore/error.hpp"
#include "vulnscore/ml.hpp"

namespace vulnscore::ml {

using json = nlohmann::json;

GaussianNaiveBayes::GaussianNaiveBayes(cvss3::Metric metric, std::vector<int> classes,
                                       std::vector<double> priors,
                                       std::vector<std::vector<double>> means,
                                       std::vector<std::vector<double>> variances)
    : metric_(metric),
      classes_(std::move(classes)),
      priors_(std::move(priors)),
      means_(std::move(means)),
      variances_(std::move(variances)) {
    const auto k = classes_.size();
    if (k == 0 || priors_.size() != k || means_.size() != k || variances_.size() != k) {
        throw ValidationError("naive_bayes", "inconsistent class parameter shapes");
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (means_[c].size() != means_[0].size() || variances_[c].size() != means_[0].size()) {
            throw ValidationError("naive_bayes", "inconsistent feature dimensions");
        }
        if (std::any_of(variances_[c].begin(), variances_[c].end(), [](double v) { return !(v > 0.0); })) {
            throw ValidationError("naive_bayes", "variances must be positive");
        }
        log_priors_.push_back(std::log(priors_[c]));
    }
}

int GaussianNaiveBayes::predict(std::span<const double> x) const {
    int best = -1;
    double best_ll = 0.0;
    for (std::size_t c = 0; c < classes_.size(); ++c) {
        double ll = log_priors_[c];
        for (std::size_t f = 0; f < x.size(); ++f) {
            const double var = variances_[c][f];
            const double d = x[f] - means_[c][f];
            ll -= 0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
        }
        const int label = classes_[c];
        if (best < 0 || ll > best_ll ||
            (ll == best_ll && cvss3::severity_rank(metric_, label) > cvss3::severity_rank(metric_, best))) {
            best = label;
            best_ll = ll;
        }
    }
    return best;
}

json GaussianNaiveBayes::to_json() const {
    json classes = json::array();
    for (int c : classes_) classes.push_back(std::string(1, cvss3::value_letter(metric_, c)));
    return {{"algorithm", "nb"},
            {"classes", std::move(classes)},
            {"priors", priors_},
            {"means", means_},
            {"variances", variances_}};
}

GaussianNaiveBayes GaussianNaiveBayes::from_json(const json& j, cvss3::Metric metric,
                                                 std::size_t dim) {
    std::vector<int> classes;
    for (const auto& c : j.at("classes")) {
        const auto s = c.get<std::string>();
        if (s.size() != 1) throw ValidationError("naive_bayes.classes", "expected one letter");
        classes.push_back(cvss3::value_from_letter(metric, s[0]));
    }
    auto means = j.at("means").get<std::vector<std::vector<double>>>();
    if (!means.empty() && means.front().size() != dim) {
        throw ValidationError("naive_bayes.means", "feature dimension mismatch");
    }
    return GaussianNaiveBayes(metric, std::move(classes), j.at("priors").get<std::vector<double>>(),
                              std::move(means), j.at("variances").get<std::vector<std::vector<double>>>());
}

Classifier train_naive_bayes(const Dataset& train, cvss3::Metric metric,
                             const NaiveBayesParams& params, std::uint64_t /*seed*/) {
    if (train.empty()) throw DomainError("cannot train on an empty dataset");
    const auto rows = train.feature_rows();
    const auto labels = train.labels(metric);
    const std::size_t n = rows.size();
    const std::size_t dim = rows.front().size();

    // Smoothing scales with the widest feature, like scikit-learn's GaussianNB.
    double max_var = 0.0;
    for (std::size_t f = 0; f < dim; ++f) {
        double mean = 0.0;
        for (const auto& r : rows) mean += r[f];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& r : rows) var += (r[f] - mean) * (r[f] - mean);
        max_var = std::max(max_var, var / static_cast<double>(n));
    }
    double epsilon = params.var_smoothing * max_var;
    if (!(epsilon > 0.0)) epsilon = params.var_smoothing > 0.0 ? params.var_smoothing : 1e-9;

    std::vector<int> classes(labels);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

    std::vector<double> priors;
    std::vector<std::vector<double>> means;
    std::vector<std::vector<double>> variances;
    for (int c : classes) {
        std::vector<double> mean(dim, 0.0);
        std::vector<double> var(dim, 0.0);
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] != c) continue;
            ++count;
            for (std::size_t f = 0; f < dim; ++f) mean[f] += rows[i][f];
        }
        for (auto& m : mean) m /= static_cast<double>(count);
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] != c) continue;
            for (std::size_t f = 0; f < dim; ++f) {
                const double d = rows[i][f] - mean[f];
                var[f] += d * d;
            }
        }
        for (auto& v : var) v = v / static_cast<double>(count) + epsilon;
        priors.push_back(static_cast<double>(count) / static_cast<double>(n));
        means.push_back(std::move(mean));
        variances.push_back(std::move(var));
    }
    return Classifier(GaussianNaiveBayes(metric, std::move(classes), std::move(priors),
                                         std::move(means), std::move(variances)),
                      metric, dim);
}

}  // namespace vulnscore::ml
