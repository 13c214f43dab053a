#include "vulnscore/assessment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "json_util.hpp"
#include "vulnscore/error.hpp"

namespace vulnscore {

using json = nlohmann::json;

std::string_view assessment_provenance_name(AssessmentProvenance p) noexcept {
    return p == AssessmentProvenance::GroundTruth ? "GroundTruth" : "Predicted";
}

std::vector<VulnerableFunction> vulnerable_functions(const AnalysisReport& report) {
    const auto& graph = report.graph;
    std::vector<VulnerableFunction> per_node(graph.node_count());
    for (const auto& v : report.vulnerabilities) {
        for (const auto& chain : v.chains) {
            for (const auto& name : chain) {
                auto& entry = per_node[graph.index_of(name)];
                if (std::find(entry.locations.begin(), entry.locations.end(), v.location) ==
                    entry.locations.end()) {
                    entry.locations.push_back(v.location);
                }
                if (std::find(entry.chains.begin(), entry.chains.end(), chain) == entry.chains.end()) {
                    entry.chains.push_back(chain);
                }
            }
        }
    }
    std::vector<VulnerableFunction> out;
    for (std::size_t i = 0; i < per_node.size(); ++i) {
        if (per_node[i].locations.empty()) continue;
        per_node[i].name = graph.node(i).name;
        out.push_back(std::move(per_node[i]));
    }
    return out;
}

const AssessedFunction* AssessmentReport::find(std::string_view name) const {
    auto it = std::find_if(functions.begin(), functions.end(),
                           [&](const AssessedFunction& f) { return f.name == name; });
    return it == functions.end() ? nullptr : &*it;
}

AssessmentReport assess(std::string program, std::string version,
                        const std::vector<VulnerableFunction>& vulnerable,
                        const std::vector<FeatureVector>& features, const ml::TrainedModelSet& model,
                        const std::vector<nvd::GroundTruthEntry>& ground_truth) {
    if (vulnerable.size() != features.size()) {
        throw DomainError("one feature vector per vulnerable function is required");
    }
    std::map<std::string, const nvd::GroundTruthEntry*> known;
    for (const auto& e : ground_truth) {
        if (e.program == program && e.version == version) known.emplace(e.function, &e);
    }

    AssessmentReport report{std::move(program), std::move(version), {}};
    for (std::size_t k = 0; k < vulnerable.size(); ++k) {
        const auto& v = vulnerable[k];
        if (features[k].nv == 0) {
            throw DomainError("function '" + v.name + "' has no vulnerable instruction");
        }
        AssessedFunction f;
        f.name = v.name;
        f.features = features[k];
        if (auto it = known.find(v.name); it != known.end()) {
            f.vector = it->second->vector;
            f.provenance = AssessmentProvenance::GroundTruth;
        } else {
            f.vector = ml::predict_metrics(model, features[k]);
            f.provenance = AssessmentProvenance::Predicted;
        }
        f.score = cvss3::base_score(f.vector);
        f.locations = v.locations;
        f.chains = v.chains;
        report.functions.push_back(std::move(f));
    }
    return report;
}

json assessment_to_json(const AssessmentReport& report) {
    json functions = json::array();
    for (const auto& f : report.functions) {
        json features = json::object();
        const auto values = f.features.to_array();
        for (std::size_t k = 0; k < FeatureVector::kSize; ++k) {
            const auto name = std::string(FeatureVector::kNames[k]);
            if (name == "cc" || name == "nl") {
                features[name] = values[k];
            } else {
                features[name] = static_cast<std::uint64_t>(values[k]);
            }
        }
        json locations = json::array();
        for (const auto& l : f.locations) locations.push_back({{"file", l.file}, {"line", l.line}});
        functions.push_back({{"name", f.name},
                             {"features", std::move(features)},
                             {"vector", cvss3::serialize_vector(f.vector)},
                             {"score", f.score.value()},
                             {"rating", cvss3::rating_name(f.score.rating())},
                             {"provenance", assessment_provenance_name(f.provenance)},
                             {"locations", std::move(locations)},
                             {"chains", f.chains}});
    }
    return {{"program", report.program}, {"version", report.version}, {"functions", std::move(functions)}};
}

AssessmentReport assessment_from_json(std::string_view text) {
    using namespace jsonutil;
    const json doc = parse(text);
    require_object(doc, "$");
    AssessmentReport report;
    report.program = require_string(doc, "program", "$");
    report.version = require_string(doc, "version", "$");
    const auto& functions = require_array(doc, "functions", "$");
    for (std::size_t k = 0; k < functions.size(); ++k) {
        const std::string at = "$.functions[" + std::to_string(k) + "]";
        const auto& j = functions[k];
        AssessedFunction f;
        f.name = require_string(j, "name", at);

        const auto& feats = require_member(j, "features", at);
        require_object(feats, at + ".features");
        std::vector<double> values;
        for (auto name : FeatureVector::kNames) {
            const auto key = std::string(name);
            const auto& v = require_member(feats, key.c_str(), at + ".features");
            if (!v.is_number()) throw ValidationError(at + ".features." + key, "expected a number");
            values.push_back(v.get<double>());
        }
        try {
            f.features = FeatureVector::from_values(values);
        } catch (const DomainError& e) {
            throw ValidationError(at + ".features", e.what());
        }
        if (f.features.nv == 0) throw ValidationError(at + ".features.nv", "must be >= 1");

        try {
            f.vector = cvss3::parse_vector(require_string(j, "vector", at));
        } catch (const ParseError& e) {
            throw ValidationError(at + ".vector", e.what());
        }
        f.score = cvss3::base_score(f.vector);
        const auto& score = require_member(j, "score", at);
        if (!score.is_number() || std::abs(score.get<double>() * 10.0 - f.score.tenths()) > 1e-6) {
            throw IntegrityError(at + ".score: does not equal the base score of " +
                                 cvss3::serialize_vector(f.vector));
        }
        const auto prov = require_string(j, "provenance", at);
        if (prov == "GroundTruth") {
            f.provenance = AssessmentProvenance::GroundTruth;
        } else if (prov == "Predicted") {
            f.provenance = AssessmentProvenance::Predicted;
        } else {
            throw ValidationError(at + ".provenance", "expected GroundTruth or Predicted");
        }
        for (const auto& l : require_array(j, "locations", at)) {
            f.locations.push_back({require_string(l, "file", at + ".locations"),
                                   static_cast<int>(require_uint(l, "line", at + ".locations"))});
        }
        for (const auto& c : require_array(j, "chains", at)) {
            f.chains.push_back(c.get<std::vector<std::string>>());
        }
        report.functions.push_back(std::move(f));
    }
    return report;
}

}  // namespace vulnscore
