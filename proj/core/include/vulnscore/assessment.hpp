#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vulnscore/callgraph.hpp"
#include "vulnscore/cvss3.hpp"
#include "vulnscore/features.hpp"
#include "vulnscore/ml.hpp"
#include "vulnscore/nvd.hpp"

namespace vulnscore {

enum class AssessmentProvenance { GroundTruth, Predicted };

std::string_view assessment_provenance_name(AssessmentProvenance p) noexcept;

/// A vulnerable function as handed from feature extraction to prediction.
struct VulnerableFunction {
    std::string name;
    std::vector<SourceLocation> locations;
    std::vector<std::vector<std::string>> chains;
};

/// Every function with nv >= 1: its distinct vulnerable-instruction locations
/// and the chains through which it is infected, in graph order.
std::vector<VulnerableFunction> vulnerable_functions(const AnalysisReport& report);

struct AssessedFunction {
    std::string name;
    FeatureVector features;
    cvss3::Vector vector;
    cvss3::Score score;
    AssessmentProvenance provenance = AssessmentProvenance::Predicted;
    std::vector<SourceLocation> locations;
    std::vector<std::vector<std::string>> chains;
};

struct AssessmentReport {
    std::string program;
    std::string version;
    std::vector<AssessedFunction> functions;

    const AssessedFunction* find(std::string_view name) const;
};

/// Ground-truth functions keep their known vector; every other vulnerable
/// function gets the model's majority-vote prediction. Scores are always
/// recomputed from the vector.
AssessmentReport assess(std::string program, std::string version,
                        const std::vector<VulnerableFunction>& vulnerable,
                        const std::vector<FeatureVector>& features, const ml::TrainedModelSet& model,
                        const std::vector<nvd::GroundTruthEntry>& ground_truth);

nlohmann::json assessment_to_json(const AssessmentReport& report);
/// Rejects entries whose score differs from base_score(vector).
AssessmentReport assessment_from_json(std::string_view text);

}  // namespace vulnscore
