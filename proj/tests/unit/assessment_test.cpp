#include "vulnscore/assessment.hpp"

#include <gtest/gtest.h>

#include <numeric>

#include "test_support.hpp"
#include "vulnscore/error.hpp"
#include "vulnscore/synthetic.hpp"

namespace {

using namespace vulnscore;

class AssessmentTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        std::vector<std::uint64_t> seeds(ml::kEnsembleSize);
        std::iota(seeds.begin(), seeds.end(), 1);
        model_ = new ml::TrainedModelSet(ml::train_model_set(
            synthetic::planted_corpus(40, 5), ml::Algorithm::NaiveBayes, 4, seeds));
    }
    static void TearDownTestSuite() { delete model_; }

    void SetUp() override {
        report_ = parse_analysis_report(fixtures::read_data("autotrace.json"));
        vulnerable_ = vulnerable_functions(report_);
        for (const auto& v : vulnerable_) features_.push_back(extract_feature_vector(report_, v.name));
    }

    nvd::GroundTruthEntry truth(std::string fn, const char* vector) const {
        return {report_.program, report_.version, std::move(fn), cvss3::parse_vector(vector),
                nvd::Provenance::Manual, ""};
    }

    static ml::TrainedModelSet* model_;
    AnalysisReport report_;
    std::vector<VulnerableFunction> vulnerable_;
    std::vector<FeatureVector> features_;
};
ml::TrainedModelSet* AssessmentTest::model_ = nullptr;

TEST_F(AssessmentTest, VulnerableFunctionsCarryDistinctLocations) {
    ASSERT_EQ(vulnerable_.size(), 3u);
    std::map<std::string, std::vector<SourceLocation>> by_name;
    for (const auto& v : vulnerable_) by_name[v.name] = v.locations;
    EXPECT_EQ(by_name["rle_fread"], (std::vector<SourceLocation>{{"input-tga.c", 403}}));
    EXPECT_EQ(by_name["std_fread"], (std::vector<SourceLocation>{{"input-tga.c", 436}}));
    EXPECT_EQ(by_name["ReadImage"].size(), 2u);
    for (const auto& v : vulnerable_) {
        EXPECT_FALSE(v.chains.empty()) << v.name;
        for (const auto& c : v.chains) EXPECT_NE(std::find(c.begin(), c.end(), v.name), c.end());
    }
}

TEST_F(AssessmentTest, GroundTruthWinsOverPrediction) {
    const char* known = "CVSS:3.0/AV:L/AC:L/PR:N/UI:R/S:U/C:H/I:H/A:H";
    const auto r = assess(report_.program, report_.version, vulnerable_, features_, *model_,
                          {truth("rle_fread", known)});
    ASSERT_EQ(r.functions.size(), 3u);
    for (const auto& f : r.functions) {
        EXPECT_EQ(f.score, cvss3::base_score(f.vector)) << f.name;
        if (f.name == "rle_fread") {
            EXPECT_EQ(f.provenance, AssessmentProvenance::GroundTruth);
            EXPECT_EQ(cvss3::serialize_vector(f.vector), known);
            EXPECT_EQ(f.score.to_string(), "7.8");
        } else {
            EXPECT_EQ(f.provenance, AssessmentProvenance::Predicted);
            EXPECT_EQ(f.vector, ml::predict_metrics(*model_, f.features));
        }
    }
    ASSERT_NE(r.find("ReadImage"), nullptr);
    EXPECT_EQ(r.find("missing"), nullptr);
}

TEST_F(AssessmentTest, GroundTruthForOtherProgramsIsIgnored) {
    auto other = truth("rle_fread", "CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H");
    other.version = "0.40";
    const auto r = assess(report_.program, report_.version, vulnerable_, features_, *model_, {other});
    EXPECT_EQ(r.find("rle_fread")->provenance, AssessmentProvenance::Predicted);
}

TEST_F(AssessmentTest, RejectsFunctionsWithoutVulnerableInstructions) {
    features_[0].nv = 0;
    EXPECT_THROW(assess(report_.program, report_.version, vulnerable_, features_, *model_, {}), DomainError);
}

TEST_F(AssessmentTest, RejectsMismatchedFeatureCount) {
    features_.pop_back();
    EXPECT_THROW(assess(report_.program, report_.version, vulnerable_, features_, *model_, {}), DomainError);
}

TEST_F(AssessmentTest, JsonRoundTrips) {
    const auto r = assess(report_.program, report_.version, vulnerable_, features_, *model_,
                          {truth("std_fread", "CVSS:3.0/AV:N/AC:L/PR:N/UI:R/S:C/C:L/I:L/A:N")});
    const auto j = assessment_to_json(r);
    const auto back = assessment_from_json(j.dump());
    EXPECT_EQ(assessment_to_json(back), j);
    EXPECT_EQ(j.at("functions")[0].at("rating"), cvss3::rating_name(r.functions[0].score.rating()));
}

TEST_F(AssessmentTest, TamperedScoreIsAnIntegrityError) {
    const auto r = assess(report_.program, report_.version, vulnerable_, features_, *model_, {});
    auto j = assessment_to_json(r);
    const double s = j["functions"][0]["score"].get<double>();
    j["functions"][0]["score"] = s >= 5.0 ? s - 1.0 : s + 1.0;
    EXPECT_THROW(assessment_from_json(j.dump()), IntegrityError);
}

TEST_F(AssessmentTest, MalformedDocumentsAreValidationErrors) {
    const auto r = assess(report_.program, report_.version, vulnerable_, features_, *model_, {});
    const auto base = assessment_to_json(r);

    auto no_nv = base;
    no_nv["functions"][0]["features"]["nv"] = 0;
    EXPECT_THROW(assessment_from_json(no_nv.dump()), ValidationError);

    auto bad_vector = base;
    bad_vector["functions"][0]["vector"] = "CVSS:3.0/AV:Q";
    EXPECT_THROW(assessment_from_json(bad_vector.dump()), ValidationError);

    auto bad_prov = base;
    bad_prov["functions"][0]["provenance"] = "Guess";
    EXPECT_THROW(assessment_from_json(bad_prov.dump()), ValidationError);

    auto missing = base;
    missing["functions"][0].erase("features");
    EXPECT_THROW(assessment_from_json(missing.dump()), ValidationError);
}

}  // namespace
