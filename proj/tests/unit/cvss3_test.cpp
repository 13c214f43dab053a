#include "vulnscore/cvss3.hpp"

#include <gtest/gtest.h>

#include <set>

#include "test_support.hpp"
#include "vulnscore/error.hpp"

namespace {

using namespace vulnscore;
using namespace vulnscore::cvss3;

TEST(Cvss3Oracle, EveryVectorMatchesReferenceCalculator) {
    const auto oracle = fixtures::load_cvss3_oracle();
    ASSERT_EQ(oracle.size(), 2592u);
    std::size_t mismatches = 0;
    for (const auto& v : all_vectors()) {
        const auto text = serialize_vector(v);
        auto it = oracle.find(text);
        ASSERT_NE(it, oracle.end()) << text;
        if (base_score(v).to_string() != it->second) {
            ++mismatches;
            ADD_FAILURE() << text << ": got " << base_score(v).to_string() << ", want " << it->second;
        }
    }
    EXPECT_EQ(mismatches, 0u);
}

TEST(Cvss3Score, KnownVectors) {
    EXPECT_EQ(base_score(parse_vector("CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H")).to_string(), "9.8");
    EXPECT_EQ(base_score(parse_vector("CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:C/C:H/I:H/A:H")).to_string(), "10.0");
    EXPECT_EQ(base_score(parse_vector("CVSS:3.0/AV:P/AC:H/PR:H/UI:R/S:U/C:N/I:N/A:N")).to_string(), "0.0");
    EXPECT_EQ(base_score(parse_vector("CVSS:3.0/AV:N/AC:L/PR:N/UI:R/S:C/C:L/I:L/A:N")).to_string(), "6.1");
}

TEST(Cvss3Score, ZeroImpactIsZeroRegardlessOfExploitability) {
    for (const auto& v : all_vectors()) {
        if (v.c == Impact::None && v.i == Impact::None && v.a == Impact::None) {
            EXPECT_EQ(base_score(v).tenths(), 0) << serialize_vector(v);
        } else {
            EXPECT_GT(base_score(v).tenths(), 0) << serialize_vector(v);
        }
    }
}

TEST(Cvss3Score, RaisingAnImpactNeverLowersTheScoreWhenScopeUnchanged) {
    for (const auto& v : all_vectors()) {
        if (v.s != Scope::Unchanged) continue;
        for (auto m : {Metric::C, Metric::I, Metric::A}) {
            // ordinals: None 0, Low 1, High 2
            for (int up = v.get(m) + 1; up < 3; ++up) {
                auto w = v;
                w.set(m, up);
                EXPECT_GE(base_score(w), base_score(v)) << serialize_vector(v) << " -> " << serialize_vector(w);
            }
        }
    }
}

TEST(Cvss3Score, AlwaysWithinRangeAndOneDecimal) {
    for (const auto& v : all_vectors()) {
        const auto s = base_score(v);
        EXPECT_GE(s.tenths(), 0);
        EXPECT_LE(s.tenths(), 100);
        EXPECT_GE(s.value() * 10.0, round_up_tenths(unrounded_base_score(v)) - 1e-9);
    }
}

TEST(Cvss3Rounding, RoundsUpToTenths) {
    EXPECT_EQ(round_up_tenths(4.0), 40);
    EXPECT_EQ(round_up_tenths(4.02), 41);
    EXPECT_EQ(round_up_tenths(4.000000000001), 40);
    EXPECT_EQ(round_up_tenths(0.0), 0);
    EXPECT_EQ(round_up_tenths(9.99), 100);
}

TEST(Cvss3Rating, Bands) {
    EXPECT_EQ(Score::from_tenths(0).rating(), Rating::None);
    EXPECT_EQ(Score::from_tenths(1).rating(), Rating::Low);
    EXPECT_EQ(Score::from_tenths(39).rating(), Rating::Low);
    EXPECT_EQ(Score::from_tenths(40).rating(), Rating::Medium);
    EXPECT_EQ(Score::from_tenths(69).rating(), Rating::Medium);
    EXPECT_EQ(Score::from_tenths(70).rating(), Rating::High);
    EXPECT_EQ(Score::from_tenths(89).rating(), Rating::High);
    EXPECT_EQ(Score::from_tenths(90).rating(), Rating::Critical);
    EXPECT_EQ(Score::from_tenths(100).rating(), Rating::Critical);
    EXPECT_EQ(rating_name(Rating::Critical), "Critical");
    EXPECT_THROW(Score::from_tenths(101), DomainError);
    EXPECT_THROW(Score::from_tenths(-1), DomainError);
}

TEST(Cvss3Vector, ParseSerializeRoundTripsForAllVectors) {
    std::set<std::string> seen;
    for (const auto& v : all_vectors()) {
        const auto text = serialize_vector(v);
        EXPECT_EQ(parse_vector(text), v);
        seen.insert(text);
    }
    EXPECT_EQ(seen.size(), 2592u);
}

TEST(Cvss3Vector, MinimalVectorRoundTrips) {
    const std::string text = "CVSS:3.0/AV:P/AC:H/PR:H/UI:R/S:U/C:N/I:N/A:N";
    const auto v = parse_vector(text);
    EXPECT_EQ(v.av, AttackVector::Physical);
    EXPECT_EQ(v.ui, UserInteraction::Required);
    EXPECT_EQ(serialize_vector(v), text);
}

TEST(Cvss3Vector, AcceptsAnyMetricOrder) {
    EXPECT_EQ(parse_vector("CVSS:3.0/A:H/I:H/C:H/S:U/UI:N/PR:N/AC:L/AV:N"),
              parse_vector("CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H"));
}

TEST(Cvss3Vector, RejectsMalformedInput) {
    const char* bad[] = {
        "",
        "AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H",
        "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H",
        "CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H",
        "CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H/A:H",
        "CVSS:3.0/AV:X/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H",
        "CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H/E:F",
        "CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:",
        "CVSS:3.0/AVN/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H",
    };
    for (const char* text : bad) {
        EXPECT_THROW(parse_vector(text), ParseError) << text;
    }
}

TEST(Cvss3Vector, ErrorNamesOffendingToken) {
    try {
        parse_vector("CVSS:3.0/AV:X/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("AV:X"), std::string::npos) << e.what();
    }
}

TEST(Cvss3Metrics, LettersAndSeverity) {
    for (auto m : kMetrics) {
        std::set<int> ranks;
        for (int v = 0; v < value_count(m); ++v) {
            EXPECT_EQ(value_from_letter(m, value_letter(m, v)), v);
            ranks.insert(severity_rank(m, v));
        }
        EXPECT_EQ(static_cast<int>(ranks.size()), value_count(m));
        EXPECT_EQ(metric_from_name(metric_name(m)), m);
    }
    EXPECT_GT(severity_rank(Metric::AV, value_from_letter(Metric::AV, 'N')),
              severity_rank(Metric::AV, value_from_letter(Metric::AV, 'P')));
    EXPECT_GT(severity_rank(Metric::S, value_from_letter(Metric::S, 'C')),
              severity_rank(Metric::S, value_from_letter(Metric::S, 'U')));
    EXPECT_GT(severity_rank(Metric::C, value_from_letter(Metric::C, 'H')),
              severity_rank(Metric::C, value_from_letter(Metric::C, 'L')));
    EXPECT_THROW(value_from_letter(Metric::AC, 'N'), ParseError);
    EXPECT_THROW(metric_from_name("E"), ParseError);
}

}  // namespace
