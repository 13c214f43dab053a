#include "vulnscore/synthetic.hpp"

#include <string>
#include <vector>

#include "rng.hpp"

namespace vulnscore::synthetic {

using cvss3::Impact;

cvss3::Vector planted_labels(const FeatureVector& f) {
    cvss3::Vector v;
    v.av = f.di == 0   ? cvss3::AttackVector::Network
           : f.di == 1 ? cvss3::AttackVector::Adjacent
           : f.di == 2 ? cvss3::AttackVector::Local
                       : cvss3::AttackVector::Physical;
    v.ac = f.cc < 0.5 ? cvss3::AttackComplexity::Low : cvss3::AttackComplexity::High;
    v.pr = f.nv <= 1   ? cvss3::PrivilegesRequired::None
           : f.nv == 2 ? cvss3::PrivilegesRequired::Low
                       : cvss3::PrivilegesRequired::High;
    v.ui = f.d_in >= 3 ? cvss3::UserInteraction::None : cvss3::UserInteraction::Required;
    v.s = f.li >= 3 ? cvss3::Scope::Changed : cvss3::Scope::Unchanged;
    v.c = f.nl < 1.5 ? Impact::High : f.nl < 3.0 ? Impact::Low : Impact::None;
    v.i = f.d_out >= 4 ? Impact::High : f.d_out >= 2 ? Impact::Low : Impact::None;
    v.a = f.pt >= 2 ? Impact::High : f.pt == 1 ? Impact::Low : Impact::None;
    return v;
}

FeatureVector random_features(std::uint64_t seed, std::size_t index) {
    detail::Rng rng(detail::mix_seed(seed, index));
    FeatureVector f;
    f.d_in = rng.below(7);
    f.d_out = rng.below(7);
    f.di = rng.below(5);
    f.cc = static_cast<double>(rng.below(21)) / 20.0;
    f.nl = static_cast<double>(rng.below(17)) / 4.0;
    f.nv = 1 + rng.below(4);
    f.li = 1 + rng.below(5);
    f.fx = 1 + rng.below(60);
    f.s = f.fx * (3 + rng.below(18));
    f.pt = rng.below(4);
    return f;
}

ml::Dataset planted_corpus(std::size_t n, std::uint64_t seed, FeatureMode mode) {
    std::vector<ml::LabeledExample> examples;
    examples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = random_features(seed, i);
        examples.push_back({{"synth", "1.0", "fn_" + std::to_string(i)}, f, planted_labels(f)});
    }
    return ml::Dataset(std::move(examples), mode);
}

}  // namespace vulnscore::synthetic
