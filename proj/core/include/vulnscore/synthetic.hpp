#pragma once

#include <cstddef>
#include <cstdint>

#include "vulnscore/cvss3.hpp"
#include "vulnscore/features.hpp"
#include "vulnscore/ml.hpp"

namespace vulnscore::synthetic {

/// Deterministic labelling rule, one axis-aligned rule per metric. Only the
/// availability rule reads a static function metric (pointer parameters);
/// every other metric is decided by the first seven features.
///
///   AV by di (0 N, 1 A, 2 L, >=3 P)      AC L iff cc < 0.5
///   PR by nv (1 N, 2 L, >=3 H)           UI N iff d_in >= 3
///   S  C iff li >= 3                      C  by nl (<1.5 H, <3 L, else N)
///   I  by d_out (>=4 H, >=2 L, else N)    A  by pt (>=2 H, 1 L, 0 N)
cvss3::Vector planted_labels(const FeatureVector& f);

/// Random feature vector of a vulnerable function (nv >= 1, li >= 1).
FeatureVector random_features(std::uint64_t seed, std::size_t index);

/// `n` examples labelled by planted_labels, keyed synth/1.0/fn_<i>.
ml::Dataset planted_corpus(std::size_t n, std::uint64_t seed,
                           FeatureMode mode = FeatureMode::Extended10);

}  // namespace vulnscore::synthetic
