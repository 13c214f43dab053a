#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vulnscore/callgraph.hpp"

namespace vulnscore {

/// Which prefix of the feature vector a model consumes: the seven graph and
/// analysis features, or those plus the three static function metrics.
enum class FeatureMode { Original7, Extended10 };

std::size_t feature_dimension(FeatureMode mode) noexcept;
std::string_view feature_mode_name(FeatureMode mode) noexcept;
/// "original7" / "extended10"; throws ParseError otherwise.
FeatureMode feature_mode_from_name(std::string_view name);

/// Per-function features, in the fixed order
/// [d_in, d_out, di, cc, nl, nv, li, s, fx, pt].
struct FeatureVector {
    std::uint64_t d_in = 0;
    std::uint64_t d_out = 0;
    std::uint64_t di = 0;   // hops from the nearest interface
    double cc = 0.0;        // clustering coefficient in [0, 1]
    double nl = 0.0;        // mean hop count to reachable callees
    std::uint64_t nv = 0;   // distinct vulnerable instructions
    std::uint64_t li = 0;   // longest infection chain from here, 0 if nv == 0
    std::uint64_t s = 0;    // instructions
    std::uint64_t fx = 0;   // basic blocks
    std::uint64_t pt = 0;   // pointer parameters

    static constexpr std::size_t kSize = 10;
    static constexpr std::array<std::string_view, kSize> kNames{
        "d_in", "d_out", "di", "cc", "nl", "nv", "li", "s", "fx", "pt"};

    std::array<double, kSize> to_array() const noexcept;
    /// First `feature_dimension(mode)` components.
    std::vector<double> project(FeatureMode mode) const;
    /// Inverse of to_array for the first `values.size()` components (7 or 10);
    /// the rest stay zero. Throws DomainError on a negative count.
    static FeatureVector from_values(std::span<const double> values);

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

std::pair<std::uint64_t, std::uint64_t> node_degree(const CallGraph& graph, std::string_view fn);

/// Minimum hop count from any interface node. Functions no interface reaches
/// get the sentinel `graph.node_count()`. Throws ConfigError when the graph
/// has no interface node.
std::uint64_t distance_to_interface(const CallGraph& graph, std::string_view fn);

/// Fraction of distinct neighbour pairs (callers and callees together) joined
/// by an edge in either direction; 0 with fewer than two neighbours.
double clustering_coefficient(const CallGraph& graph, std::string_view fn);

/// Mean BFS distance along call edges to every node reachable from `fn`
/// (excluding `fn`); 0 when nothing is reachable.
double node_path_length(const CallGraph& graph, std::string_view fn);

/// Distinct vulnerable-instruction locations over every vulnerability with a
/// chain through `fn`.
std::uint64_t vulnerability_count(const AnalysisReport& report, std::string_view fn);

/// Node count of the longest recorded chain suffix that starts at `fn`.
/// Throws DomainError when no vulnerability infects `fn`.
std::uint64_t max_infection_length(const AnalysisReport& report, std::string_view fn);

FeatureVector extract_feature_vector(const AnalysisReport& report, std::string_view fn);

/// Feature matrix for every function in graph order. Work is split over up to
/// `jobs` threads; the result does not depend on `jobs`.
class FeatureExtractor {
public:
    explicit FeatureExtractor(const AnalysisReport& report);

    FeatureVector extract(CallGraph::Index fn) const;
    std::vector<FeatureVector> extract_all(unsigned jobs = 1) const;

private:
    const AnalysisReport& report_;
    std::vector<std::uint64_t> interface_distance_;
    // per function: (location ids, longest suffix) aggregated over chains
    std::vector<std::vector<std::size_t>> locations_;
    std::vector<std::uint64_t> longest_suffix_;
};

/// Matrix rows as written to and read from the features CSV.
struct FeatureRow {
    std::string function;
    FeatureVector features;
};

/// Writes `function,d_in,d_out,di,cc,nl,nv,li,s,fx,pt` plus one row per entry.
/// Reals carry at most six decimals.
void write_feature_csv(std::ostream& out, const std::vector<FeatureRow>& rows);

/// Accepts the 10-column header above or the 7-column prefix
/// `function,d_in,...,li`. Returns the rows and the detected mode.
std::pair<std::vector<FeatureRow>, FeatureMode> read_feature_csv(std::string_view text);

/// "0.5", "1.0", "0.333333".
std::string format_real(double x);

}  // namespace vulnscore
