#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace vulnscore {

/// One function of the analysed program together with the static metrics the
/// feature extractor consumes verbatim.
struct FunctionNode {
    std::string name;
    std::optional<std::string> file;
    std::optional<int> line;
    bool is_interface = false;
    std::uint64_t instruction_count = 0;
    std::uint64_t basic_block_count = 0;
    std::uint64_t pointer_param_count = 0;

    friend bool operator==(const FunctionNode&, const FunctionNode&) = default;
};

enum class Direction { In, Out, Both };

/// Directed call graph. An edge (a, b) means `a` calls `b`. Parallel call
/// sites collapse to one edge; self-loops are kept.
///
/// Nodes keep insertion order, which is the order every listing and export
/// uses. Adjacency lists are sorted by node index.
class CallGraph {
public:
    using Index = std::size_t;

    /// Adds a node, or returns the existing index when the name is taken.
    Index add_node(std::string name);
    /// Adds or replaces a node's metrics. Throws ValidationError for an empty
    /// name or inconsistent instruction/basic-block counts.
    Index upsert_node(FunctionNode node);
    /// Both endpoints must exist. Returns false for a duplicate edge.
    bool add_edge(Index caller, Index callee);
    bool add_edge(std::string_view caller, std::string_view callee);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept { return edge_count_; }

    const std::vector<FunctionNode>& nodes() const noexcept { return nodes_; }
    const FunctionNode& node(Index i) const { return nodes_.at(i); }

    std::optional<Index> find(std::string_view name) const;
    /// Throws NotFoundError.
    Index index_of(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name).has_value(); }

    const std::vector<Index>& callees(Index i) const { return out_.at(i); }
    const std::vector<Index>& callers(Index i) const { return in_.at(i); }
    bool has_edge(Index caller, Index callee) const;

    /// All edges ordered by (caller index, callee index).
    std::vector<std::pair<Index, Index>> edges() const;

    /// Same node sequence and the same edge set.
    friend bool operator==(const CallGraph& a, const CallGraph& b);

private:
    std::vector<FunctionNode> nodes_;
    std::unordered_map<std::string, Index> index_;
    std::vector<std::vector<Index>> out_;
    std::vector<std::vector<Index>> in_;
    std::size_t edge_count_ = 0;
};

struct SourceLocation {
    std::string file;
    int line = 0;

    friend auto operator<=>(const SourceLocation&, const SourceLocation&) = default;
};

enum class VulnerabilityKind { BufferOverflow };

/// One vulnerable instruction and every call chain through which the same
/// vulnerability was found to be exploitable. Chains run caller -> ... ->
/// origin and always include the single-element chain [function].
struct Vulnerability {
    std::string id;
    std::string function;
    SourceLocation location;
    VulnerabilityKind kind = VulnerabilityKind::BufferOverflow;
    std::vector<std::vector<std::string>> chains;
};

struct AnalysisReport {
    std::string program;
    std::string version;
    CallGraph graph;
    std::vector<Vulnerability> vulnerabilities;
};

/// Parses the supported DOT subset: `digraph`, node statements with optional
/// attribute lists, and edge statements `a -> b [-> c ...]`. Recognised node
/// attributes are `interface`, `instructions`, `basic_blocks`,
/// `pointer_params`, `file` and `line`.
CallGraph parse_callgraph_dot(std::string_view text);

/// Graph part of the native JSON schema: `{"functions": [...], "edges": [...]}`.
CallGraph callgraph_from_json(const nlohmann::json& doc, const std::string& path = "$");
nlohmann::json callgraph_to_json(const CallGraph& graph);

/// Reads a graph file by content: native JSON if it starts with `{`, DOT
/// otherwise.
CallGraph parse_callgraph(std::string_view text);

/// Parses and validates a native analysis report. When the report carries no
/// `functions`/`edges`, `external_graph` supplies them; if neither is present
/// a ValidationError is raised.
AnalysisReport parse_analysis_report(std::string_view text,
                                     std::optional<CallGraph> external_graph = std::nullopt);
nlohmann::json analysis_report_to_json(const AnalysisReport& report);

/// Sorted by name. A self-loop makes a node its own caller and callee, but
/// never its own `Both` neighbour.
std::vector<std::string> neighbors(const CallGraph& graph, std::string_view fn, Direction dir);
std::vector<CallGraph::Index> neighbor_indices(const CallGraph& graph, CallGraph::Index fn,
                                               Direction dir);

/// Breadth-first hop count along call edges; nullopt when unreachable.
std::optional<std::size_t> shortest_path_length(const CallGraph& graph, std::string_view from,
                                                std::string_view to);

/// Every node reachable from `entry`, including `entry`, in graph order.
std::vector<std::string> connected_component_of(const CallGraph& graph, std::string_view entry);

/// Distances from `source` to every node; nullopt entries are unreachable.
std::vector<std::optional<std::size_t>> bfs_distances(const CallGraph& graph,
                                                      CallGraph::Index source);

}  // namespace vulnscore
