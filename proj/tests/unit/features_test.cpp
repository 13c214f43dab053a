#include "vulnscore/features.hpp"

#include <gtest/gtest.h>

#include <array>
#include <sstream>

#include "test_support.hpp"
#include "vulnscore/error.hpp"

namespace {

using namespace vulnscore;
using fixtures::read_data;

AnalysisReport autotrace() { return parse_analysis_report(read_data("autotrace.json")); }

AnalysisReport report_from_dot(const std::string& dot) {
    AnalysisReport r;
    r.program = "p";
    r.version = "1";
    r.graph = parse_callgraph_dot(dot);
    return r;
}

TEST(WorkedExample, RleFread) {
    const auto r = autotrace();
    const auto f = extract_feature_vector(r, "rle_fread");
    EXPECT_EQ(f.d_in, 1u);
    EXPECT_EQ(f.d_out, 3u);
    EXPECT_EQ(f.cc, 0.5);
    EXPECT_EQ(f.nl, 1.0);
    EXPECT_EQ(f.nv, 1u);
}

TEST(WorkedExample, StdFreadAndReadImage) {
    const auto r = autotrace();
    EXPECT_EQ(node_degree(r.graph, "std_fread"), (std::pair<std::uint64_t, std::uint64_t>{1, 1}));
    EXPECT_EQ(distance_to_interface(r.graph, "std_fread"), 3u);
    EXPECT_EQ(distance_to_interface(r.graph, "ReadImage"), 2u);
    EXPECT_EQ(vulnerability_count(r, "ReadImage"), 2u);
    EXPECT_EQ(max_infection_length(r, "ReadImage"), 2u);
    EXPECT_EQ(distance_to_interface(r.graph, "main"), 0u);
}

TEST(Features, NonVulnerableFunction) {
    const auto r = autotrace();
    EXPECT_EQ(vulnerability_count(r, "main"), 0u);
    EXPECT_THROW(max_infection_length(r, "main"), DomainError);
    EXPECT_EQ(extract_feature_vector(r, "main").li, 0u);
}

TEST(Features, StaticMetricsAreCopied) {
    const auto r = autotrace();
    const auto f = extract_feature_vector(r, "ReadImage");
    EXPECT_EQ(f.s, 731u);
    EXPECT_EQ(f.fx, 88u);
    EXPECT_EQ(f.pt, 3u);
}

TEST(Features, IsolatedInterfaceNode) {
    const auto r = report_from_dot("digraph { main [interface=true, instructions=9, basic_blocks=3, pointer_params=2]; }");
    const auto f = extract_feature_vector(r, "main");
    const std::array<double, 10> want{0, 0, 0, 0.0, 0.0, 0, 0, 9, 3, 2};
    EXPECT_EQ(f.to_array(), want);
}

TEST(Features, NoInterfaceIsConfigError) {
    const auto r = report_from_dot("digraph { a -> b; }");
    EXPECT_THROW(distance_to_interface(r.graph, "a"), ConfigError);
}

TEST(Features, UnreachableFromInterfaceGetsSentinel) {
    const auto r = report_from_dot("digraph { main [interface=true]; main -> a; b -> a; }");
    EXPECT_EQ(distance_to_interface(r.graph, "b"), 3u);
    EXPECT_EQ(distance_to_interface(r.graph, "a"), 1u);
}

TEST(Features, UnknownFunctionIsNotFound) {
    const auto r = autotrace();
    EXPECT_THROW(node_degree(r.graph, "nope"), NotFoundError);
    EXPECT_THROW(clustering_coefficient(r.graph, "nope"), NotFoundError);
    EXPECT_THROW(node_path_length(r.graph, "nope"), NotFoundError);
    EXPECT_THROW(vulnerability_count(r, "nope"), NotFoundError);
}

TEST(ClusteringCoefficient, Examples) {
    // A<->B, A<->C, B->C measured at A: one neighbour pair {B, C}, connected.
    const auto tri = parse_callgraph_dot("digraph { A -> B; B -> A; A -> C; C -> A; B -> C; }");
    EXPECT_EQ(clustering_coefficient(tri, "A"), 1.0);
    const auto line = parse_callgraph_dot("digraph { A -> B; }");
    EXPECT_EQ(clustering_coefficient(line, "A"), 0.0);
}

TEST(NodePathLength, Examples) {
    const auto cyc = parse_callgraph_dot("digraph { A -> B; B -> A; }");
    EXPECT_EQ(node_path_length(cyc, "A"), 1.0);
    const auto leaf = parse_callgraph_dot("digraph { A -> B; }");
    EXPECT_EQ(node_path_length(leaf, "B"), 0.0);
    const auto chain = parse_callgraph_dot("digraph { A -> B -> C; A -> D; }");
    EXPECT_DOUBLE_EQ(node_path_length(chain, "A"), 4.0 / 3.0);
}

TEST(InfectionLength, ChainOfThree) {
    const std::string text = R"({"program":"p","version":"1","functions":[
        {"name":"A","is_interface":true,"instructions":1,"basic_blocks":1,"pointer_params":0},
        {"name":"B","is_interface":false,"instructions":1,"basic_blocks":1,"pointer_params":0},
        {"name":"C","is_interface":false,"instructions":1,"basic_blocks":1,"pointer_params":0}],
        "edges":[["A","B"],["B","C"]],
        "vulnerabilities":[{"id":"v","function":"C","kind":"buffer-overflow",
          "location":{"file":"c.c","line":1},"chains":[["C"],["A","B","C"]]}]})";
    const auto r = parse_analysis_report(text);
    EXPECT_EQ(vulnerability_count(r, "C"), 1u);
    EXPECT_EQ(max_infection_length(r, "C"), 1u);
    EXPECT_EQ(vulnerability_count(r, "A"), 1u);
    EXPECT_EQ(max_infection_length(r, "A"), 3u);
    EXPECT_EQ(max_infection_length(r, "B"), 2u);
}

TEST(Cycles, FeaturesTerminate) {
    AnalysisReport r;
    r.graph = parse_callgraph_dot(read_data("cycles.dot"));
    const FeatureExtractor ex(r);
    const auto all = ex.extract_all();
    ASSERT_EQ(all.size(), r.graph.node_count());
    const auto walk = all[r.graph.index_of("walk")];
    EXPECT_EQ(walk.d_in, 3u);  // parse, orphan and itself
    EXPECT_EQ(walk.d_out, 1u);
    EXPECT_EQ(walk.cc, 0.0);
    EXPECT_EQ(walk.nl, 0.0);
    EXPECT_EQ(all[r.graph.index_of("parse_expr")].nl, 1.0);
    EXPECT_EQ(all[r.graph.index_of("orphan")].di, r.graph.node_count());
}

// --- brute-force oracle -----------------------------------------------------
//
// Floyd-Warshall distances and direct subset enumeration over an adjacency
// matrix, sharing no code with the library.

struct Oracle {
    static constexpr int kInf = 1 << 20;
    int n;
    std::array<std::array<bool, 5>, 5> adj{};
    std::array<std::array<int, 5>, 5> dist{};

    void close() {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) dist[i][j] = i == j ? 0 : (adj[i][j] ? 1 : kInf);
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);
    }
    double cc(int v) const {
        std::vector<int> nb;
        for (int u = 0; u < n; ++u)
            if (u != v && (adj[u][v] || adj[v][u])) nb.push_back(u);
        const int k = static_cast<int>(nb.size());
        if (k < 2) return 0.0;
        int linked = 0;
        for (int a = 0; a < k; ++a)
            for (int b = a + 1; b < k; ++b) linked += adj[nb[a]][nb[b]] || adj[nb[b]][nb[a]];
        return static_cast<double>(linked) / (k * (k - 1) / 2.0);
    }
    double nl(int v) const {
        int total = 0, count = 0;
        for (int u = 0; u < n; ++u) {
            if (u == v || dist[v][u] >= kInf) continue;
            total += dist[v][u];
            ++count;
        }
        return count ? static_cast<double>(total) / count : 0.0;
    }
    std::uint64_t di(int v, unsigned interfaces) const {
        int best = kInf;
        for (int i = 0; i < n; ++i)
            if (interfaces >> i & 1) best = std::min(best, dist[i][v]);
        return best >= kInf ? static_cast<std::uint64_t>(n) : static_cast<std::uint64_t>(best);
    }
};

void check_all_graphs(int n, bool self_loops, bool all_interface_sets) {
    std::vector<std::pair<int, int>> slots;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j || self_loops) slots.emplace_back(i, j);
    const std::uint64_t graphs = 1ull << slots.size();
    const unsigned iface_max = all_interface_sets ? (1u << n) : 2u;

    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("f" + std::to_string(i));

    for (std::uint64_t mask = 0; mask < graphs; ++mask) {
        Oracle o{n};
        CallGraph base;
        for (const auto& name : names) base.add_node(name);
        for (std::size_t s = 0; s < slots.size(); ++s) {
            if (mask >> s & 1) {
                o.adj[slots[s].first][slots[s].second] = true;
                base.add_edge(slots[s].first, slots[s].second);
            }
        }
        o.close();
        for (int v = 0; v < n; ++v) {
            ASSERT_EQ(clustering_coefficient(base, names[v]), o.cc(v)) << "mask " << mask << " node " << v;
            ASSERT_EQ(node_path_length(base, names[v]), o.nl(v)) << "mask " << mask << " node " << v;
        }
        for (unsigned iface = 1; iface < iface_max; ++iface) {
            CallGraph g = base;
            for (int i = 0; i < n; ++i) {
                FunctionNode node = g.node(i);
                node.is_interface = iface >> i & 1;
                g.upsert_node(node);
            }
            for (int v = 0; v < n; ++v) {
                ASSERT_EQ(distance_to_interface(g, names[v]), o.di(v, iface))
                    << "mask " << mask << " iface " << iface << " node " << v;
            }
        }
    }
}

TEST(BruteForceOracle, AllGraphsUpToThreeNodesAllInterfaceSets) {
    for (int n = 1; n <= 3; ++n) check_all_graphs(n, true, true);
}

TEST(BruteForceOracle, AllFourNodeGraphsWithSelfLoops) { check_all_graphs(4, true, false); }

TEST(BruteForceOracle, AllFiveNodeLoopFreeGraphs) { check_all_graphs(5, false, false); }

// --- properties ---------------------------------------------------------------

CallGraph reversed(const CallGraph& g) {
    CallGraph r;
    for (const auto& n : g.nodes()) r.upsert_node(n);
    for (const auto& [a, b] : g.edges()) r.add_edge(b, a);
    return r;
}

TEST(Properties, ReversalInvariants) {
    for (const char* name : {"autotrace.dot", "cycles.dot"}) {
        const auto g = parse_callgraph_dot(read_data(name));
        const auto r = reversed(g);
        for (const auto& n : g.nodes()) {
            EXPECT_EQ(clustering_coefficient(g, n.name), clustering_coefficient(r, n.name)) << n.name;
            const auto [in, out] = node_degree(g, n.name);
            const auto [rin, rout] = node_degree(r, n.name);
            EXPECT_EQ(in, rout);
            EXPECT_EQ(out, rin);
        }
    }
}

TEST(Properties, InfectionLengthBounds) {
    const auto r = parse_analysis_report(read_data("minitar.json"));
    std::size_t longest = 0;
    for (const auto& v : r.vulnerabilities)
        for (const auto& c : v.chains) longest = std::max(longest, c.size());
    for (const auto& n : r.graph.nodes()) {
        const auto f = extract_feature_vector(r, n.name);
        if (f.nv == 0) {
            EXPECT_EQ(f.li, 0u);
            continue;
        }
        EXPECT_GE(f.li, 1u);
        EXPECT_LE(f.li, longest);
        bool in_long_chain = false;
        for (const auto& v : r.vulnerabilities)
            for (const auto& c : v.chains)
                if (c.size() > 1 && std::find(c.begin(), c.end() - 1, n.name) != c.end() - 1) in_long_chain = true;
        if (!in_long_chain) EXPECT_EQ(f.li, 1u) << n.name;
    }
}

TEST(Properties, ExtractorMatchesFreeFunctionsAndIgnoresJobs) {
    const auto r = parse_analysis_report(read_data("minitar.json"));
    const FeatureExtractor ex(r);
    const auto serial = ex.extract_all(1);
    EXPECT_EQ(ex.extract_all(4), serial);
    EXPECT_EQ(ex.extract_all(64), serial);
    for (std::size_t i = 0; i < r.graph.node_count(); ++i) {
        EXPECT_EQ(extract_feature_vector(r, r.graph.node(i).name), serial[i]) << r.graph.node(i).name;
        EXPECT_GE(serial[i].cc, 0.0);
        EXPECT_LE(serial[i].cc, 1.0);
    }
}

// --- vectors and CSV ----------------------------------------------------------

TEST(FeatureVector, ProjectionAndFromValues) {
    const auto r = autotrace();
    const auto f = extract_feature_vector(r, "ReadImage");
    EXPECT_EQ(f.project(FeatureMode::Original7).size(), 7u);
    EXPECT_EQ(f.project(FeatureMode::Extended10).size(), 10u);
    const auto arr = f.to_array();
    EXPECT_EQ(FeatureVector::from_values(arr), f);
    const std::vector<double> neg{-1, 0, 0, 0, 0, 0, 0};
    EXPECT_THROW(FeatureVector::from_values(neg), DomainError);
    EXPECT_EQ(feature_mode_from_name("original7"), FeatureMode::Original7);
    EXPECT_THROW(feature_mode_from_name("eleven"), ParseError);
}

TEST(FeatureCsv, FormatReal) {
    EXPECT_EQ(format_real(0.5), "0.5");
    EXPECT_EQ(format_real(1.0), "1.0");
    EXPECT_EQ(format_real(0.0), "0.0");
    EXPECT_EQ(format_real(1.0 / 3.0), "0.333333");
}

TEST(FeatureCsv, RoundTrip) {
    const auto r = autotrace();
    const FeatureExtractor ex(r);
    std::vector<FeatureRow> rows;
    const auto all = ex.extract_all();
    for (std::size_t i = 0; i < all.size(); ++i) rows.push_back({r.graph.node(i).name, all[i]});
    std::ostringstream out;
    write_feature_csv(out, rows);
    const auto text = out.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "function,d_in,d_out,di,cc,nl,nv,li,s,fx,pt");
    EXPECT_NE(text.find("\nrle_fread,1,3,3,0.5,1.0,1,1,164,21,2\n"), std::string::npos);
    const auto [back, mode] = read_feature_csv(text);
    EXPECT_EQ(mode, FeatureMode::Extended10);
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(back[i].function, rows[i].function);
        EXPECT_NEAR(back[i].features.cc, rows[i].features.cc, 1e-6);
        EXPECT_EQ(back[i].features.nv, rows[i].features.nv);
    }
}

TEST(FeatureCsv, SevenColumnHeader) {
    const auto [rows, mode] = read_feature_csv("function,d_in,d_out,di,cc,nl,nv,li\nf,1,2,3,0.5,1.5,1,1\n");
    EXPECT_EQ(mode, FeatureMode::Original7);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].features.pt, 0u);
}

TEST(FeatureCsv, RejectsMalformed) {
    EXPECT_THROW(read_feature_csv("name,a,b\n"), ParseError);
    EXPECT_THROW(read_feature_csv("function,d_in,d_out,di,cc,nl,nv,li\nf,1,2\n"), ParseError);
    EXPECT_THROW(read_feature_csv("function,d_in,d_out,di,cc,nl,nv,li\nf,1,2,x,0.5,1.5,1,1\n"), ParseError);
}

}  // namespace
