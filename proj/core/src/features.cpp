#include "vulnscore/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "vulnscore/error.hpp"

namespace vulnscore {

std::size_t feature_dimension(FeatureMode mode) noexcept {
    return mode == FeatureMode::Original7 ? 7 : 10;
}

std::string_view feature_mode_name(FeatureMode mode) noexcept {
    return mode == FeatureMode::Original7 ? "original7" : "extended10";
}

FeatureMode feature_mode_from_name(std::string_view name) {
    if (name == "original7") return FeatureMode::Original7;
    if (name == "extended10") return FeatureMode::Extended10;
    throw ParseError("unknown feature mode '" + std::string(name) + "'");
}

std::array<double, FeatureVector::kSize> FeatureVector::to_array() const noexcept {
    return {static_cast<double>(d_in), static_cast<double>(d_out), static_cast<double>(di),
            cc,
            nl,
            static_cast<double>(nv),
            static_cast<double>(li),
            static_cast<double>(s),
            static_cast<double>(fx),
            static_cast<double>(pt)};
}

std::vector<double> FeatureVector::project(FeatureMode mode) const {
    const auto all = to_array();
    return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(feature_dimension(mode))};
}

FeatureVector FeatureVector::from_values(std::span<const double> values) {
    if (values.size() != 7 && values.size() != kSize) {
        throw DomainError("feature vector must have 7 or 10 components, got " +
                          std::to_string(values.size()));
    }
    auto count = [&](std::size_t k) -> std::uint64_t {
        const double v = values[k];
        if (!(v >= 0.0) || v != std::floor(v)) {
            throw DomainError("feature '" + std::string(kNames[k]) +
                              "' must be a non-negative integer");
        }
        return static_cast<std::uint64_t>(v);
    };
    FeatureVector f;
    f.d_in = count(0);
    f.d_out = count(1);
    f.di = count(2);
    f.cc = values[3];
    f.nl = values[4];
    if (f.cc < 0.0 || f.cc > 1.0) throw DomainError("feature 'cc' must lie in [0, 1]");
    if (f.nl < 0.0) throw DomainError("feature 'nl' must be non-negative");
    f.nv = count(5);
    f.li = count(6);
    if (values.size() == kSize) {
        f.s = count(7);
        f.fx = count(8);
        f.pt = count(9);
    }
    return f;
}

// ---------------------------------------------------------------------------

std::pair<std::uint64_t, std::uint64_t> node_degree(const CallGraph& graph, std::string_view fn) {
    const auto i = graph.index_of(fn);
    return {graph.callers(i).size(), graph.callees(i).size()};
}

namespace {

std::vector<std::uint64_t> interface_distances(const CallGraph& graph) {
    const std::uint64_t unreachable = graph.node_count();
    std::vector<std::uint64_t> dist(graph.node_count(), unreachable);
    std::vector<bool> seen(graph.node_count(), false);
    std::deque<CallGraph::Index> queue;
    for (CallGraph::Index i = 0; i < graph.node_count(); ++i) {
        if (graph.node(i).is_interface) {
            dist[i] = 0;
            seen[i] = true;
            queue.push_back(i);
        }
    }
    if (queue.empty()) throw ConfigError("call graph has no interface function");
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        for (auto v : graph.callees(u)) {
            if (!seen[v]) {
                seen[v] = true;
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

double clustering(const CallGraph& graph, CallGraph::Index fn) {
    const auto nbrs = neighbor_indices(graph, fn, Direction::Both);
    const std::size_t k = nbrs.size();
    if (k < 2) return 0.0;
    std::size_t linked = 0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            if (graph.has_edge(nbrs[a], nbrs[b]) || graph.has_edge(nbrs[b], nbrs[a])) ++linked;
        }
    }
    return static_cast<double>(linked) / (static_cast<double>(k * (k - 1)) / 2.0);
}

double path_length(const CallGraph& graph, CallGraph::Index fn) {
    const auto dist = bfs_distances(graph, fn);
    std::size_t total = 0;
    std::size_t reached = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (i != fn && dist[i]) {
            total += *dist[i];
            ++reached;
        }
    }
    return reached == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(reached);
}

}  // namespace

std::uint64_t distance_to_interface(const CallGraph& graph, std::string_view fn) {
    const auto i = graph.index_of(fn);
    return interface_distances(graph)[i];
}

double clustering_coefficient(const CallGraph& graph, std::string_view fn) {
    return clustering(graph, graph.index_of(fn));
}

double node_path_length(const CallGraph& graph, std::string_view fn) {
    return path_length(graph, graph.index_of(fn));
}

std::uint64_t vulnerability_count(const AnalysisReport& report, std::string_view fn) {
    report.graph.index_of(fn);
    std::vector<SourceLocation> seen;
    for (const auto& v : report.vulnerabilities) {
        const bool infects = std::any_of(v.chains.begin(), v.chains.end(), [&](const auto& chain) {
            return std::find(chain.begin(), chain.end(), fn) != chain.end();
        });
        if (infects && std::find(seen.begin(), seen.end(), v.location) == seen.end()) {
            seen.push_back(v.location);
        }
    }
    return seen.size();
}

std::uint64_t max_infection_length(const AnalysisReport& report, std::string_view fn) {
    report.graph.index_of(fn);
    std::uint64_t best = 0;
    for (const auto& v : report.vulnerabilities) {
        for (const auto& chain : v.chains) {
            const auto it = std::find(chain.begin(), chain.end(), fn);
            if (it != chain.end()) {
                best = std::max<std::uint64_t>(best, static_cast<std::uint64_t>(chain.end() - it));
            }
        }
    }
    if (best == 0) {
        throw DomainError("function '" + std::string(fn) + "' is not infected by any vulnerability");
    }
    return best;
}

FeatureVector extract_feature_vector(const AnalysisReport& report, std::string_view fn) {
    return FeatureExtractor(report).extract(report.graph.index_of(fn));
}

// ---------------------------------------------------------------------------

FeatureExtractor::FeatureExtractor(const AnalysisReport& report)
    : report_(report),
      interface_distance_(interface_distances(report.graph)),
      locations_(report.graph.node_count()),
      longest_suffix_(report.graph.node_count(), 0) {
    const auto& graph = report.graph;
    std::map<SourceLocation, std::size_t> location_ids;
    for (const auto& v : report.vulnerabilities) {
        const auto loc = location_ids.emplace(v.location, location_ids.size()).first->second;
        for (const auto& chain : v.chains) {
            for (std::size_t p = 0; p < chain.size(); ++p) {
                const auto i = graph.index_of(chain[p]);
                auto& locs = locations_[i];
                if (std::find(locs.begin(), locs.end(), loc) == locs.end()) locs.push_back(loc);
                longest_suffix_[i] = std::max<std::uint64_t>(longest_suffix_[i], chain.size() - p);
            }
        }
    }
}

FeatureVector FeatureExtractor::extract(CallGraph::Index fn) const {
    const auto& graph = report_.graph;
    const auto& node = graph.node(fn);
    FeatureVector f;
    f.d_in = graph.callers(fn).size();
    f.d_out = graph.callees(fn).size();
    f.di = interface_distance_[fn];
    f.cc = clustering(graph, fn);
    f.nl = path_length(graph, fn);
    f.nv = locations_[fn].size();
    f.li = f.nv == 0 ? 0 : longest_suffix_[fn];
    f.s = node.instruction_count;
    f.fx = node.basic_block_count;
    f.pt = node.pointer_param_count;
    return f;
}

std::vector<FeatureVector> FeatureExtractor::extract_all(unsigned jobs) const {
    const std::size_t n = report_.graph.node_count();
    std::vector<FeatureVector> out(n);
    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = extract(i);
        return out;
    }
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) out[i] = extract(i);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_real(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    std::string s = buf;
    while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
    if (s == "-0.0") s = "0.0";
    return s;
}

void write_feature_csv(std::ostream& out, const std::vector<FeatureRow>& rows) {
    out << "function";
    for (auto name : FeatureVector::kNames) out << ',' << name;
    out << '\n';
    for (const auto& row : rows) {
        const auto& f = row.features;
        out << row.function << ',' << f.d_in << ',' << f.d_out << ',' << f.di << ','
            << format_real(f.cc) << ',' << format_real(f.nl) << ',' << f.nv << ',' << f.li << ','
            << f.s << ',' << f.fx << ',' << f.pt << '\n';
    }
}

std::pair<std::vector<FeatureRow>, FeatureMode> read_feature_csv(std::string_view text) {
    std::vector<std::string> lines;
    {
        std::istringstream in{std::string(text)};
        for (std::string line; std::getline(in, line);) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(std::move(line));
        }
    }
    if (lines.empty()) throw ParseError("feature CSV is empty");

    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) return cells;
            start = comma + 1;
        }
    };

    const auto header = split(lines.front());
    FeatureMode mode{};
    if (header.size() == 11) {
        mode = FeatureMode::Extended10;
    } else if (header.size() == 8) {
        mode = FeatureMode::Original7;
    } else {
        throw ParseError("unexpected feature CSV header", 1);
    }
    if (header[0] != "function") throw ParseError("first column must be 'function'", 1);
    for (std::size_t k = 1; k < header.size(); ++k) {
        if (header[k] != FeatureVector::kNames[k - 1]) {
            throw ParseError("unexpected column '" + header[k] + "'", 1);
        }
    }

    std::vector<FeatureRow> rows;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        const auto cells = split(lines[ln]);
        if (cells.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " cells", ln + 1);
        }
        std::vector<double> values;
        for (std::size_t k = 1; k < cells.size(); ++k) {
            double v = 0.0;
            const auto& c = cells[k];
            auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc{} || ptr != c.data() + c.size()) {
                throw ParseError("invalid number '" + c + "'", ln + 1);
            }
            values.push_back(v);
        }
        if (cells[0].empty()) throw ParseError("empty function name", ln + 1);
        try {
            rows.push_back({cells[0], FeatureVector::from_values(values)});
        } catch (const DomainError& e) {
            throw ParseError(e.what(), ln + 1);
        }
    }
    return {std::move(rows), mode};
}

}  // namespace vulnscore
