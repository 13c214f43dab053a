#include "vulnscore/callgraph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <deque>
#include <set>

#include "json_util.hpp"
#include "vulnscore/error.hpp"

namespace vulnscore {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// CallGraph

CallGraph::Index CallGraph::add_node(std::string name) {
    if (auto it = index_.find(name); it != index_.end()) return it->second;
    if (name.empty()) throw ValidationError("node", "function name must be non-empty");
    const Index i = nodes_.size();
    FunctionNode node;
    node.name = name;
    nodes_.push_back(std::move(node));
    index_.emplace(std::move(name), i);
    out_.emplace_back();
    in_.emplace_back();
    return i;
}

CallGraph::Index CallGraph::upsert_node(FunctionNode node) {
    if (node.name.empty()) throw ValidationError("node", "function name must be non-empty");
    if (node.instruction_count > 0 && node.basic_block_count > 0 &&
        node.instruction_count < node.basic_block_count) {
        throw ValidationError(node.name, "instruction count " +
                                             std::to_string(node.instruction_count) +
                                             " is below basic-block count " +
                                             std::to_string(node.basic_block_count));
    }
    const Index i = add_node(node.name);
    nodes_[i] = std::move(node);
    return i;
}

bool CallGraph::add_edge(Index caller, Index callee) {
    if (caller >= nodes_.size() || callee >= nodes_.size()) {
        throw IntegrityError("edge endpoint out of range");
    }
    auto& outs = out_[caller];
    const auto pos = std::lower_bound(outs.begin(), outs.end(), callee);
    if (pos != outs.end() && *pos == callee) return false;
    outs.insert(pos, callee);
    auto& ins = in_[callee];
    ins.insert(std::lower_bound(ins.begin(), ins.end(), caller), caller);
    ++edge_count_;
    return true;
}

bool CallGraph::add_edge(std::string_view caller, std::string_view callee) {
    const auto a = find(caller);
    const auto b = find(callee);
    if (!a || !b) {
        throw IntegrityError("edge (" + std::string(caller) + ", " + std::string(callee) +
                             ") references an unknown function");
    }
    return add_edge(*a, *b);
}

std::optional<CallGraph::Index> CallGraph::find(std::string_view name) const {
    // unordered_map<std::string> has no heterogeneous lookup without a custom hash
    if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
    return std::nullopt;
}

CallGraph::Index CallGraph::index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw NotFoundError("unknown function '" + std::string(name) + "'");
}

bool CallGraph::has_edge(Index caller, Index callee) const {
    const auto& outs = out_.at(caller);
    return std::binary_search(outs.begin(), outs.end(), callee);
}

std::vector<std::pair<CallGraph::Index, CallGraph::Index>> CallGraph::edges() const {
    std::vector<std::pair<Index, Index>> out;
    out.reserve(edge_count_);
    for (Index a = 0; a < out_.size(); ++a) {
        for (Index b : out_[a]) out.emplace_back(a, b);
    }
    return out;
}

bool operator==(const CallGraph& a, const CallGraph& b) {
    return a.nodes_ == b.nodes_ && a.out_ == b.out_;
}

// ---------------------------------------------------------------------------
// DOT subset

namespace {

enum class Tok { Id, LBrace, RBrace, LBracket, RBracket, Semi, Comma, Equals, Arrow, Dash, End };

struct Token {
    Tok kind;
    std::string text;
    std::size_t line;
    bool quoted = false;
};

class DotLexer {
public:
    explicit DotLexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space_and_comments();
            if (pos_ >= src_.size()) {
                out.push_back({Tok::End, "", line_});
                return out;
            }
            const char c = src_[pos_];
            const std::size_t line = line_;
            switch (c) {
                case '{': out.push_back({Tok::LBrace, "{", line}); ++pos_; continue;
                case '}': out.push_back({Tok::RBrace, "}", line}); ++pos_; continue;
                case '[': out.push_back({Tok::LBracket, "[", line}); ++pos_; continue;
                case ']': out.push_back({Tok::RBracket, "]", line}); ++pos_; continue;
                case ';': out.push_back({Tok::Semi, ";", line}); ++pos_; continue;
                case ',': out.push_back({Tok::Comma, ",", line}); ++pos_; continue;
                case '=': out.push_back({Tok::Equals, "=", line}); ++pos_; continue;
                default: break;
            }
            if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
                out.push_back({Tok::Arrow, "->", line});
                pos_ += 2;
                continue;
            }
            if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '-') {
                out.push_back({Tok::Dash, "--", line});
                pos_ += 2;
                continue;
            }
            if (c == '"') {
                out.push_back({Tok::Id, quoted(), line, true});
                continue;
            }
            if (is_id_char(c) || c == '-' || c == '.') {
                out.push_back({Tok::Id, bare(), line});
                continue;
            }
            throw ParseError(std::string("unexpected character '") + c + "'", line);
        }
    }

private:
    static bool is_id_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
               static_cast<unsigned char>(c) >= 0x80;
    }

    void skip_space_and_comments() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '\n') {
                ++line_;
                ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (c == '#' && at_line_start()) {
                while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
            } else if (src_.substr(pos_, 2) == "//") {
                while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
            } else if (src_.substr(pos_, 2) == "/*") {
                const std::size_t start_line = line_;
                pos_ += 2;
                while (pos_ < src_.size() && src_.substr(pos_, 2) != "*/") {
                    if (src_[pos_] == '\n') ++line_;
                    ++pos_;
                }
                if (pos_ >= src_.size()) throw ParseError("unterminated comment", start_line);
                pos_ += 2;
            } else {
                return;
            }
        }
    }

    bool at_line_start() const {
        std::size_t p = pos_;
        while (p > 0) {
            const char c = src_[p - 1];
            if (c == '\n') return true;
            if (!std::isspace(static_cast<unsigned char>(c))) return false;
            --p;
        }
        return true;
    }

    std::string quoted() {
        const std::size_t start_line = line_;
        ++pos_;
        std::string out;
        while (pos_ < src_.size() && src_[pos_] != '"') {
            char c = src_[pos_];
            if (c == '\\' && pos_ + 1 < src_.size()) {
                const char next = src_[pos_ + 1];
                if (next == '"' || next == '\\') {
                    c = next;
                    ++pos_;
                } else if (next == '\n') {
                    // line continuation
                    pos_ += 2;
                    ++line_;
                    continue;
                }
            }
            if (c == '\n') ++line_;
            out += c;
            ++pos_;
        }
        if (pos_ >= src_.size()) throw ParseError("unterminated string", start_line);
        ++pos_;
        return out;
    }

    std::string bare() {
        const std::size_t start = pos_;
        if (src_[pos_] == '-') ++pos_;
        while (pos_ < src_.size() && (is_id_char(src_[pos_]) || src_[pos_] == '.')) ++pos_;
        return std::string(src_.substr(start, pos_ - start));
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

class DotParser {
public:
    explicit DotParser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    CallGraph run() {
        if (keyword("strict")) ++pos_;
        if (keyword("graph")) {
            throw UnsupportedFormatError("line " + std::to_string(peek().line) +
                                         ": undirected 'graph' is not supported; use 'digraph'");
        }
        if (!keyword("digraph")) fail("expected 'digraph'");
        ++pos_;
        if (peek().kind == Tok::Id) ++pos_;
        expect(Tok::LBrace, "'{'");
        while (peek().kind != Tok::RBrace) {
            if (peek().kind == Tok::End) fail("missing closing '}'");
            statement();
        }
        ++pos_;
        if (peek().kind != Tok::End) fail("unexpected content after closing '}'");

        for (const auto& node : graph_.nodes()) {
            if (node.instruction_count > 0 && node.basic_block_count > 0 &&
                node.instruction_count < node.basic_block_count) {
                throw ParseError("node '" + node.name +
                                 "': instructions must be >= basic_blocks");
            }
        }
        return std::move(graph_);
    }

private:
    using Attrs = std::vector<std::pair<Token, Token>>;

    const Token& peek() const { return toks_[pos_]; }

    bool keyword(std::string_view kw) const {
        return peek().kind == Tok::Id && !peek().quoted && iequals(peek().text, kw);
    }

    [[noreturn]] void fail(const std::string& what) const {
        const auto& t = peek();
        throw ParseError(what + (t.kind == Tok::End ? " at end of input" : " near '" + t.text + "'"),
                         t.line);
    }

    void expect(Tok kind, const char* what) {
        if (peek().kind != kind) fail(std::string("expected ") + what);
        ++pos_;
    }

    void statement() {
        if (peek().kind == Tok::Semi) {
            ++pos_;
            return;
        }
        if (keyword("subgraph") || peek().kind == Tok::LBrace) {
            throw UnsupportedFormatError("line " + std::to_string(peek().line) +
                                         ": subgraphs are not supported");
        }
        if (keyword("graph") || keyword("node") || keyword("edge")) {
            ++pos_;
            attr_lists();
            return;
        }
        if (peek().kind != Tok::Id) fail("expected a statement");
        const Token first = peek();
        ++pos_;

        if (peek().kind == Tok::Equals) {
            // graph-level attribute
            ++pos_;
            if (peek().kind != Tok::Id) fail("expected attribute value");
            ++pos_;
            return;
        }
        if (peek().kind == Tok::Dash) {
            throw UnsupportedFormatError("line " + std::to_string(peek().line) +
                                         ": undirected edge '--' is not supported");
        }
        if (peek().kind == Tok::Arrow) {
            std::vector<std::string> chain{first.text};
            while (peek().kind == Tok::Arrow) {
                ++pos_;
                if (peek().kind != Tok::Id) fail("expected node identifier after '->'");
                chain.push_back(peek().text);
                ++pos_;
            }
            attr_lists();  // edge attributes carry nothing we use
            for (const auto& name : chain) graph_.add_node(name);
            for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
                graph_.add_edge(*graph_.find(chain[k]), *graph_.find(chain[k + 1]));
            }
            return;
        }

        const auto attrs = attr_lists();
        const auto idx = graph_.add_node(first.text);
        FunctionNode node = graph_.node(idx);
        for (const auto& [key, value] : attrs) apply(node, key, value);
        graph_.upsert_node(std::move(node));
    }

    Attrs attr_lists() {
        Attrs out;
        while (peek().kind == Tok::LBracket) {
            ++pos_;
            while (peek().kind != Tok::RBracket) {
                if (peek().kind != Tok::Id) fail("expected attribute name");
                Token key = peek();
                ++pos_;
                expect(Tok::Equals, "'='");
                if (peek().kind != Tok::Id) fail("expected attribute value");
                out.emplace_back(std::move(key), peek());
                ++pos_;
                if (peek().kind == Tok::Comma || peek().kind == Tok::Semi) ++pos_;
            }
            ++pos_;
        }
        return out;
    }

    static std::uint64_t count(const Token& key, const Token& value) {
        std::uint64_t n = 0;
        const auto* first = value.text.data();
        const auto* last = first + value.text.size();
        auto [ptr, ec] = std::from_chars(first, last, n);
        if (ec != std::errc{} || ptr != last) {
            throw ParseError("attribute '" + key.text + "' expects a non-negative integer, got '" +
                                 value.text + "'",
                             value.line);
        }
        return n;
    }

    static void apply(FunctionNode& node, const Token& key, const Token& value) {
        if (key.text == "interface") {
            if (value.text == "true" || value.text == "1") {
                node.is_interface = true;
            } else if (value.text == "false" || value.text == "0") {
                node.is_interface = false;
            } else {
                throw ParseError("attribute 'interface' expects true/false, got '" + value.text + "'",
                                 value.line);
            }
        } else if (key.text == "instructions") {
            node.instruction_count = count(key, value);
        } else if (key.text == "basic_blocks") {
            node.basic_block_count = count(key, value);
        } else if (key.text == "pointer_params") {
            node.pointer_param_count = count(key, value);
        } else if (key.text == "file") {
            node.file = value.text;
        } else if (key.text == "line") {
            const auto n = count(key, value);
            if (n == 0) throw ParseError("attribute 'line' must be >= 1", value.line);
            node.line = static_cast<int>(n);
        }
        // Anything else (label, shape, color, ...) is presentation only.
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    CallGraph graph_;
};

}  // namespace

CallGraph parse_callgraph_dot(std::string_view text) {
    return DotParser(DotLexer(text).run()).run();
}

// ---------------------------------------------------------------------------
// Native JSON

CallGraph callgraph_from_json(const json& doc, const std::string& path) {
    using namespace jsonutil;
    CallGraph graph;
    const auto& functions = require_array(doc, "functions", path);
    for (std::size_t k = 0; k < functions.size(); ++k) {
        const auto& f = functions[k];
        const std::string at = path + ".functions[" + std::to_string(k) + "]";
        require_object(f, at);
        FunctionNode node;
        node.name = require_string(f, "name", at);
        if (node.name.empty()) throw ValidationError(at + ".name", "must be non-empty");
        if (graph.contains(node.name)) {
            throw ValidationError(at + ".name", "duplicate function '" + node.name + "'");
        }
        node.file = optional_string(f, "file", at);
        if (auto line = optional_uint(f, "line", at)) {
            if (*line == 0) throw ValidationError(at + ".line", "must be >= 1");
            node.line = static_cast<int>(*line);
        }
        node.is_interface = require_bool(f, "is_interface", at);
        node.instruction_count = require_uint(f, "instructions", at);
        node.basic_block_count = require_uint(f, "basic_blocks", at);
        node.pointer_param_count = require_uint(f, "pointer_params", at);
        try {
            graph.upsert_node(std::move(node));
        } catch (const ValidationError& e) {
            throw ValidationError(at, e.what());
        }
    }

    const auto& edges = require_array(doc, "edges", path);
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto& e = edges[k];
        const std::string at = path + ".edges[" + std::to_string(k) + "]";
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
            throw ValidationError(at, "expected [caller, callee]");
        }
        const auto caller = e[0].get<std::string>();
        const auto callee = e[1].get<std::string>();
        for (const auto& name : {caller, callee}) {
            if (!graph.contains(name)) {
                throw IntegrityError(at + ": unknown function '" + name + "'");
            }
        }
        graph.add_edge(caller, callee);
    }
    return graph;
}

json callgraph_to_json(const CallGraph& graph) {
    json functions = json::array();
    for (const auto& n : graph.nodes()) {
        json f = {{"name", n.name},
                  {"is_interface", n.is_interface},
                  {"instructions", n.instruction_count},
                  {"basic_blocks", n.basic_block_count},
                  {"pointer_params", n.pointer_param_count}};
        if (n.file) f["file"] = *n.file;
        if (n.line) f["line"] = *n.line;
        functions.push_back(std::move(f));
    }
    json edges = json::array();
    for (const auto& [a, b] : graph.edges()) {
        edges.push_back({graph.node(a).name, graph.node(b).name});
    }
    return {{"functions", std::move(functions)}, {"edges", std::move(edges)}};
}

CallGraph parse_callgraph(std::string_view text) {
    std::size_t p = 0;
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
    if (p < text.size() && text[p] != '{') return parse_callgraph_dot(text);
    return callgraph_from_json(jsonutil::parse(text));
}

// ---------------------------------------------------------------------------
// Analysis report

namespace {

Vulnerability parse_vulnerability(const json& v, const std::string& at, const CallGraph& graph) {
    using namespace jsonutil;
    require_object(v, at);
    Vulnerability out;
    out.id = require_string(v, "id", at);
    if (out.id.empty()) throw ValidationError(at + ".id", "must be non-empty");
    out.function = require_string(v, "function", at);
    if (!graph.contains(out.function)) {
        throw IntegrityError(at + ".function: unknown function '" + out.function + "'");
    }

    const auto& loc = require_member(v, "location", at);
    require_object(loc, at + ".location");
    out.location.file = require_string(loc, "file", at + ".location");
    const auto line = require_uint(loc, "line", at + ".location");
    if (line == 0) throw ValidationError(at + ".location.line", "must be >= 1");
    out.location.line = static_cast<int>(line);

    const auto kind = require_string(v, "kind", at);
    if (kind != "buffer-overflow") {
        throw ValidationError(at + ".kind", "unsupported kind '" + kind + "'");
    }

    const auto& chains = require_array(v, "chains", at);
    bool has_origin_chain = false;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const std::string cat = at + ".chains[" + std::to_string(c) + "]";
        const auto& chain = chains[c];
        if (!chain.is_array()) throw ValidationError(cat, "expected an array of function names");
        if (chain.empty()) throw ValidationError(cat, "chain must be non-empty");
        std::vector<std::string> names;
        for (std::size_t k = 0; k < chain.size(); ++k) {
            if (!chain[k].is_string()) {
                throw ValidationError(cat + "[" + std::to_string(k) + "]", "expected a string");
            }
            names.push_back(chain[k].get<std::string>());
            if (!graph.contains(names.back())) {
                throw IntegrityError(cat + ": unknown function '" + names.back() + "'");
            }
        }
        if (names.back() != out.function) {
            throw IntegrityError(cat + ": chain must end at '" + out.function + "'");
        }
        for (std::size_t k = 0; k + 1 < names.size(); ++k) {
            if (!graph.has_edge(graph.index_of(names[k]), graph.index_of(names[k + 1]))) {
                throw IntegrityError(cat + ": no call edge (" + names[k] + ", " + names[k + 1] +
                                     ")");
            }
        }
        if (names.size() == 1) has_origin_chain = true;
        out.chains.push_back(std::move(names));
    }
    if (!has_origin_chain) out.chains.insert(out.chains.begin(), {out.function});
    return out;
}

}  // namespace

AnalysisReport parse_analysis_report(std::string_view text, std::optional<CallGraph> external_graph) {
    using namespace jsonutil;
    const json doc = parse(text);
    require_object(doc, "$");

    AnalysisReport report;
    report.program = require_string(doc, "program", "$");
    report.version = require_string(doc, "version", "$");

    const bool embedded = doc.contains("functions") || doc.contains("edges");
    if (embedded) {
        report.graph = callgraph_from_json(doc, "$");
    } else if (external_graph) {
        report.graph = std::move(*external_graph);
    } else {
        throw ValidationError("$.functions", "report carries no call graph and none was supplied");
    }

    const auto& vulns = require_array(doc, "vulnerabilities", "$");
    std::set<std::string> ids;
    for (std::size_t k = 0; k < vulns.size(); ++k) {
        const std::string at = "$.vulnerabilities[" + std::to_string(k) + "]";
        auto v = parse_vulnerability(vulns[k], at, report.graph);
        if (!ids.insert(v.id).second) {
            throw ValidationError(at + ".id", "duplicate vulnerability id '" + v.id + "'");
        }
        report.vulnerabilities.push_back(std::move(v));
    }
    return report;
}

json analysis_report_to_json(const AnalysisReport& report) {
    json doc = callgraph_to_json(report.graph);
    doc["program"] = report.program;
    doc["version"] = report.version;
    json vulns = json::array();
    for (const auto& v : report.vulnerabilities) {
        vulns.push_back({{"id", v.id},
                         {"function", v.function},
                         {"location", {{"file", v.location.file}, {"line", v.location.line}}},
                         {"kind", "buffer-overflow"},
                         {"chains", v.chains}});
    }
    doc["vulnerabilities"] = std::move(vulns);
    return doc;
}

// ---------------------------------------------------------------------------
// Queries

std::vector<CallGraph::Index> neighbor_indices(const CallGraph& graph, CallGraph::Index fn,
                                               Direction dir) {
    switch (dir) {
        case Direction::In: return graph.callers(fn);
        case Direction::Out: return graph.callees(fn);
        case Direction::Both: break;
    }
    const auto& ins = graph.callers(fn);
    const auto& outs = graph.callees(fn);
    std::vector<CallGraph::Index> both;
    std::set_union(ins.begin(), ins.end(), outs.begin(), outs.end(), std::back_inserter(both));
    std::erase(both, fn);
    return both;
}

std::vector<std::string> neighbors(const CallGraph& graph, std::string_view fn, Direction dir) {
    std::vector<std::string> out;
    for (auto i : neighbor_indices(graph, graph.index_of(fn), dir)) out.push_back(graph.node(i).name);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::optional<std::size_t>> bfs_distances(const CallGraph& graph,
                                                      CallGraph::Index source) {
    std::vector<std::optional<std::size_t>> dist(graph.node_count());
    std::deque<CallGraph::Index> queue{source};
    dist.at(source) = 0;
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        for (auto v : graph.callees(u)) {
            if (!dist[v]) {
                dist[v] = *dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

std::optional<std::size_t> shortest_path_length(const CallGraph& graph, std::string_view from,
                                                std::string_view to) {
    const auto a = graph.index_of(from);
    const auto b = graph.index_of(to);
    return bfs_distances(graph, a)[b];
}

std::vector<std::string> connected_component_of(const CallGraph& graph, std::string_view entry) {
    const auto dist = bfs_distances(graph, graph.index_of(entry));
    std::vector<std::string> out;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i]) out.push_back(graph.node(i).name);
    }
    return out;
}

}  // namespace vulnscore
