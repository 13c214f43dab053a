#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "vulnscore/error.hpp"
#include "vulnscore/triage.hpp"

namespace vulnscore::triage {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kKindNames{"node_clicked", "source_expanded",
                                                     "score_changed", "feedback_sent"};

std::string letter(cvss3::Metric m, int value) { return std::string(1, cvss3::value_letter(m, value)); }

int value_of(cvss3::Metric m, const json& j, const char* key) {
    const auto s = j.at(key).get<std::string>();
    if (s.size() != 1) throw ValidationError(key, "expected a single metric letter");
    return cvss3::value_from_letter(m, s[0]);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

}  // namespace

std::string_view event_kind_name(EventKind k) noexcept { return kKindNames[static_cast<std::size_t>(k)]; }

EventKind event_kind_from_name(std::string_view name) {
    for (std::size_t k = 0; k < kKindNames.size(); ++k) {
        if (kKindNames[k] == name) return static_cast<EventKind>(k);
    }
    throw ValidationError("kind", "unknown event kind '" + std::string(name) + "'");
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::system_clock::to_time_t(now);
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

TriageStore::TriageStore(AssessmentReport assessment, AnalysisReport report, StoreOptions options)
    : assessment_(std::move(assessment)), report_(std::move(report)), options_(std::move(options)) {
    if (!options_.clock) options_.clock = utc_now;
    for (const auto& f : assessment_.functions) {
        if (!report_.graph.contains(f.name)) {
            throw IntegrityError("assessed function '" + f.name + "' is not in the call graph");
        }
        state_.vectors.emplace(f.name, f.vector);
    }

    if (!options_.log_path.empty()) {
        if (std::filesystem::exists(options_.log_path)) {
            std::size_t n = 0;
            for (const auto& line : read_lines(options_.log_path)) {
                ++n;
                if (line.empty()) continue;
                json record;
                try {
                    record = json::parse(line);
                    apply_record(state_, record);
                } catch (const std::exception& e) {
                    throw ParseError("event log " + options_.log_path.string() + ": " + e.what(), n);
                }
                next_seq_ = std::max(next_seq_, record.at("seq").get<std::uint64_t>() + 1);
            }
        }
        log_.open(options_.log_path, std::ios::app);
        if (!log_) throw ConfigError("cannot open event log " + options_.log_path.string());
    }
}

TriageStore::~TriageStore() {
    if (log_.is_open()) log_.flush();
}

void TriageStore::apply_record(State& state, const json& record) const {
    const auto type = record.at("type").get<std::string>();
    if (type == "override") {
        const auto fn = record.at("function").get<std::string>();
        const auto metric = cvss3::metric_from_name(record.at("metric").get<std::string>());
        auto it = state.vectors.find(fn);
        if (it == state.vectors.end()) throw NotFoundError("override for unknown function '" + fn + "'");
        const int old_value = value_of(metric, record, "old_value");
        const int new_value = value_of(metric, record, "new_value");
        if (it->second.get(metric) != old_value) {
            throw StaleOverrideError("override of " + fn + " " + std::string(cvss3::metric_name(metric)) +
                                         " does not start from the current value",
                                     it->second.get(metric));
        }
        it->second.set(metric, new_value);
        state.latest[fn][metric] = ScoreOverride{record.at("seq").get<std::uint64_t>(),
                                                 fn,
                                                 metric,
                                                 old_value,
                                                 new_value,
                                                 record.at("actor").get<std::string>(),
                                                 record.at("timestamp").get<std::string>()};
    } else if (type == "event") {
        event_kind_from_name(record.at("kind").get<std::string>());
    } else if (type != "feedback") {
        throw ValidationError("type", "unknown record type '" + type + "'");
    }
    state.records.push_back(record.dump());
}

void TriageStore::commit(std::vector<json> records) {
    if (log_.is_open()) {
        std::string block;
        for (const auto& r : records) block += r.dump() + '\n';
        log_ << block;
        log_.flush();
        if (!log_) throw Error("failed to append to event log " + options_.log_path.string());
    }
    std::unique_lock lock(state_mutex_);
    for (const auto& r : records) apply_record(state_, r);
}

AssessmentView TriageStore::view(const State& state, std::string_view function) const {
    const auto* f = assessment_.find(function);
    auto it = state.vectors.find(function);
    if (f == nullptr || it == state.vectors.end()) {
        throw NotFoundError("no assessment for function '" + std::string(function) + "'");
    }
    AssessmentView v;
    v.function = f->name;
    v.vector = it->second;
    v.score = cvss3::base_score(v.vector);
    v.provenance = f->provenance;
    if (auto l = state.latest.find(function); l != state.latest.end()) {
        for (const auto& [metric, o] : l->second) v.overrides.push_back(o);
    }
    return v;
}

AssessmentView TriageStore::assessment(std::string_view function) const {
    std::shared_lock lock(state_mutex_);
    return view(state_, function);
}

std::vector<std::string> TriageStore::assessed_functions() const {
    std::vector<std::string> out;
    for (const auto& f : assessment_.functions) out.push_back(f.name);
    return out;
}

AssessmentView TriageStore::put_override(std::string_view function, cvss3::Metric metric,
                                         int old_value, int new_value, std::string actor) {
    std::lock_guard writer(write_mutex_);
    // Only writers mutate state_, and we are the writer.
    auto it = state_.vectors.find(function);
    if (it == state_.vectors.end()) {
        throw NotFoundError("no assessment for function '" + std::string(function) + "'");
    }
    const auto old_letter = letter(metric, old_value);
    const auto new_letter = letter(metric, new_value);
    const int current = it->second.get(metric);
    if (current != old_value) {
        throw StaleOverrideError("stale override: " + std::string(cvss3::metric_name(metric)) +
                                     " of " + std::string(function) + " is now " +
                                     letter(metric, current),
                                 current);
    }

    const auto ts = options_.clock();
    const auto override_seq = next_seq_++;
    const auto event_seq = next_seq_++;
    commit({json{{"seq", override_seq},
                 {"timestamp", ts},
                 {"type", "override"},
                 {"function", std::string(function)},
                 {"metric", cvss3::metric_name(metric)},
                 {"old_value", old_letter},
                 {"new_value", new_letter},
                 {"actor", actor}},
            json{{"seq", event_seq},
                 {"timestamp", ts},
                 {"type", "event"},
                 {"kind", event_kind_name(EventKind::ScoreChanged)},
                 {"function", std::string(function)},
                 {"actor", actor},
                 {"override_seq", override_seq}}});
    return view(state_, function);
}

FeedbackReceipt TriageStore::post_feedback(FeedbackItem item) {
    if (item.text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw ValidationError("text", "feedback text must be non-empty");
    }
    FeedbackReceipt receipt;
    for (const auto& fn : item.functions) {
        if (!report_.graph.contains(fn)) receipt.unknown_functions.push_back(fn);
    }

    std::lock_guard writer(write_mutex_);
    const auto ts = options_.clock();
    receipt.id = next_seq_++;
    const auto event_seq = next_seq_++;
    json feedback{{"seq", receipt.id},
                  {"timestamp", ts},
                  {"type", "feedback"},
                  {"id", receipt.id},
                  {"functions", item.functions},
                  {"text", item.text},
                  {"actor", item.actor},
                  {"unknown_functions", receipt.unknown_functions}};
    if (item.contact) feedback["contact"] = {{"name", item.contact->name}, {"email", item.contact->email}};
    json event{{"seq", event_seq},
               {"timestamp", ts},
               {"type", "event"},
               {"kind", event_kind_name(EventKind::FeedbackSent)},
               {"actor", item.actor},
               {"feedback_id", receipt.id}};
    commit({std::move(feedback), std::move(event)});
    return receipt;
}

std::uint64_t TriageStore::post_event(InteractionEvent event) {
    if (event.kind == EventKind::ScoreChanged || event.kind == EventKind::FeedbackSent) {
        throw ValidationError("kind", "'" + std::string(event_kind_name(event.kind)) +
                                          "' is recorded by the server, not posted");
    }
    std::lock_guard writer(write_mutex_);
    const auto seq = next_seq_++;
    json record{{"seq", seq},
                {"timestamp", options_.clock()},
                {"type", "event"},
                {"kind", event_kind_name(event.kind)},
                {"actor", event.actor}};
    if (event.function) record["function"] = *event.function;
    commit({std::move(record)});
    return seq;
}

std::vector<std::string> TriageStore::export_log() const {
    std::shared_lock lock(state_mutex_);
    return state_.records;
}

std::size_t TriageStore::record_count() const {
    std::shared_lock lock(state_mutex_);
    return state_.records.size();
}

void TriageStore::replay(std::istream& jsonl) {
    std::lock_guard writer(write_mutex_);
    std::map<std::uint64_t, std::uint64_t> renumbered;
    std::size_t n = 0;
    for (std::string line; std::getline(jsonl, line);) {
        ++n;
        if (line.empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("invalid log record: ") + e.what(), n);
        }
        const auto old_seq = record.at("seq").get<std::uint64_t>();
        const auto seq = next_seq_++;
        renumbered[old_seq] = seq;
        record["seq"] = seq;
        for (const char* ref : {"override_seq", "feedback_id"}) {
            if (auto it = record.find(ref); it != record.end()) {
                const auto target = renumbered.find(it->get<std::uint64_t>());
                if (target == renumbered.end()) {
                    throw IntegrityError("line " + std::to_string(n) + ": " + ref +
                                         " refers to a record not in the replayed log");
                }
                *it = target->second;
            }
        }
        if (record.contains("id")) record["id"] = seq;
        // Validate against a scratch copy so a bad record is never written.
        {
            State scratch;
            scratch.vectors = state_.vectors;
            apply_record(scratch, record);
        }
        commit({std::move(record)});
    }
}

// ---------------------------------------------------------------------------

nlohmann::json TriageStore::graph_json() const {
    const auto& graph = report_.graph;
    std::map<std::string, std::set<int>, std::less<>> origin_lines;
    std::set<std::string, std::less<>> infected;
    for (const auto& v : report_.vulnerabilities) {
        origin_lines[v.function].insert(v.location.line);
        for (const auto& chain : v.chains) infected.insert(chain.begin(), chain.end());
    }

    // Function start lines per file, to bound snippets at the next function.
    std::map<std::string, std::vector<int>> starts;
    for (const auto& n : graph.nodes()) {
        if (n.file && n.line) starts[*n.file].push_back(*n.line);
    }
    for (auto& [file, lines] : starts) std::sort(lines.begin(), lines.end());

    json nodes = json::array();
    for (const auto& n : graph.nodes()) {
        json node{{"name", n.name},
                  {"is_interface", n.is_interface},
                  {"vulnerable", infected.contains(n.name)},
                  {"assessed", assessment_.find(n.name) != nullptr}};
        if (n.file) node["file"] = *n.file;
        if (n.line) node["line"] = *n.line;
        json lines = json::array();
        if (auto it = origin_lines.find(n.name); it != origin_lines.end()) {
            for (int l : it->second) lines.push_back(l);
        }
        node["vulnerable_lines"] = std::move(lines);

        if (!options_.source_root.empty() && n.file && n.line) {
            std::ifstream in(options_.source_root / *n.file);
            if (in) {
                const auto& file_starts = starts[*n.file];
                const auto next = std::upper_bound(file_starts.begin(), file_starts.end(), *n.line);
                const int last = next == file_starts.end() ? *n.line + 199 : std::min(*next - 1, *n.line + 199);
                std::vector<std::string> text;
                int ln = 0;
                for (std::string line; std::getline(in, line);) {
                    if (++ln < *n.line) continue;
                    if (ln > last) break;
                    text.push_back(line);
                }
                if (!text.empty()) node["source"] = {{"start_line", *n.line}, {"lines", text}};
            }
        }
        nodes.push_back(std::move(node));
    }
    json edges = json::array();
    for (const auto& [a, b] : graph.edges()) edges.push_back({graph.node(a).name, graph.node(b).name});
    return {{"program", report_.program},
            {"version", report_.version},
            {"nodes", std::move(nodes)},
            {"edges", std::move(edges)}};
}

}  // namespace vulnscore::triage
