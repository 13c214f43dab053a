#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vulnscore/assessment.hpp"
#include "vulnscore/callgraph.hpp"
#include "vulnscore/cvss3.hpp"
#include "vulnscore/error.hpp"

namespace vulnscore::triage {

enum class EventKind { NodeClicked, SourceExpanded, ScoreChanged, FeedbackSent };

std::string_view event_kind_name(EventKind k) noexcept;
/// Throws ValidationError for an unknown kind.
EventKind event_kind_from_name(std::string_view name);

struct ScoreOverride {
    std::uint64_t seq = 0;
    std::string function;
    cvss3::Metric metric = cvss3::Metric::AV;
    int old_value = 0;
    int new_value = 0;
    std::string actor;
    std::string timestamp;
};

struct Contact {
    std::string name;
    std::string email;
};

struct FeedbackItem {
    std::vector<std::string> functions;
    std::string text;
    std::string actor;
    std::optional<Contact> contact;
};

struct InteractionEvent {
    EventKind kind = EventKind::NodeClicked;
    std::optional<std::string> function;
    std::string actor;
};

/// Current state of one assessed function: the stored vector patched by the
/// latest override per metric, and the server-computed aggregate.
struct AssessmentView {
    std::string function;
    cvss3::Vector vector;
    cvss3::Score score;
    AssessmentProvenance provenance = AssessmentProvenance::Predicted;
    std::vector<ScoreOverride> overrides;  // latest per metric, metric order
};

/// Raised when an override's old value is no longer current.
class StaleOverrideError : public ConflictError {
public:
    StaleOverrideError(const std::string& what, int current)
        : ConflictError(what), current_(current) {}
    int current_value() const noexcept { return current_; }

private:
    int current_;
};

struct FeedbackReceipt {
    std::uint64_t id = 0;
    std::vector<std::string> unknown_functions;
};

/// Returns an ISO-8601 UTC timestamp. Injected so tests can pin time.
using Clock = std::function<std::string()>;
std::string utc_now();

struct StoreOptions {
    /// Append-only JSONL event log; empty keeps everything in memory.
    std::filesystem::path log_path;
    /// Directory that `file` paths in the report resolve against for source
    /// snippets; empty disables snippets.
    std::filesystem::path source_root;
    Clock clock = utc_now;
};

/// Event-sourced triage state. All writes go through one appender and are
/// durable before they become visible; the effective assessments are a pure
/// fold over the log, so reopening a store replays it.
///
/// Thread-safe: any number of concurrent readers, writers serialized.
class TriageStore {
public:
    TriageStore(AssessmentReport assessment, AnalysisReport report, StoreOptions options = {});
    ~TriageStore();

    TriageStore(const TriageStore&) = delete;
    TriageStore& operator=(const TriageStore&) = delete;

    /// Nodes with vulnerability flags and highlighted lines, edges, and source
    /// snippets when available.
    nlohmann::json graph_json() const;

    /// Throws NotFoundError for a function without an assessment.
    AssessmentView assessment(std::string_view function) const;
    std::vector<std::string> assessed_functions() const;

    /// Compare-and-set on (function, metric). Throws StaleOverrideError when
    /// `old_value` is not the current effective value, NotFoundError for an
    /// unknown function and DomainError for an out-of-range value.
    AssessmentView put_override(std::string_view function, cvss3::Metric metric, int old_value,
                                int new_value, std::string actor);

    /// Throws ValidationError for empty text. Unknown function names are
    /// accepted and reported back.
    FeedbackReceipt post_feedback(FeedbackItem item);

    /// `score_changed` is reserved for overrides and rejected here.
    std::uint64_t post_event(InteractionEvent event);

    /// Every record in log order, one JSON document per line.
    std::vector<std::string> export_log() const;

    /// Applies exported records to this store (and its log) in order.
    /// Overrides are re-checked, so replaying onto the wrong base fails.
    void replay(std::istream& jsonl);

    std::size_t record_count() const;

private:
    struct State {
        std::map<std::string, cvss3::Vector, std::less<>> vectors;
        std::map<std::string, std::map<cvss3::Metric, ScoreOverride>, std::less<>> latest;
        std::vector<std::string> records;
    };

    void apply_record(State& state, const nlohmann::json& record) const;
    /// Writes records durably, then publishes them. Caller holds write_mutex_.
    void commit(std::vector<nlohmann::json> records);
    void replay_record(const nlohmann::json& record);
    AssessmentView view(const State& state, std::string_view function) const;

    AssessmentReport assessment_;
    AnalysisReport report_;
    StoreOptions options_;

    mutable std::shared_mutex state_mutex_;
    std::mutex write_mutex_;
    State state_;
    std::uint64_t next_seq_ = 1;
    std::ofstream log_;
};

}  // namespace vulnscore::triage
