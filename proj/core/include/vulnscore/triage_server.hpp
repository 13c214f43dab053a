#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "vulnscore/triage.hpp"

namespace vulnscore::triage {

struct ServerOptions {
    std::string host = "127.0.0.1";
    /// 0 picks a free port.
    int port = 8080;
    /// Built UI bundle served at "/"; empty serves a placeholder page.
    std::filesystem::path static_dir;
    /// Grants access to /api/export and provenance fields. Empty disables
    /// admin access entirely.
    std::string admin_token;
};

/// HTTP+JSON front end over a TriageStore.
///
///   GET  /api/graph
///   GET  /api/assessment/{function}
///   PUT  /api/assessment/{function}/metric   {"metric","old_value","new_value","actor"}
///   POST /api/feedback                        {"functions","text","actor","contact"?}
///   POST /api/event                           {"kind","function"?,"actor"}
///   POST /api/session
///   GET  /api/export                          (admin token)
///
/// Errors are JSON `{"error": kind, "message": ...}` with 400/403/404/409.
class TriageServer {
public:
    TriageServer(TriageStore& store, ServerOptions options);
    ~TriageServer();

    TriageServer(const TriageServer&) = delete;
    TriageServer& operator=(const TriageServer&) = delete;

    /// Binds the socket; returns the bound port. Throws ConfigError when the
    /// port is unavailable.
    int bind();
    /// Serves until stop(). bind() must have succeeded.
    void listen();
    void stop();
    bool running() const;
    /// Blocks until the server accepts connections.
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace vulnscore::triage
