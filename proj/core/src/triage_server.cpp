#include "vulnscore/triage_server.hpp"

#include <optional>
#include <random>

#include "httplib.h"
#include "vulnscore/error.hpp"

namespace vulnscore::triage {

using json = nlohmann::json;

namespace {

std::string new_session_id() {
    static thread_local std::random_device rd;
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id;
    for (int k = 0; k < 32; ++k) id += kHex[rd() & 0xf];
    return id;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
    send_json(res, status, {{"error", kind}, {"message", message}});
}

json view_to_json(const AssessmentView& v, bool admin) {
    json metrics = json::object();
    for (auto m : cvss3::kMetrics) {
        metrics[std::string(cvss3::metric_name(m))] = std::string(1, cvss3::value_letter(m, v.vector.get(m)));
    }
    json overrides = json::array();
    for (const auto& o : v.overrides) {
        overrides.push_back({{"seq", o.seq},
                             {"metric", cvss3::metric_name(o.metric)},
                             {"old_value", std::string(1, cvss3::value_letter(o.metric, o.old_value))},
                             {"new_value", std::string(1, cvss3::value_letter(o.metric, o.new_value))},
                             {"actor", o.actor},
                             {"timestamp", o.timestamp}});
    }
    json out{{"function", v.function},
             {"vector", cvss3::serialize_vector(v.vector)},
             {"metrics", std::move(metrics)},
             {"score", v.score.value()},
             {"rating", cvss3::rating_name(v.score.rating())},
             {"overrides", std::move(overrides)}};
    if (admin) out["provenance"] = assessment_provenance_name(v.provenance);
    return out;
}

json parse_body(const httplib::Request& req) {
    try {
        auto body = json::parse(req.body);
        if (!body.is_object()) throw ValidationError("$", "expected a JSON object");
        return body;
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON body: ") + e.what());
    }
}

std::string string_field(const json& body, const char* key, bool required) {
    auto it = body.find(key);
    if (it == body.end() || it->is_null()) {
        if (required) throw ValidationError(std::string("$.") + key, "missing required member");
        return {};
    }
    if (!it->is_string()) throw ValidationError(std::string("$.") + key, "expected a string");
    return it->get<std::string>();
}

int metric_value(cvss3::Metric m, const std::string& letter, const char* key) {
    if (letter.size() != 1) {
        throw ValidationError(std::string("$.") + key, "expected a single metric letter");
    }
    try {
        return cvss3::value_from_letter(m, letter[0]);
    } catch (const ParseError& e) {
        throw ValidationError(std::string("$.") + key, e.what());
    }
}

}  // namespace

struct TriageServer::Impl {
    TriageStore& store;
    ServerOptions options;
    httplib::Server server;
    int port = -1;

    Impl(TriageStore& s, ServerOptions o) : store(s), options(std::move(o)) {}

    bool is_admin(const httplib::Request& req) const {
        if (options.admin_token.empty()) return false;
        if (req.get_header_value("X-Admin-Token") == options.admin_token) return true;
        return req.get_header_value("Authorization") == "Bearer " + options.admin_token;
    }

    template <typename Handler>
    httplib::Server::Handler guarded(Handler h) {
        return [h](const httplib::Request& req, httplib::Response& res) {
            try {
                h(req, res);
            } catch (const NotFoundError& e) {
                send_error(res, 404, "not_found", e.what());
            } catch (const ConflictError& e) {
                send_error(res, 409, "conflict", e.what());
            } catch (const ValidationError& e) {
                send_error(res, 400, "validation", e.what());
            } catch (const ParseError& e) {
                send_error(res, 400, "validation", e.what());
            } catch (const DomainError& e) {
                send_error(res, 400, "validation", e.what());
            } catch (const json::exception& e) {
                send_error(res, 400, "validation", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            }
        };
    }

    void routes() {
        server.Get("/api/graph", guarded([this](const httplib::Request&, httplib::Response& res) {
                       send_json(res, 200, store.graph_json());
                   }));

        server.Get(R"(/api/assessment/([^/]+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200, view_to_json(store.assessment(req.matches[1].str()), is_admin(req)));
                   }));

        server.Put(R"(/api/assessment/([^/]+)/metric)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto body = parse_body(req);
                       const auto fn = req.matches[1].str();
                       cvss3::Metric metric{};
                       try {
                           metric = cvss3::metric_from_name(string_field(body, "metric", true));
                       } catch (const ParseError& e) {
                           throw ValidationError("$.metric", e.what());
                       }
                       const int old_value = metric_value(metric, string_field(body, "old_value", true), "old_value");
                       const int new_value = metric_value(metric, string_field(body, "new_value", true), "new_value");
                       auto actor = string_field(body, "actor", false);
                       const bool issued = actor.empty();
                       if (issued) actor = new_session_id();
                       std::optional<AssessmentView> view;
                       try {
                           view = store.put_override(fn, metric, old_value, new_value, actor);
                       } catch (const StaleOverrideError& e) {
                           send_json(res, 409,
                                     {{"error", "conflict"},
                                      {"message", e.what()},
                                      {"current", std::string(1, cvss3::value_letter(metric, e.current_value()))}});
                           return;
                       }
                       auto out = view_to_json(*view, is_admin(req));
                       if (issued) out["session"] = actor;
                       send_json(res, 200, out);
                   }));

        server.Post("/api/feedback", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto body = parse_body(req);
                        FeedbackItem item;
                        if (auto it = body.find("functions"); it != body.end() && !it->is_null()) {
                            if (!it->is_array()) throw ValidationError("$.functions", "expected an array");
                            item.functions = it->get<std::vector<std::string>>();
                        }
                        item.text = string_field(body, "text", true);
                        item.actor = string_field(body, "actor", false);
                        const bool issued = item.actor.empty();
                        if (issued) item.actor = new_session_id();
                        if (auto it = body.find("contact"); it != body.end() && it->is_object()) {
                            item.contact = Contact{string_field(*it, "name", false), string_field(*it, "email", false)};
                        }
                        const auto receipt = store.post_feedback(std::move(item));
                        json out{{"id", receipt.id},
                                 {"warning", receipt.unknown_functions.empty()
                                                 ? json(nullptr)
                                                 : json("unknown functions: " + json(receipt.unknown_functions).dump())},
                                 {"unknown_functions", receipt.unknown_functions}};
                        if (issued) out["session"] = item.actor;
                        send_json(res, 201, out);
                    }));

        server.Post("/api/event", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto body = parse_body(req);
                        InteractionEvent event;
                        event.kind = event_kind_from_name(string_field(body, "kind", true));
                        if (auto fn = string_field(body, "function", false); !fn.empty()) event.function = fn;
                        event.actor = string_field(body, "actor", false);
                        const bool issued = event.actor.empty();
                        if (issued) event.actor = new_session_id();
                        json out{{"id", store.post_event(event)}};
                        if (issued) out["session"] = event.actor;
                        send_json(res, 202, out);
                    }));

        server.Post("/api/session", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 201, {{"session", new_session_id()}});
        });

        server.Get("/api/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       if (!is_admin(req)) {
                           send_error(res, 403, "forbidden", "export requires the admin token");
                           return;
                       }
                       std::string body;
                       for (const auto& line : store.export_log()) body += line + '\n';
                       res.status = 200;
                       res.set_content(body, "application/x-ndjson");
                   }));

        if (!options.static_dir.empty()) {
            if (!server.set_mount_point("/", options.static_dir.string())) {
                throw ConfigError("static directory not found: " + options.static_dir.string());
            }
        } else {
            server.Get("/", [](const httplib::Request&, httplib::Response& res) {
                res.set_content(
                    "<!doctype html><title>vulnscore</title><p>Triage API is running. "
                    "No UI bundle configured (pass --ui-dir).</p>",
                    "text/html");
            });
        }
    }
};

TriageServer::TriageServer(TriageStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
    impl_->routes();
}

TriageServer::~TriageServer() {
    if (impl_->server.is_running()) impl_->server.stop();
}

int TriageServer::bind() {
    auto& o = impl_->options;
    // httplib defaults to SO_REUSEPORT, which lets a second server share a busy port.
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    if (o.port == 0) {
        impl_->port = impl_->server.bind_to_any_port(o.host);
    } else {
        impl_->port = impl_->server.bind_to_port(o.host, o.port) ? o.port : -1;
    }
    if (impl_->port < 0) {
        throw ConfigError("cannot bind " + o.host + ":" + std::to_string(o.port));
    }
    return impl_->port;
}

void TriageServer::listen() { impl_->server.listen_after_bind(); }

void TriageServer::stop() { impl_->server.stop(); }

bool TriageServer::running() const { return impl_->server.is_running(); }

void TriageServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace vulnscore::triage
