#include "vulnscore/triage_server.hpp"

#include <gtest/gtest.h>

#include <httplib.h>

#include <sstream>
#include <thread>

#include "triage_fixture.hpp"

namespace {

using namespace vulnscore;
using namespace vulnscore::triage;
using nlohmann::json;

constexpr const char* kToken = "s3cret";

class TriageServerTest : public ::testing::Test {
protected:
    void SetUp() override {
        StoreOptions so;
        so.clock = [] { return std::string("2026-01-01T00:00:00Z"); };
        store_ = std::make_unique<TriageStore>(fixtures::autotrace_assessment(), fixtures::autotrace_report(), so);
        ServerOptions o;
        o.port = 0;
        o.admin_token = kToken;
        server_ = std::make_unique<TriageServer>(*store_, o);
        port_ = server_->bind();
        thread_ = std::thread([this] { server_->listen(); });
        server_->wait_until_ready();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    }

    void TearDown() override {
        server_->stop();
        thread_.join();
    }

    httplib::Result put_metric(const std::string& fn, const json& body) {
        return client_->Put("/api/assessment/" + fn + "/metric", body.dump(), "application/json");
    }

    std::unique_ptr<TriageStore> store_;
    std::unique_ptr<TriageServer> server_;
    std::unique_ptr<httplib::Client> client_;
    std::thread thread_;
    int port_ = 0;
};

TEST_F(TriageServerTest, BindsAnEphemeralPort) {
    EXPECT_GT(port_, 0);
    EXPECT_TRUE(server_->running());
}

TEST_F(TriageServerTest, GraphListsNodesAndEdges) {
    auto r = client_->Get("/api/graph");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_NE(r->get_header_value("Content-Type").find("application/json"), std::string::npos);
    const auto g = json::parse(r->body);
    EXPECT_EQ(g["nodes"].size(), 12u);
    EXPECT_EQ(g["edges"].size(), 16u);
    bool flagged = false;
    for (const auto& n : g["nodes"]) {
        if (n["name"] == "ReadImage") flagged = n["vulnerable"].get<bool>();
    }
    EXPECT_TRUE(flagged);
}

TEST_F(TriageServerTest, AssessmentHidesProvenanceWithoutAdmin) {
    auto r = client_->Get("/api/assessment/ReadImage");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200);
    const auto a = json::parse(r->body);
    EXPECT_EQ(a["vector"], fixtures::kReadImageVector);
    EXPECT_DOUBLE_EQ(a["score"].get<double>(), 9.8);
    EXPECT_EQ(a["rating"], "Critical");
    EXPECT_EQ(a["metrics"]["A"], "H");
    EXPECT_FALSE(a.contains("provenance"));

    auto admin = client_->Get("/api/assessment/ReadImage", {{"X-Admin-Token", kToken}});
    ASSERT_TRUE(admin);
    EXPECT_EQ(json::parse(admin->body)["provenance"], "GroundTruth");
    auto bearer = client_->Get("/api/assessment/std_fread", {{"Authorization", std::string("Bearer ") + kToken}});
    EXPECT_EQ(json::parse(bearer->body)["provenance"], "Predicted");
    auto wrong = client_->Get("/api/assessment/std_fread", {{"X-Admin-Token", "nope"}});
    EXPECT_FALSE(json::parse(wrong->body).contains("provenance"));
}

TEST_F(TriageServerTest, UnknownFunctionIs404) {
    auto r = client_->Get("/api/assessment/no_such_fn");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 404);
    const auto e = json::parse(r->body);
    EXPECT_EQ(e["error"], "not_found");
    EXPECT_TRUE(e["message"].is_string());
}

TEST_F(TriageServerTest, AvailabilityOverrideLowersScoreToReferenceValue) {
    auto r = put_metric("ReadImage", {{"metric", "A"}, {"old_value", "H"}, {"new_value", "N"}, {"actor", "alice"}});
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
    const auto a = json::parse(r->body);
    const std::string vector = "CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:N";
    EXPECT_EQ(a["vector"], vector);
    const auto want = fixtures::load_cvss3_oracle().at(vector);
    EXPECT_DOUBLE_EQ(a["score"].get<double>(), std::stod(want));
    EXPECT_LT(a["score"].get<double>(), 9.8);
    ASSERT_EQ(a["overrides"].size(), 1u);
    EXPECT_EQ(a["overrides"][0]["old_value"], "H");
    EXPECT_EQ(a["overrides"][0]["actor"], "alice");

    const auto again = json::parse(client_->Get("/api/assessment/ReadImage")->body);
    EXPECT_EQ(again["vector"], vector);
}

TEST_F(TriageServerTest, StaleOverrideIs409WithCurrentValue) {
    ASSERT_EQ(put_metric("ReadImage", {{"metric", "A"}, {"old_value", "H"}, {"new_value", "L"}, {"actor", "a"}})->status, 200);
    auto r = put_metric("ReadImage", {{"metric", "A"}, {"old_value", "H"}, {"new_value", "N"}, {"actor", "b"}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 409);
    const auto e = json::parse(r->body);
    EXPECT_EQ(e["error"], "conflict");
    EXPECT_EQ(e["current"], "L");
}

TEST_F(TriageServerTest, MalformedOverridesAre400) {
    for (const auto& body : {json{{"metric", "Q"}, {"old_value", "H"}, {"new_value", "N"}},
                             json{{"metric", "A"}, {"old_value", "X"}, {"new_value", "N"}},
                             json{{"metric", "A"}, {"new_value", "N"}}}) {
        auto r = put_metric("ReadImage", body);
        ASSERT_TRUE(r);
        EXPECT_EQ(r->status, 400) << body.dump();
        EXPECT_EQ(json::parse(r->body)["error"], "validation");
    }
    auto r = client_->Put("/api/assessment/ReadImage/metric", "{oops", "application/json");
    EXPECT_EQ(r->status, 400);
    EXPECT_EQ(put_metric("main", {{"metric", "A"}, {"old_value", "H"}, {"new_value", "N"}})->status, 404);
    EXPECT_EQ(store_->record_count(), 0u);
}

TEST_F(TriageServerTest, MissingActorIssuesSession) {
    auto r = put_metric("rle_fread", {{"metric", "UI"}, {"old_value", "R"}, {"new_value", "N"}});
    ASSERT_EQ(r->status, 200);
    const auto session = json::parse(r->body)["session"].get<std::string>();
    EXPECT_EQ(session.size(), 32u);
    const auto log = store_->export_log();
    EXPECT_EQ(json::parse(log[0])["actor"], session);
}

TEST_F(TriageServerTest, SessionsAreDistinct) {
    auto a = client_->Post("/api/session", "", "application/json");
    auto b = client_->Post("/api/session", "", "application/json");
    ASSERT_EQ(a->status, 201);
    EXPECT_NE(json::parse(a->body)["session"], json::parse(b->body)["session"]);
}

TEST_F(TriageServerTest, FeedbackWarnsAboutUnknownFunctions) {
    json body{{"functions", {"ReadImage", "ghost"}}, {"text", "score seems high"}, {"actor", "u1"}};
    auto r = client_->Post("/api/feedback", body.dump(), "application/json");
    ASSERT_EQ(r->status, 201);
    const auto out = json::parse(r->body);
    EXPECT_EQ(out["unknown_functions"], json::array({"ghost"}));
    EXPECT_TRUE(out["warning"].is_string());

    json ok{{"functions", {"ReadImage"}}, {"text", "fine"}, {"actor", "u1"}};
    EXPECT_TRUE(json::parse(client_->Post("/api/feedback", ok.dump(), "application/json")->body)["warning"].is_null());

    json empty{{"functions", {"ReadImage"}}, {"text", ""}, {"actor", "u1"}};
    EXPECT_EQ(client_->Post("/api/feedback", empty.dump(), "application/json")->status, 400);
}

TEST_F(TriageServerTest, EventsAreAccepted) {
    json body{{"kind", "node_clicked"}, {"function", "main"}, {"actor", "u1"}};
    auto r = client_->Post("/api/event", body.dump(), "application/json");
    ASSERT_EQ(r->status, 202);
    EXPECT_TRUE(json::parse(r->body)["id"].is_number_unsigned());

    json reserved{{"kind", "score_changed"}, {"actor", "u1"}};
    EXPECT_EQ(client_->Post("/api/event", reserved.dump(), "application/json")->status, 400);
    json unknown{{"kind", "hover"}, {"actor", "u1"}};
    EXPECT_EQ(client_->Post("/api/event", unknown.dump(), "application/json")->status, 400);
    EXPECT_EQ(store_->record_count(), 1u);
}

TEST_F(TriageServerTest, ExportRequiresAdminToken) {
    put_metric("ReadImage", {{"metric", "A"}, {"old_value", "H"}, {"new_value", "N"}, {"actor", "a"}});
    auto denied = client_->Get("/api/export");
    ASSERT_TRUE(denied);
    EXPECT_EQ(denied->status, 403);
    EXPECT_EQ(json::parse(denied->body)["error"], "forbidden");

    auto r = client_->Get("/api/export", {{"X-Admin-Token", kToken}});
    ASSERT_EQ(r->status, 200);
    std::istringstream in(r->body);
    std::vector<json> records;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) records.push_back(json::parse(line));
    }
    ASSERT_EQ(records.size(), 2u);
    EXPECT_EQ(records[0]["type"], "override");
    EXPECT_EQ(records[1]["kind"], "score_changed");
}

TEST_F(TriageServerTest, RootServesPlaceholderWithoutBundle) {
    auto r = client_->Get("/");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_NE(r->body.find("--ui-dir"), std::string::npos);
}

TEST(TriageServerStatic, MissingBundleDirectoryIsAConfigError) {
    TriageStore store(fixtures::autotrace_assessment(), fixtures::autotrace_report());
    ServerOptions o;
    o.port = 0;
    o.static_dir = "/nonexistent/ui/bundle";
    EXPECT_THROW(
        {
            TriageServer s(store, o);
            s.bind();
        },
        ConfigError);
}

TEST(TriageServerStatic, ServesBundleFiles) {
    fixtures::TempDir dir;
    std::ofstream(dir / "index.html") << "<html>bundle</html>";
    TriageStore store(fixtures::autotrace_assessment(), fixtures::autotrace_report());
    ServerOptions o;
    o.port = 0;
    o.static_dir = dir.path();
    TriageServer s(store, o);
    const int port = s.bind();
    std::thread t([&] { s.listen(); });
    s.wait_until_ready();
    httplib::Client c("127.0.0.1", port);
    auto r = c.Get("/index.html");
    s.stop();
    t.join();
    ASSERT_TRUE(r);
    EXPECT_EQ(r->body, "<html>bundle</html>");
}

TEST(TriageServerBind, BusyPortIsAConfigError) {
    TriageStore store(fixtures::autotrace_assessment(), fixtures::autotrace_report());
    ServerOptions o;
    o.port = 0;
    TriageServer first(store, o);
    o.port = first.bind();
    TriageServer second(store, o);
    EXPECT_THROW(second.bind(), ConfigError);
}

}  // namespace
