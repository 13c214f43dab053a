#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <ctime>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "commands.hpp"
#include "vulnscore/triage_server.hpp"

using namespace vulnscore::cli;

namespace {

sigset_t termination_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    return set;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predicts CVSS 3.0 base scores for vulnerable functions found by static analysis."};
    app.set_version_flag("--version", std::string("vulnscore ") + VULNSCORE_VERSION);
    app.require_subcommand(1);

    IngestOptions ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Build ground truth from NVD feeds and manual scores");
    ingest_cmd->add_option("--nvd", ingest.nvd_files, "NVD JSON 1.1 feed files");
    ingest_cmd->add_option("--manual", ingest.manual, "Manually scored ground-truth JSON");
    ingest_cmd->add_option("--config", ingest.config, "INI file with an [nvd] section");
    ingest_cmd->add_option("-o,--out", ingest.out, "Ground-truth JSON to write")->required();

    FeaturesOptions features;
    auto* features_cmd = app.add_subcommand("features", "Extract the feature matrix from an analysis report");
    features_cmd->add_option("--report", features.report, "Analysis report JSON")->required();
    features_cmd->add_option("--graph", features.graph, "Call graph (DOT or JSON) if not embedded");
    features_cmd->add_option("-o,--out", features.out, "Feature CSV to write")->required();
    features_cmd->add_option("--vulnerable-out", features.vulnerable_out,
                             "Vulnerable-function sidecar (default: <out>.vulnerable.json)");
    features_cmd->add_option("-j,--jobs", features.jobs, "Worker threads")->check(CLI::PositiveNumber);

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Train per-metric voting ensembles");
    train_cmd->add_option("--features", train.features, "Feature CSVs with sidecars")->required();
    train_cmd->add_option("--ground-truth", train.ground_truth, "Ground-truth JSON")->required();
    train_cmd->add_option("--algo", train.algo, "rf or nb")->check(CLI::IsMember({"rf", "nb"}));
    train_cmd->add_option("--kfolds", train.kfolds, "Cross-validation folds");
    train_cmd->add_option("--split", train.split, "Training fraction of the holdout split");
    train_cmd->add_option("--seed", train.seed, "Split seed; also the base of the ensemble seeds");
    train_cmd->add_option("--seeds", train.seeds, "Exactly 10 ensemble seeds")->delimiter(',');
    train_cmd->add_option("--feature-mode", train.feature_mode, "original7 or extended10")
        ->check(CLI::IsMember({"original7", "extended10"}));
    train_cmd->add_option("--model", train.model, "Model JSON to write")->required();
    train_cmd->add_option("--metrics", train.metrics, "Per-metric accuracy CSV to write")->required();
    train_cmd->add_option("-j,--jobs", train.jobs, "Worker threads")->check(CLI::PositiveNumber);

    PredictOptions predict;
    auto* predict_cmd = app.add_subcommand("predict", "Score vulnerable functions");
    predict_cmd->add_option("--model", predict.model, "Model JSON")->required();
    predict_cmd->add_option("--features", predict.features, "Feature CSV")->required();
    predict_cmd->add_option("--vulnerable", predict.vulnerable, "Sidecar (default: next to --features)");
    predict_cmd->add_option("--ground-truth", predict.ground_truth, "Known vectors that take precedence");
    predict_cmd->add_option("-o,--out", predict.out, "Assessment JSON to write")->required();

    ServeOptions serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the triage service");
    serve_cmd->add_option("--assessment", serve.assessment, "Assessment JSON")->required();
    serve_cmd->add_option("--report", serve.report, "Analysis report JSON")->required();
    serve_cmd->add_option("--graph", serve.graph, "Call graph if not embedded in the report");
    serve_cmd->add_option("--host", serve.host, "Bind address");
    serve_cmd->add_option("--port", serve.port, "TCP port, 0 for any free port")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--store", serve.store, "Append-only event log (JSONL)")->required();
    serve_cmd->add_option("--ui-dir", serve.static_dir, "Built UI bundle served at /");
    serve_cmd->add_option("--source-root", serve.source_root, "Directory for source snippets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInputError;
    }

    if (*ingest_cmd) return run_ingest(ingest, std::cout, std::cerr);
    if (*features_cmd) return run_features(features, std::cout, std::cerr);
    if (*train_cmd) return run_train(train, std::cout, std::cerr);
    if (*predict_cmd) return run_predict(predict, std::cout, std::cerr);

    if (const char* token = std::getenv("VULNSCORE_ADMIN_TOKEN")) serve.admin_token = token;

    // Block termination signals before any server thread exists so only the
    // watcher below receives them.
    const sigset_t signals = termination_signals();
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::jthread watcher;
    serve.on_listening = [&](vulnscore::triage::TriageServer& server, int) {
        watcher = std::jthread([&server, signals](std::stop_token stop) {
            const timespec tick{0, 200'000'000};
            while (!stop.stop_requested()) {
                if (sigtimedwait(&signals, nullptr, &tick) > 0) {
                    server.stop();
                    return;
                }
            }
        });
    };
    serve.on_stopped = [&] {
        watcher.request_stop();
        if (watcher.joinable()) watcher.join();
    };
    return run_serve(serve, std::cout, std::cerr);
}
