#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vulnscore/nvd.hpp"

namespace vulnscore::triage {
class TriageServer;
}

namespace vulnscore::cli {

namespace fs = std::filesystem;

inline constexpr int kOk = 0;
inline constexpr int kInternalError = 1;
inline constexpr int kInputError = 2;

struct IngestOptions {
    std::vector<fs::path> nvd_files;
    std::optional<fs::path> manual;
    std::optional<fs::path> config;
    fs::path out;
};

struct FeaturesOptions {
    fs::path report;
    std::optional<fs::path> graph;
    fs::path out;
    /// Defaults to sidecar_path(out).
    std::optional<fs::path> vulnerable_out;
    unsigned jobs = 1;
};

struct TrainOptions {
    std::vector<fs::path> features;
    fs::path ground_truth;
    std::string algo = "rf";
    int kfolds = 4;
    double split = 0.75;
    std::uint64_t seed = 1;
    /// Ensemble seeds; empty derives seed, seed+1, ... seed+9.
    std::vector<std::uint64_t> seeds;
    std::string feature_mode = "extended10";
    fs::path model;
    fs::path metrics;
    unsigned jobs = 1;
};

struct PredictOptions {
    fs::path model;
    fs::path features;
    std::optional<fs::path> vulnerable;
    std::optional<fs::path> ground_truth;
    fs::path out;
};

struct ServeOptions {
    fs::path assessment;
    fs::path report;
    std::optional<fs::path> graph;
    std::string host = "127.0.0.1";
    int port = 8080;
    fs::path store;
    fs::path static_dir;
    fs::path source_root;
    std::string admin_token;
    /// Called once the socket is bound, before serving starts.
    std::function<void(triage::TriageServer&, int port)> on_listening;
    /// Called after serving ends, while the server still exists.
    std::function<void()> on_stopped;
};

/// features.csv -> features.vulnerable.json
fs::path sidecar_path(const fs::path& features_csv);

/// INI file with an optional [nvd] section:
///   cwes     = CWE-119, CWE-787
///   products = autotrace, libtiff
nvd::FilterConfig load_filter_config(const fs::path& path);

int run_ingest(const IngestOptions& o, std::ostream& out, std::ostream& err);
int run_features(const FeaturesOptions& o, std::ostream& out, std::ostream& err);
int run_train(const TrainOptions& o, std::ostream& out, std::ostream& err);
int run_predict(const PredictOptions& o, std::ostream& out, std::ostream& err);
int run_serve(const ServeOptions& o, std::ostream& out, std::ostream& err);

}  // namespace vulnscore::cli
