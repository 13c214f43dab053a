#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <tuple>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "vulnscore/assessment.hpp"
#include "vulnscore/callgraph.hpp"
#include "vulnscore/digest.hpp"
#include "vulnscore/error.hpp"
#include "vulnscore/features.hpp"
#include "vulnscore/ml.hpp"
#include "vulnscore/triage.hpp"
#include "vulnscore/triage_server.hpp"

namespace vulnscore::cli {

using json = nlohmann::json;

namespace {

class FileError : public Error {
public:
    using Error::Error;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw FileError("short write to " + path.string());
}

bool blank(std::string_view text) {
    return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

/// Maps library and I/O failures onto exit codes.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

AnalysisReport load_report(const fs::path& report, const std::optional<fs::path>& graph) {
    std::optional<CallGraph> external;
    if (graph) external = parse_callgraph(read_text(*graph));
    return parse_analysis_report(read_text(report), std::move(external));
}

struct Sidecar {
    std::string program;
    std::string version;
    std::vector<VulnerableFunction> vulnerable;
};

json sidecar_to_json(const Sidecar& s) {
    json list = json::array();
    for (const auto& v : s.vulnerable) {
        json locations = json::array();
        for (const auto& l : v.locations) locations.push_back({{"file", l.file}, {"line", l.line}});
        list.push_back({{"name", v.name}, {"locations", std::move(locations)}, {"chains", v.chains}});
    }
    return {{"program", s.program}, {"version", s.version}, {"vulnerable", std::move(list)}};
}

Sidecar sidecar_from_json(const fs::path& path) {
    const auto doc = json::parse(read_text(path));
    Sidecar s;
    s.program = doc.at("program").get<std::string>();
    s.version = doc.at("version").get<std::string>();
    for (const auto& v : doc.at("vulnerable")) {
        VulnerableFunction f;
        f.name = v.at("name").get<std::string>();
        for (const auto& l : v.at("locations")) {
            f.locations.push_back({l.at("file").get<std::string>(), l.at("line").get<int>()});
        }
        f.chains = v.at("chains").get<std::vector<std::vector<std::string>>>();
        s.vulnerable.push_back(std::move(f));
    }
    return s;
}

struct FeatureTable {
    Sidecar sidecar;
    std::map<std::string, FeatureVector, std::less<>> rows;
    FeatureMode mode = FeatureMode::Extended10;
};

FeatureTable load_features(const fs::path& csv, const std::optional<fs::path>& sidecar) {
    FeatureTable t;
    auto [rows, mode] = read_feature_csv(read_text(csv));
    t.mode = mode;
    for (auto& r : rows) {
        if (!t.rows.emplace(r.function, r.features).second) {
            throw ValidationError(csv.string(), "duplicate function '" + r.function + "'");
        }
    }
    t.sidecar = sidecar_from_json(sidecar.value_or(sidecar_path(csv)));
    return t;
}

std::string format_accuracy(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

}  // namespace

fs::path sidecar_path(const fs::path& features_csv) {
    auto p = features_csv;
    p.replace_extension(".vulnerable.json");
    return p;
}

nvd::FilterConfig load_filter_config(const fs::path& path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(read_text(path));
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(path.string() + ": " + e.message() + " at line " + std::to_string(e.line()));
    }
    nvd::FilterConfig config;
    if (auto cwes = tree.get_optional<std::string>("nvd.cwes")) {
        config.buffer_overflow_cwes.clear();
        for (auto& c : split_list(*cwes)) config.buffer_overflow_cwes.insert(std::move(c));
        if (config.buffer_overflow_cwes.empty()) throw ConfigError(path.string() + ": nvd.cwes is empty");
    }
    if (auto products = tree.get_optional<std::string>("nvd.products")) {
        for (auto& p : split_list(*products)) config.product_allow_list.insert(std::move(p));
    }
    return config;
}

int run_ingest(const IngestOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto config = o.config ? load_filter_config(*o.config) : nvd::FilterConfig{};
        std::vector<nvd::CveRecord> records;
        for (const auto& f : o.nvd_files) {
            const auto text = read_text(f);
            if (blank(text)) continue;
            auto parsed = nvd::parse_nvd_feed(text);
            records.insert(records.end(), std::make_move_iterator(parsed.begin()),
                           std::make_move_iterator(parsed.end()));
        }
        std::vector<nvd::GroundTruthEntry> manual;
        if (o.manual) {
            const auto text = read_text(*o.manual);
            if (!blank(text)) manual = nvd::ground_truth_from_json(text);
        }

        std::size_t no_vector = 0, product = 0, cwe = 0, no_function = 0;
        for (const auto& r : records) {
            const auto v = nvd::evaluate_filters(r, config);
            no_vector += !v.has_cvss3;
            product += !v.allowed_product;
            cwe += !v.buffer_overflow;
            no_function += !v.names_function;
        }
        const auto kept = nvd::filter_records(records, config);
        const auto entries = nvd::build_ground_truth(kept, manual, config);
        write_text(o.out, nvd::ground_truth_to_json(entries).dump(2) + "\n");

        out << "records: " << records.size() << '\n'
            << "kept: " << kept.size() << '\n'
            << "dropped without CVSS 3.0 vector: " << no_vector << '\n'
            << "dropped by product allow-list: " << product << '\n'
            << "dropped by CWE filter: " << cwe << '\n'
            << "dropped without function name: " << no_function << '\n'
            << "manual entries: " << manual.size() << '\n'
            << "ground-truth entries: " << entries.size() << '\n';
        return kOk;
    });
}

int run_features(const FeaturesOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto report = load_report(o.report, o.graph);
        const FeatureExtractor extractor(report);
        const auto features = extractor.extract_all(std::max(1u, o.jobs));

        std::vector<FeatureRow> rows;
        for (std::size_t i = 0; i < report.graph.node_count(); ++i) {
            rows.push_back({report.graph.node(i).name, features[i]});
        }
        std::ostringstream csv;
        write_feature_csv(csv, rows);
        write_text(o.out, csv.str());

        const Sidecar sidecar{report.program, report.version, vulnerable_functions(report)};
        const auto sidecar_file = o.vulnerable_out.value_or(sidecar_path(o.out));
        write_text(sidecar_file, sidecar_to_json(sidecar).dump(2) + "\n");

        out << "functions: " << rows.size() << '\n'
            << "vulnerable: " << sidecar.vulnerable.size() << '\n'
            << "wrote " << o.out.string() << " and " << sidecar_file.string() << '\n';
        return kOk;
    });
}

int run_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto algo = ml::algorithm_from_name(o.algo);
        const auto mode = feature_mode_from_name(o.feature_mode);
        if (o.kfolds < 2) throw ConfigError("--kfolds must be at least 2");
        if (!(o.split > 0.0 && o.split < 1.0)) throw ConfigError("--split must lie in (0, 1)");

        std::map<std::tuple<std::string, std::string, std::string>, FeatureVector> index;
        for (const auto& f : o.features) {
            const auto table = load_features(f, std::nullopt);
            if (feature_dimension(table.mode) < feature_dimension(mode)) {
                throw DomainError(f.string() + " holds " + std::string(feature_mode_name(table.mode)) +
                                  " features but " + o.feature_mode + " was requested");
            }
            for (const auto& [name, fv] : table.rows) {
                index.emplace(std::tuple{table.sidecar.program, table.sidecar.version, name}, fv);
            }
        }

        const auto truth = nvd::ground_truth_from_json(read_text(o.ground_truth));
        std::vector<ml::LabeledExample> examples;
        std::vector<std::string> missing;
        for (const auto& e : truth) {
            auto it = index.find({e.program, e.version, e.function});
            if (it == index.end()) {
                missing.push_back(e.program + " " + e.version + " " + e.function);
                continue;
            }
            examples.push_back({{e.program, e.version, e.function}, it->second, e.vector});
        }
        if (!missing.empty()) {
            std::string list;
            for (const auto& m : missing) list += "\n  " + m;
            throw ValidationError(o.ground_truth.string(),
                                  std::to_string(missing.size()) +
                                      " ground-truth functions have no feature row:" + list);
        }

        const ml::Dataset data(std::move(examples), mode);
        const auto [train, test] = ml::split_dataset(data, o.split, o.seed);

        std::vector<std::uint64_t> seeds = o.seeds;
        if (seeds.empty()) {
            for (std::uint64_t k = 0; k < ml::kEnsembleSize; ++k) seeds.push_back(o.seed + k);
        }
        const auto model = ml::train_model_set(train, algo, o.kfolds, seeds, {}, std::max(1u, o.jobs));

        const auto model_text = model.to_json().dump() + "\n";
        write_text(o.model, model_text);

        std::string metrics = "metric,algorithm,accuracy\n";
        for (auto m : cvss3::kMetrics) {
            metrics += std::string(cvss3::metric_name(m)) + "," + o.algo + "," +
                       format_accuracy(ml::accuracy(model, test, m)) + "\n";
        }
        write_text(o.metrics, metrics);

        out << "examples: " << data.size() << " (train " << train.size() << ", test " << test.size()
            << ")\n"
            << metrics << "model sha256: " << sha256_hex(model_text) << '\n';
        return kOk;
    });
}

int run_predict(const PredictOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto model = ml::TrainedModelSet::from_json(json::parse(read_text(o.model)));
        const auto table = load_features(o.features, o.vulnerable);
        const auto mode = model.metadata().feature_mode;
        if (feature_dimension(table.mode) < feature_dimension(mode)) {
            throw DomainError("model expects " + std::string(feature_mode_name(mode)) + " features but " +
                              o.features.string() + " holds " +
                              std::string(feature_mode_name(table.mode)));
        }

        std::vector<FeatureVector> features;
        for (const auto& v : table.sidecar.vulnerable) {
            auto it = table.rows.find(v.name);
            if (it == table.rows.end()) {
                throw IntegrityError("vulnerable function '" + v.name + "' has no feature row");
            }
            features.push_back(it->second);
        }
        std::vector<nvd::GroundTruthEntry> truth;
        if (o.ground_truth) {
            const auto text = read_text(*o.ground_truth);
            if (!blank(text)) truth = nvd::ground_truth_from_json(text);
        }

        const auto report = assess(table.sidecar.program, table.sidecar.version, table.sidecar.vulnerable,
                                   features, model, truth);
        write_text(o.out, assessment_to_json(report).dump(2) + "\n");

        std::size_t known = 0;
        for (const auto& f : report.functions) known += f.provenance == AssessmentProvenance::GroundTruth;
        out << "assessed: " << report.functions.size() << " (ground truth " << known << ", predicted "
            << report.functions.size() - known << ")\n";
        return kOk;
    });
}

int run_serve(const ServeOptions& o, std::ostream& out, std::ostream& err) {
    int rc = guarded(err, [&] {
        auto assessment = assessment_from_json(read_text(o.assessment));
        auto report = load_report(o.report, o.graph);
        triage::StoreOptions store_options;
        store_options.log_path = o.store;
        store_options.source_root = o.source_root;
        triage::TriageStore store(std::move(assessment), std::move(report), store_options);

        triage::ServerOptions server_options;
        server_options.host = o.host;
        server_options.port = o.port;
        server_options.static_dir = o.static_dir;
        server_options.admin_token = o.admin_token;
        triage::TriageServer server(store, server_options);
        int port = 0;
        try {
            port = server.bind();
        } catch (const ConfigError& e) {
            err << "error: " << e.what() << '\n';
            return -1;
        }
        out << "listening on http://" << o.host << ":" << port << std::endl;
        if (o.on_listening) o.on_listening(server, port);
        server.listen();
        if (o.on_stopped) o.on_stopped();
        out << "stopped; " << store.record_count() << " records in log" << std::endl;
        return kOk;
    });
    // A busy port is an environment failure rather than bad input.
    return rc == -1 ? kInternalError : rc;
}

}  // namespace vulnscore::cli
