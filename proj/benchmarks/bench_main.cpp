#include <benchmark/benchmark.h>

#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "vulnscore/callgraph.hpp"
#include "vulnscore/cvss3.hpp"
#include "vulnscore/features.hpp"
#include "vulnscore/ml.hpp"
#include "vulnscore/synthetic.hpp"

namespace {

using namespace vulnscore;

std::string read_data(const std::string& name) {
    std::ifstream in(std::string(VULNSCORE_BENCH_DATA) + "/" + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void BM_Cvss3AllVectors(benchmark::State& state) {
    const auto vectors = cvss3::all_vectors();
    for (auto _ : state) {
        int sum = 0;
        for (const auto& v : vectors) sum += cvss3::base_score(v).tenths();
        benchmark::DoNotOptimize(sum);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(vectors.size()));
}
BENCHMARK(BM_Cvss3AllVectors);

void BM_ParseVector(benchmark::State& state) {
    const std::string text = "CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H";
    for (auto _ : state) benchmark::DoNotOptimize(cvss3::parse_vector(text));
}
BENCHMARK(BM_ParseVector);

void BM_FeatureExtraction(benchmark::State& state) {
    const auto report = parse_analysis_report(read_data("minitar.json"));
    const auto jobs = static_cast<unsigned>(state.range(0));
    for (auto _ : state) {
        const FeatureExtractor extractor(report);
        benchmark::DoNotOptimize(extractor.extract_all(jobs));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(report.graph.node_count()));
}
BENCHMARK(BM_FeatureExtraction)->Arg(1)->Arg(4);

void BM_RandomForestTraining(benchmark::State& state) {
    const auto data = synthetic::planted_corpus(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ml::train_random_forest(data, cvss3::Metric::AV, {}, 1));
    }
}
BENCHMARK(BM_RandomForestTraining)->Arg(150)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_ModelSetTraining(benchmark::State& state) {
    const auto data = synthetic::planted_corpus(150, 1);
    std::vector<std::uint64_t> seeds(ml::kEnsembleSize);
    std::iota(seeds.begin(), seeds.end(), 1);
    const auto jobs = static_cast<unsigned>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ml::train_model_set(data, ml::Algorithm::RandomForest, 4, seeds, {}, jobs));
    }
}
BENCHMARK(BM_ModelSetTraining)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
