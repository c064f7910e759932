#include "matb/predictor.hpp"
#include "matb/runner.hpp"
#include "matb/workload.hpp"

#include <benchmark/benchmark.h>

#include <filesystem>

using namespace matb;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::Parallel : Exec::Serial; }

std::vector<TrainingSample> predictor_set(std::size_t n) {
    Rng rng(3);
    std::vector<TrainingSample> out(n);
    for (auto& s : out) {
        for (auto& row : s.input)
            for (std::size_t k = 0; k < kPredictorInputs; ++k) row[k] = rng.uniform(0.0, kPredictorInputScale[k]);
        s.target = rng.uniform();
    }
    return out;
}

void BM_PredictorEpoch(benchmark::State& st) {
    const auto set = predictor_set(608);
    PredictorTrainSpec spec;
    spec.epochs = 1;
    spec.exec = exec_of(st);
    for (auto _ : st) benchmark::DoNotOptimize(train_predictor(set, LstmShape{}, 0.8, spec).loss_curve);
    st.SetItemsProcessed(st.iterations() * static_cast<long>(set.size()));
}
BENCHMARK(BM_PredictorEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EstimatorEpoch(benchmark::State& st) {
    Rng rng(4);
    std::vector<std::vector<double>> x(2500, std::vector<double>(kFeatureCount));
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (auto& v : x[i]) v = rng.normal(50.0, 10.0);
        y[i] = rng.uniform(0.0, kComponentMax[0]);
    }
    EstimatorTrainSpec spec;
    spec.epochs = 1;
    spec.exec = exec_of(st);
    for (auto _ : st) benchmark::DoNotOptimize(train_component_estimator(Component::Cognitive, x, y, spec).loss_curve);
    st.SetItemsProcessed(st.iterations() * static_cast<long>(x.size()));
}
BENCHMARK(BM_EstimatorEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Batch(benchmark::State& st) {
    ScenarioConfig cfg;
    cfg.script = {Block{LoadLabel::OL, 120}, Block{LoadLabel::UL, 120}};
    const auto dir = std::filesystem::temp_directory_path() / "matb_bench_batch";
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
    for (auto _ : st)
        benchmark::DoNotOptimize(run_batch(cfg, Models{}, {AdaptationMode::None}, seeds, dir, exec_of(st)));
    std::filesystem::remove_all(dir);
}
BENCHMARK(BM_Batch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TrialTicks(benchmark::State& st) {
    ScenarioConfig cfg;
    cfg.script = {Block{LoadLabel::OL, 450}};
    for (auto _ : st) benchmark::DoNotOptimize(run_trial(cfg, Models{}, TrialOptions{}).log.events.size());
    st.SetItemsProcessed(st.iterations() * 450 * cfg.ticks_per_second());
}
BENCHMARK(BM_TrialTicks)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
