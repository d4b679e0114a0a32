#include <benchmark/benchmark.h>

#include "lexirobust/envs.hpp"
#include "lexirobust/lrpg.hpp"
#include "lexirobust/random_instances.hpp"
#include "lexirobust/robust_sets.hpp"

using namespace lexirobust;

static void BM_PolicyEvaluate(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Domdp mdp = random_domdp(n, 4, 0.95, rng);
    const Policy pi = random_policy(n, 4, rng);
    for (auto _ : state) benchmark::DoNotOptimize(policy_evaluate(mdp, pi));
}
BENCHMARK(BM_PolicyEvaluate)->Arg(6)->Arg(37)->Arg(200);

static void BM_RobustnessRegret(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const Domdp mdp = random_domdp(n, 4, 0.95, rng);
    const Policy pi = random_policy(n, 4, rng);
    const NoiseKernel T = random_kernel(n, KernelFamily::dense, rng);
    for (auto _ : state) benchmark::DoNotOptimize(robustness_regret(mdp, pi, T));
}
BENCHMARK(BM_RobustnessRegret)->Arg(6)->Arg(37)->Arg(200);

static void BM_ClassifyPolicy(benchmark::State& state) {
    Rng rng(3);
    const Domdp mdp = random_domdp(6, 4, 0.9, rng);
    const NoiseKernel T = random_kernel(6, KernelFamily::block, rng);
    const Policy pi = random_policy(6, 4, rng);
    for (auto _ : state) benchmark::DoNotOptimize(classify_policy(mdp, pi, T));
}
BENCHMARK(BM_ClassifyPolicy);

static void BM_InclusionChain(benchmark::State& state) {
    Rng rng(4);
    const Domdp mdp = random_domdp(6, 4, 0.9, rng);
    const NoiseKernel T = random_kernel(6, KernelFamily::dense, rng);
    InclusionOptions options;
    options.samples_per_stratum = 50;
    for (auto _ : state) benchmark::DoNotOptimize(verify_inclusion_chain(mdp, T, 7, options));
}
BENCHMARK(BM_InclusionChain)->Unit(benchmark::kMillisecond);

static void BM_GridKernel(benchmark::State& state) {
    const Environment env = make_environment("lava_gap");
    const KernelSpec spec{KernelKind::gaussian, 0.5, 2.0, {}, {}};
    for (auto _ : state) benchmark::DoNotOptimize(make_kernel(spec, env.mdp.n_states(), &env.geometry));
}
BENCHMARK(BM_GridKernel);

static void BM_TrainLavaGap(benchmark::State& state) {
    const Environment env = make_environment("lava_gap");
    TrainConfig config;
    config.secondary = state.range(0) == 0 ? SecondaryObjective::none : SecondaryObjective::kt;
    config.steps = 20'000;
    config.checkpoint_every = 20'000;
    for (auto _ : state) benchmark::DoNotOptimize(lrpg_train(env, config));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * config.steps));
}
BENCHMARK(BM_TrainLavaGap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
