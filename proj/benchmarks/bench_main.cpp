#include <benchmark/benchmark.h>

#include "dpt/extended_propagator.hpp"
#include "dpt/weak_noise.hpp"

using namespace dpt;

static void BM_ReducedApply(benchmark::State& st) {
    ModelParams p;
    p.n_atoms = static_cast<int>(st.range(0));
    p.lambda = 1.2;
    p.include_dephasing = true;
    ReducedGenerator g(p);
    const CMatrix rho = dicke_state(p.n_atoms, p.n_atoms / 2);
    CMatrix out;
    for (auto _ : st) {
        g.apply(rho, out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_ReducedApply)->Arg(50)->Arg(100)->Arg(200);

static void BM_FullApply(benchmark::State& st) {
    ModelParams p;
    p.n_atoms = static_cast<int>(st.range(0));
    p.gamma = 1.0;
    p.g = 0.58925565098878963;
    p.delta0 = 0.1;
    FullGenerator g(p);
    const CMatrix rho = with_vacuum(dicke_state(p.n_atoms, p.n_atoms), g.cavity_dim());
    CMatrix out;
    for (auto _ : st) {
        g.apply(rho, out);
        benchmark::DoNotOptimize(out.data());
    }
    st.counters["dim"] = g.dim();
}
BENCHMARK(BM_FullApply)->Arg(4)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

static void BM_ExtendedPropagate(benchmark::State& st) {
    ModelParams p;
    p.n_atoms = static_cast<int>(st.range(0));
    p.lambda = 1.2;
    const RMatrix x0 = to_real_form(dicke_state(p.n_atoms, p.n_atoms));
    ExtendedOptions o;
    o.force_bits = static_cast<int>(st.range(1));
    for (auto _ : st) {
        const ExtendedRun r = propagate_reduced_extended(p, x0, {0.0, 1.0}, o);
        benchmark::DoNotOptimize(r.populations.data());
    }
}
BENCHMARK(BM_ExtendedPropagate)->Args({50, 53})->Args({50, 113})->Args({50, 192})->Unit(benchmark::kMillisecond);

static void BM_Characteristic(benchmark::State& st) {
    const WeakNoiseModel m{1.2, 1.0, true};
    for (auto _ : st) {
        const ShotEnd e = shoot_end(Vec3(0, 0, 1), Vec2(0.01, -0.005), 4.8, m);
        benchmark::DoNotOptimize(e.s);
    }
}
BENCHMARK(BM_Characteristic)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
