// Microbenchmarks for the hot path: spline solve, grid mapping, bilinear
// sampling, single-warp rectification, and the full five-iteration loop.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>

#include "esir/fitline.hpp"
#include "esir/fitter.hpp"
#include "esir/geometry.hpp"
#include "esir/image.hpp"
#include "esir/rectifier.hpp"
#include "esir/sampler.hpp"
#include "esir/synth.hpp"
#include "esir/tps.hpp"

namespace {

using namespace esir;

ControlPoints jittered_targets(int segment_count, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    ControlPoints cp = base_points(segment_count);
    for (Vec2& p : cp.points) {
        p.x += u(eng);
        p.y += u(eng);
    }
    return cp;
}

const SynthCase& severe_case() {
    static const SynthCase c = gen_case(424242, Difficulty::severe);
    return c;
}

void bm_tps_solve(benchmark::State& state) {
    ControlPoints base = base_points(20);
    ControlPoints targets = jittered_targets(20, 1);
    for (auto _ : state) {
        TpsSolver solver(base, 0.0);
        benchmark::DoNotOptimize(solver.solve(targets));
    }
}
BENCHMARK(bm_tps_solve);

void bm_tps_solve_reused_factorization(benchmark::State& state) {
    TpsSolver solver(base_points(20), 0.0);
    ControlPoints targets = jittered_targets(20, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solver.solve(targets));
    }
}
BENCHMARK(bm_tps_solve_reused_factorization);

void bm_cardinal_weight_table(benchmark::State& state) {
    TpsSolver solver(base_points(20), 0.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solver.cardinal_weight_table(100, 32));
    }
}
BENCHMARK(bm_cardinal_weight_table);

void bm_map_grid(benchmark::State& state) {
    TpsCoeffs coeffs = solve(base_points(20), jittered_targets(20, 3));
    for (auto _ : state) {
        benchmark::DoNotOptimize(map_grid(coeffs, 100, 32));
    }
}
BENCHMARK(bm_map_grid);

void bm_sample(benchmark::State& state) {
    const SynthCase& c = severe_case();
    TpsCoeffs coeffs = solve(base_points(20), jittered_targets(20, 4));
    Grid grid = map_grid(coeffs, 100, 32);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample(c.distorted, grid, 0.0));
    }
}
BENCHMARK(bm_sample);

void bm_sample_with_jacobian(benchmark::State& state) {
    const SynthCase& c = severe_case();
    TpsCoeffs coeffs = solve(base_points(20), jittered_targets(20, 5));
    Grid grid = map_grid(coeffs, 100, 32);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_with_jacobian(c.distorted, grid, 0.0));
    }
}
BENCHMARK(bm_sample_with_jacobian);

void bm_rectify_once(benchmark::State& state) {
    const SynthCase& c = severe_case();
    RectifyConfig config;
    config.segment_count = c.true_params.segment_count();
    ParamState truth = init_state(config.segment_count);
    truth.delta = c.true_control_offsets;
    for (auto _ : state) {
        benchmark::DoNotOptimize(rectify_once(c.distorted, truth, config));
    }
}
BENCHMARK(bm_rectify_once);

void bm_pipeline_five_iterations(benchmark::State& state) {
    const SynthCase& c = severe_case();
    RectifyConfig config;
    config.segment_count = c.true_params.segment_count();
    config.iterations = 5;
    for (auto _ : state) {
        OracleProvider provider(c.true_control_offsets, 5);
        benchmark::DoNotOptimize(rectify_iterative(c.distorted, provider, config));
    }
}
BENCHMARK(bm_pipeline_five_iterations);

void bm_grad_loss_analytic(benchmark::State& state) {
    const SynthCase& c = severe_case();
    RectifyConfig config;
    config.segment_count = c.true_params.segment_count();
    ParamState mid = init_state(config.segment_count);
    for (std::size_t j = 0; j < mid.delta.size(); ++j)
        mid.delta[j] = c.true_control_offsets[j] * 0.5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(grad_loss(c.distorted, mid, c.template_image, config));
    }
}
BENCHMARK(bm_grad_loss_analytic);

}  // namespace

BENCHMARK_MAIN();
