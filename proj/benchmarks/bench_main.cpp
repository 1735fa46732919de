#include "ropetrack/filter.hpp"
#include "ropetrack/parallel.hpp"
#include "ropetrack/pbd.hpp"
#include "ropetrack/splat.hpp"
#include "ropetrack/synth.hpp"

#include <benchmark/benchmark.h>

using namespace ropetrack;

namespace {

struct Fixture {
    synth::Scene scene = synth::preset_scene();
    splat::SplatSet splats;
    std::vector<Frame> observed;

    Fixture() {
        splats = splat::build_splats(scene.chain0, scene.splat);
        Positions shifted = scene.chain0.positions;
        for (auto& p : shifted) p.x() += 0.003;
        const auto moved = splat::reattach(splats, shifted);
        for (const auto& cam : scene.cameras) observed.push_back(splat::render(moved, cam));
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_Render(benchmark::State& state) {
    const auto& f = fixture();
    set_thread_count(static_cast<unsigned>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(splat::render(f.splats, f.scene.cameras[0]));
}
BENCHMARK(BM_Render)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_RenderOracle(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(splat::render_oracle(f.splats, f.scene.cameras[0]));
}
BENCHMARK(BM_RenderOracle)->Unit(benchmark::kMillisecond);

void BM_Gradient(benchmark::State& state) {
    const auto& f = fixture();
    set_thread_count(static_cast<unsigned>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(splat::loss_gradient_nodes(f.scene.chain0.positions, f.splats,
                                                            f.observed, f.scene.cameras));
}
BENCHMARK(BM_Gradient)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
    const auto& f = fixture();
    auto s = pbd::DynamicsState::at_rest(f.scene.chain0.positions);
    s.grasped_index = 29;
    const pbd::GripperInput g{f.scene.chain0.positions[29] + Vec3(0.01, 0, 0), Vec3(0.01, 0, 0)};
    for (auto _ : state)
        benchmark::DoNotOptimize(pbd::predict(s, g, f.scene.physics, f.scene.chain0.rope()));
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMicrosecond);

// One full filter step with a fixed 50-iteration budget.
void BM_FilterStep(benchmark::State& state) {
    const auto& f = fixture();
    filter::OptimizerConfig opt;
    opt.convergence_tol = 0.0;
    set_thread_count(static_cast<unsigned>(state.range(0)));
    for (auto _ : state) {
        state.PauseTiming();
        auto fs = filter::init(f.scene.chain0, f.observed, f.scene.cameras, f.scene.splat, {}, opt);
        fs.dynamics.grasped_index = 29;
        state.ResumeTiming();
        benchmark::DoNotOptimize(filter::step(fs, {f.scene.chain0.positions[29], Vec3::Zero()},
                                              f.observed, f.scene.cameras, f.scene.physics));
    }
}
BENCHMARK(BM_FilterStep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
