#include "koopa/adaptation.hpp"
#include "koopa/linalg.hpp"
#include "koopa/model.hpp"
#include "koopa/rng.hpp"
#include "koopa/spectral.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace koopa;

Matrix gaussian(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.data()) {
        v = rng.normal();
    }
    return m;
}

// One adaptation step per iteration on a D-dimensional embedding stream.
void adapt_steps(benchmark::State& state, AdaptAlgorithm algorithm) {
    const auto d = static_cast<std::size_t>(state.range(0));
    Rng rng(7);
    const Matrix init = gaussian(rng, d, d / 2 + 2);
    const Matrix stream = gaussian(rng, d, 256);
    AdaptState st = AdaptState::start(init, algorithm);
    std::size_t i = 0;
    for (auto _ : state) {
        if (i == stream.cols()) {
            state.PauseTiming();
            st = AdaptState::start(init, algorithm);
            i = 0;
            state.ResumeTiming();
        }
        st.observe(stream.col(i++));
        benchmark::DoNotOptimize(st.k_var().data().data());
    }
}

void BM_AdaptFast(benchmark::State& state) {
    adapt_steps(state, AdaptAlgorithm::fast);
}
BENCHMARK(BM_AdaptFast)->RangeMultiplier(2)->Range(16, 128);

void BM_AdaptNaive(benchmark::State& state) {
    adapt_steps(state, AdaptAlgorithm::naive);
}
BENCHMARK(BM_AdaptNaive)->RangeMultiplier(2)->Range(16, 64);

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Matrix a = gaussian(rng, n, n);
    const Matrix b = gaussian(rng, n, n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(matmul(a, b).data().data());
    }
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128);

void BM_Pinv(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const Matrix a = gaussian(rng, n, n / 2 + 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(pinv(a).data().data());
    }
}
BENCHMARK(BM_Pinv)->RangeMultiplier(2)->Range(16, 128);

void BM_Rfft(benchmark::State& state) {
    const auto t = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    const Matrix x = gaussian(rng, t, 1);
    const Vector signal = x.col(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(spectral::rfft(signal).data());
    }
}
BENCHMARK(BM_Rfft)->Arg(96)->Arg(192)->Arg(336)->Arg(720);

void BM_KoopaForward(benchmark::State& state) {
    ModelConfig cfg;
    cfg.lookback = 96;
    cfg.horizon = 48;
    cfg.variates = static_cast<std::size_t>(state.range(0));
    spectral::SpectrumMask mask;
    mask.window_length = cfg.lookback;
    mask.kept = {0, 1, 2, 4, 8};
    mask.alpha = 0.1;
    const KoopaModel model = KoopaModel::create(cfg, mask);
    Rng rng(4);
    const Matrix x = gaussian(rng, cfg.lookback, cfg.variates);
    for (auto _ : state) {
        benchmark::DoNotOptimize(koopa_forward(model, x).prediction.data().data());
    }
}
BENCHMARK(BM_KoopaForward)->Arg(1)->Arg(7);

} // namespace

BENCHMARK_MAIN();
