#include <benchmark/benchmark.h>

#include "memlab/memlab.hpp"

namespace {

memlab::DenseMatrix<double> random_matrix(std::uint64_t seed, std::size_t r, std::size_t c) {
    memlab::RngStream s = memlab::derive_stream(seed, 0);
    return memlab::sample_gaussian_matrix<double>(s, r, c);
}

void BM_MatmulBT(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto A = random_matrix(1, n, n);
    const auto B = random_matrix(2, n, n);
    for (auto _ : state) benchmark::DoNotOptimize(memlab::matmul_bt(A, B));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 2 * n * n * n);
}
BENCHMARK(BM_MatmulBT)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_GramAAT(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto A = random_matrix(3, n, 4 * n);
    for (auto _ : state) benchmark::DoNotOptimize(memlab::gram_aat(A));
}
BENCHMARK(BM_GramAAT)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_HaarRows(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto G = random_matrix(4, n, 4 * n);
    for (auto _ : state) benchmark::DoNotOptimize(memlab::orthonormal_rows(G));
}
BENCHMARK(BM_HaarRows)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_SpectralNorm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto A = random_matrix(5, n, 2 * n);
    for (auto _ : state) benchmark::DoNotOptimize(memlab::spectral_norm(A, 1e-6));
}
BENCHMARK(BM_SpectralNorm)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_FullGradient(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    const std::size_t q = d / 2, m = d / 2;
    memlab::RngStream stream = memlab::derive_stream(6, 0);
    memlab::RngStream ws = stream.substream(0);
    memlab::RngStream ss = stream.substream(1);
    memlab::RngStream ds = stream.substream(2);
    memlab::Network<double> net;
    net.q = q;
    net.d = d;
    net.W = memlab::orthonormal_rows(memlab::sample_gaussian_matrix<double>(ws, q, d));
    net.a = memlab::sample_signs<double>(ss, q, memlab::SignMode::balanced);
    net.activation = memlab::Activation::make_abs();
    const auto data = memlab::sample_dataset<double>(ds, m, d);
    for (auto _ : state)
        benchmark::DoNotOptimize(memlab::full_gradient(net, data, memlab::GradientMode::exact));
}
BENCHMARK(BM_FullGradient)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_NormalExpectation(benchmark::State& state) {
    const auto act = memlab::Activation::make_abs();
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            memlab::expected_sq_derivative(act, static_cast<std::size_t>(state.range(0))));
    }
}
BENCHMARK(BM_NormalExpectation)->Arg(64)->Arg(256);

void BM_OrliczEstimate(benchmark::State& state) {
    memlab::RngStream s = memlab::derive_stream(7, 0);
    std::vector<double> v(static_cast<std::size_t>(state.range(0)));
    for (auto& x : v) x = s.next_gauss();
    for (auto _ : state) benchmark::DoNotOptimize(memlab::orlicz_norm_estimate(v, 2));
}
BENCHMARK(BM_OrliczEstimate)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
