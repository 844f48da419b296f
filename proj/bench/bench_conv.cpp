// Serial reference against the OpenMP engines on characterization-grid shapes.
// Args: Q, feature map size, channels (L = K).

#include "hconv/direct.hpp"
#include "hconv/fft.hpp"
#include "hconv/reference.hpp"
#include "hconv/weights.hpp"
#include "hconv/winograd.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace hconv;

struct Problem {
    ConvShape shape;
    Tensor x;
    WeightTensor w;
};

Problem make_problem(const benchmark::State& state) {
    const auto q = static_cast<std::size_t>(state.range(0));
    const auto fm = static_cast<std::size_t>(state.range(1));
    const auto ch = static_cast<std::size_t>(state.range(2));
    const ConvShape s{ch, ch, fm, q, 1, (q - 1) / 2};
    Uniform u(42);
    std::vector<double> wv(s.kernel_shape().size());
    for (auto& v : wv) v = u.next(-1.0, 1.0);
    return {s, random_input(s.input_shape(), 7), WeightTensor::from_values(s.kernel_shape(), std::move(wv))};
}

void set_counters(benchmark::State& state, const ConvShape& s) {
    const double macs = static_cast<double>(s.out_channels * s.in_channels * s.kernel_size * s.kernel_size *
                                            s.output_size() * s.output_size());
    state.counters["direct_MACs/s"] =
        benchmark::Counter(macs, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_Reference(benchmark::State& state) {
    const auto p = make_problem(state);
    for (auto _ : state) benchmark::DoNotOptimize(reference::conv_direct(p.x, p.w, p.shape));
    set_counters(state, p.shape);
}

void BM_Direct(benchmark::State& state) {
    const auto p = make_problem(state);
    for (auto _ : state) benchmark::DoNotOptimize(direct_conv(p.x, p.w, p.shape));
    set_counters(state, p.shape);
}

void BM_Winograd2(benchmark::State& state) {
    const auto p = make_problem(state);
    const WinogradKernel k(cached_plan(2, static_cast<int>(p.shape.kernel_size)), p.w);
    for (auto _ : state) benchmark::DoNotOptimize(winograd_conv(p.x, k, p.shape));
    set_counters(state, p.shape);
}

void BM_Winograd4(benchmark::State& state) {
    const auto p = make_problem(state);
    const WinogradKernel k(cached_plan(4, 3), p.w);
    for (auto _ : state) benchmark::DoNotOptimize(winograd_conv(p.x, k, p.shape));
    set_counters(state, p.shape);
}

void BM_Fft(benchmark::State& state) {
    const auto p = make_problem(state);
    const FftKernel k(p.w, pad_size(p.shape.input_size, p.shape.kernel_size));
    for (auto _ : state) benchmark::DoNotOptimize(fft_conv(p.x, k, p.shape));
    set_counters(state, p.shape);
}

void grid(benchmark::internal::Benchmark* b, std::vector<int64_t> kernels) {
    for (int64_t q : kernels)
        for (int64_t fm : {6, 12, 24})
            for (int64_t ch : {16, 64}) b->Args({q, fm, ch});
    b->ArgNames({"Q", "fm", "ch"})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_Reference)->Apply([](auto* b) { grid(b, {3, 5, 7}); });
BENCHMARK(BM_Direct)->Apply([](auto* b) { grid(b, {3, 5, 7}); });
BENCHMARK(BM_Winograd2)->Apply([](auto* b) { grid(b, {3, 5, 7}); });
BENCHMARK(BM_Winograd4)->Apply([](auto* b) { grid(b, {3}); });
BENCHMARK(BM_Fft)->Apply([](auto* b) { grid(b, {3, 5, 7}); });

BENCHMARK_MAIN();
