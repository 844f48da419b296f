#include "hconv/direct.hpp"

#include "hconv/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace hconv {

namespace {

// Output rows/cols [lo, hi) whose tap at kernel offset `tap` lands inside the input.
struct Range {
    std::size_t lo = 0, hi = 0;
};

Range valid_outputs(std::size_t tap, std::size_t pad, std::size_t stride, std::size_t input, std::size_t outputs) {
    // need 0 <= o * stride + tap - pad < input
    std::size_t lo = 0;
    if (tap < pad) lo = (pad - tap + stride - 1) / stride;
    std::size_t hi = 0;
    if (input + pad > tap) hi = std::min(outputs, (input + pad - tap - 1) / stride + 1);
    return {std::min(lo, hi), hi};
}

// Accumulates into `acc` (K planes of O x O), scatter form: one kernel tap at a time.
template <class In, class Acc>
void accumulate(std::span<const In> x, std::span<const In> w, const ConvShape& s, std::vector<Acc>& acc) {
    const std::size_t M = s.input_size, Q = s.kernel_size, O = s.output_size(), L = s.in_channels;

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ki = 0; ki < static_cast<std::ptrdiff_t>(s.out_channels); ++ki) {
        const auto k = static_cast<std::size_t>(ki);
        Acc* out = acc.data() + k * O * O;
        for (std::size_t l = 0; l < L; ++l) {
            const In* plane = x.data() + l * M * M;
            for (std::size_t i = 0; i < Q; ++i) {
                const Range rows = valid_outputs(i, s.pad, s.stride, M, O);
                for (std::size_t j = 0; j < Q; ++j) {
                    const Range cols = valid_outputs(j, s.pad, s.stride, M, O);
                    const Acc wv = static_cast<Acc>(w[((k * L + l) * Q + i) * Q + j]);
                    for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
                        const In* src = plane + (oy * s.stride + i - s.pad) * M;
                        Acc* dst = out + oy * O;
                        for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) {
                            dst[ox] += wv * static_cast<Acc>(src[ox * s.stride + j - s.pad]);
                        }
                    }
                }
            }
        }
    }
}

template <class Acc>
std::vector<double> run_fixed(const Tensor& x, const WeightTensor& w, const ConvShape& s, std::span<const double> bias) {
    const std::size_t O = s.output_size();
    const int scale_bits = x.frac_bits() + w.frac_bits();
    std::vector<Acc> acc(s.out_channels * O * O, 0);
    if (!bias.empty()) {
        const double lim = static_cast<double>(std::numeric_limits<Acc>::max());
        for (std::size_t k = 0; k < s.out_channels; ++k) {
            const auto b = static_cast<Acc>(std::clamp(std::round(std::ldexp(bias[k], scale_bits)), -lim, lim));
            std::fill_n(acc.begin() + static_cast<std::ptrdiff_t>(k * O * O), O * O, b);
        }
    }
    accumulate<std::int32_t, Acc>(x.raw(), w.raw(), s, acc);
    std::vector<double> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = std::ldexp(static_cast<double>(acc[i]), -scale_bits);
    return out;
}

}  // namespace

Tensor direct_conv(const Tensor& x, const WeightTensor& w, const ConvShape& shape, std::span<const double> bias,
                   ExecStats* stats) {
    check_operands(x, w, shape);
    if (!bias.empty() && bias.size() != shape.out_channels) throw ValidationError("bias length mismatch");
    if (x.dtype() != w.dtype()) throw ValidationError("input and weights must share a dtype");

    const std::size_t O = shape.output_size();
    std::vector<double> out;
    switch (x.dtype()) {
    case DType::float64: {
        out.assign(shape.out_channels * O * O, 0.0);
        accumulate<double, double>(x.values(), w.values(), shape, out);
        if (!bias.empty()) {
            for (std::size_t k = 0; k < shape.out_channels; ++k)
                for (std::size_t i = 0; i < O * O; ++i) out[k * O * O + i] += bias[k];
        }
        break;
    }
    case DType::fix16: out = run_fixed<std::int64_t>(x, w, shape, bias); break;
    case DType::fix8: out = run_fixed<std::int32_t>(x, w, shape, bias); break;
    }
    if (stats) {
        stats->multiplications += static_cast<std::uint64_t>(shape.out_channels) * shape.in_channels *
                                  shape.kernel_size * shape.kernel_size * O * O;
    }
    return make_output(shape.output_shape(), std::move(out), x.dtype());
}

}  // namespace hconv
