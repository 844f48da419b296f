#pragma once

// Seeded generators for the property tests. Everything derives from one mt19937_64 so a
// failing case can be replayed from its seed.

#include "hconv/conv_shape.hpp"
#include "hconv/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hconv::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double real(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[index(v.size())];
    }

    std::vector<double> reals(std::size_t n, double lo = -1.0, double hi = 1.0) {
        std::vector<double> v(n);
        for (auto& x : v) x = real(lo, hi);
        return v;
    }

    Tensor tensor(Shape3 s, double lo = -1.0, double hi = 1.0) { return Tensor::from_values(s, reals(s.size(), lo, hi)); }
    WeightTensor weights(KernelShape s, double lo = -1.0, double hi = 1.0) {
        return WeightTensor::from_values(s, reals(s.size(), lo, hi));
    }

private:
    std::mt19937_64 rng_;
};

/// max |a - b| / max(max |b|, tiny)
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return diff / std::max(scale, 1e-300);
}

/// Plain six-loop cross-correlation written independently of the library's reference.
inline std::vector<double> naive_conv(const Tensor& x, const WeightTensor& w, const ConvShape& s,
                                      const std::vector<double>& bias = {}) {
    const std::size_t O = s.output_size();
    std::vector<double> out(s.out_channels * O * O, 0.0);
    for (std::size_t k = 0; k < s.out_channels; ++k)
        for (std::size_t oy = 0; oy < O; ++oy)
            for (std::size_t ox = 0; ox < O; ++ox) {
                double acc = bias.empty() ? 0.0 : bias[k];
                for (std::size_t l = 0; l < s.in_channels; ++l)
                    for (std::size_t i = 0; i < s.kernel_size; ++i)
                        for (std::size_t j = 0; j < s.kernel_size; ++j) {
                            const auto y = static_cast<long>(oy * s.stride + i) - static_cast<long>(s.pad);
                            const auto xx = static_cast<long>(ox * s.stride + j) - static_cast<long>(s.pad);
                            if (y < 0 || xx < 0 || y >= static_cast<long>(s.input_size) ||
                                xx >= static_cast<long>(s.input_size)) {
                                continue;
                            }
                            acc += w.at(k, l, i, j) * x.at(l, static_cast<std::size_t>(y), static_cast<std::size_t>(xx));
                        }
                out[(k * O + oy) * O + ox] = acc;
            }
    return out;
}

}  // namespace hconv::testing
