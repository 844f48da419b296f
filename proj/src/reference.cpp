#include "hconv/reference.hpp"

#include "hconv/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace hconv {

void ConvShape::validate() const {
    if (in_channels == 0 || out_channels == 0 || input_size == 0 || kernel_size == 0 || stride == 0) {
        throw ValidationError("convolution counts must be positive");
    }
    if (kernel_size > padded_size()) {
        throw ValidationError("kernel " + std::to_string(kernel_size) + " larger than padded input " +
                              std::to_string(padded_size()));
    }
}

void check_operands(const Tensor& x, const WeightTensor& w, const ConvShape& shape) {
    shape.validate();
    if (x.shape() != shape.input_shape()) throw ValidationError("input tensor does not match convolution shape");
    if (w.shape() != shape.kernel_shape()) throw ValidationError("weights do not match convolution shape");
}

}  // namespace hconv

namespace hconv::reference {

namespace {

template <class Acc>
std::vector<double> conv_fixed(const Tensor& x, const WeightTensor& w, const ConvShape& s,
                               std::span<const double> bias) {
    const auto xr = x.raw();
    const auto wr = w.raw();
    const int scale_bits = x.frac_bits() + w.frac_bits();
    const std::size_t M = s.input_size, Q = s.kernel_size, O = s.output_size();
    const auto pad = static_cast<std::ptrdiff_t>(s.pad);

    std::vector<double> out(s.out_channels * O * O);
    for (std::size_t k = 0; k < s.out_channels; ++k) {
        Acc bias_acc = 0;
        if (!bias.empty()) {
            const double b = std::round(std::ldexp(bias[k], scale_bits));
            const double lim = static_cast<double>(std::numeric_limits<Acc>::max());
            bias_acc = static_cast<Acc>(std::clamp(b, -lim, lim));
        }
        for (std::size_t oy = 0; oy < O; ++oy) {
            for (std::size_t ox = 0; ox < O; ++ox) {
                Acc acc = bias_acc;
                for (std::size_t l = 0; l < s.in_channels; ++l) {
                    for (std::size_t i = 0; i < Q; ++i) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + i) - pad;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(M)) continue;
                        for (std::size_t j = 0; j < Q; ++j) {
                            const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + j) - pad;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(M)) continue;
                            acc += static_cast<Acc>(xr[(l * M + iy) * M + ix]) *
                                   static_cast<Acc>(wr[((k * s.in_channels + l) * Q + i) * Q + j]);
                        }
                    }
                }
                out[(k * O + oy) * O + ox] = std::ldexp(static_cast<double>(acc), -scale_bits);
            }
        }
    }
    return out;
}

std::vector<double> conv_float(const Tensor& x, const WeightTensor& w, const ConvShape& s,
                               std::span<const double> bias) {
    const auto xv = x.values();
    const auto wv = w.values();
    const std::size_t M = s.input_size, Q = s.kernel_size, O = s.output_size();
    const auto pad = static_cast<std::ptrdiff_t>(s.pad);

    std::vector<double> out(s.out_channels * O * O);
    for (std::size_t k = 0; k < s.out_channels; ++k) {
        for (std::size_t oy = 0; oy < O; ++oy) {
            for (std::size_t ox = 0; ox < O; ++ox) {
                double acc = 0.0;
                for (std::size_t l = 0; l < s.in_channels; ++l) {
                    for (std::size_t i = 0; i < Q; ++i) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + i) - pad;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(M)) continue;
                        for (std::size_t j = 0; j < Q; ++j) {
                            const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + j) - pad;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(M)) continue;
                            acc += xv[(l * M + iy) * M + ix] * wv[((k * s.in_channels + l) * Q + i) * Q + j];
                        }
                    }
                }
                out[(k * O + oy) * O + ox] = acc + (bias.empty() ? 0.0 : bias[k]);
            }
        }
    }
    return out;
}

void check_bias(std::span<const double> bias, std::size_t k) {
    if (!bias.empty() && bias.size() != k) throw ValidationError("bias length does not match output channels");
}

Tensor pool_impl(const Tensor& x, std::size_t window, std::size_t stride, std::size_t pad, bool is_max) {
    if (window == 0 || stride == 0) throw ValidationError("pool window and stride must be positive");
    if (window > x.height() + 2 * pad || window > x.width() + 2 * pad) {
        throw ValidationError("pool window larger than padded input");
    }
    const std::size_t oh = window_output(x.height(), window, stride, pad);
    const std::size_t ow = window_output(x.width(), window, stride, pad);
    const Shape3 out_shape{x.channels(), oh, ow};
    const auto H = static_cast<std::ptrdiff_t>(x.height());
    const auto W = static_cast<std::ptrdiff_t>(x.width());
    const auto p = static_cast<std::ptrdiff_t>(pad);
    const auto area = static_cast<double>(window * window);

    // One pass over either payload; fixed results stay on the input's scale.
    auto run = [&](auto&& get, auto&& emit) {
        for (std::size_t c = 0; c < x.channels(); ++c) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    double sum = 0.0;
                    bool any = false;
                    for (std::size_t i = 0; i < window; ++i) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * stride + i) - p;
                        if (iy < 0 || iy >= H) continue;
                        for (std::size_t j = 0; j < window; ++j) {
                            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + j) - p;
                            if (ix < 0 || ix >= W) continue;
                            const double v = get((c * x.height() + iy) * x.width() + ix);
                            best = std::max(best, v);
                            sum += v;
                            any = true;
                        }
                    }
                    // a window lying wholly in padding sees only zeros
                    emit(is_max ? (any ? best : 0.0) : sum / area);
                }
            }
        }
    };

    if (!x.is_fixed()) {
        const auto xv = x.values();
        std::vector<double> out;
        out.reserve(out_shape.size());
        run([&](std::size_t i) { return xv[i]; }, [&](double v) { out.push_back(v); });
        return Tensor::from_values(out_shape, std::move(out));
    }
    const auto xr = x.raw();
    std::vector<std::int32_t> out;
    out.reserve(out_shape.size());
    run([&](std::size_t i) { return static_cast<double>(xr[i]); },
        [&](double v) { out.push_back(static_cast<std::int32_t>(std::round(v))); });
    return Tensor::from_raw(out_shape, x.dtype(), x.frac_bits(), std::move(out));
}

}  // namespace

Tensor conv_direct(const Tensor& x, const WeightTensor& w, const ConvShape& shape, std::span<const double> bias,
                   ExecStats* stats) {
    check_operands(x, w, shape);
    check_bias(bias, shape.out_channels);
    if (x.dtype() != w.dtype()) throw ValidationError("input and weights must share a dtype");

    const std::size_t O = shape.output_size();
    std::vector<double> out;
    switch (x.dtype()) {
    case DType::float64: out = conv_float(x, w, shape, bias); break;
    case DType::fix16: out = conv_fixed<std::int64_t>(x, w, shape, bias); break;
    case DType::fix8: out = conv_fixed<std::int32_t>(x, w, shape, bias); break;
    }
    if (stats) {
        stats->multiplications += static_cast<std::uint64_t>(shape.out_channels) * shape.in_channels *
                                  shape.kernel_size * shape.kernel_size * O * O;
    }
    return make_output(shape.output_shape(), std::move(out), x.dtype());
}

std::size_t window_output(std::size_t input, std::size_t window, std::size_t stride, std::size_t pad) {
    return (input + 2 * pad - window) / stride + 1;
}

Tensor pool_max(const Tensor& x, std::size_t window, std::size_t stride, std::size_t pad) {
    return pool_impl(x, window, stride, pad, true);
}

Tensor pool_avg(const Tensor& x, std::size_t window, std::size_t stride, std::size_t pad) {
    return pool_impl(x, window, stride, pad, false);
}

Tensor affine_bn(const Tensor& x, std::span<const double> scale, std::span<const double> shift) {
    if (scale.size() != x.channels() || shift.size() != x.channels()) {
        throw ValidationError("batch-norm scale/shift length does not match channels");
    }
    auto v = x.to_doubles();
    const std::size_t plane = x.shape().plane();
    for (std::size_t c = 0; c < x.channels(); ++c) {
        for (std::size_t i = 0; i < plane; ++i) v[c * plane + i] = scale[c] * v[c * plane + i] + shift[c];
    }
    return make_output(x.shape(), std::move(v), x.dtype());
}

Tensor relu(const Tensor& x) {
    if (x.is_fixed()) {
        std::vector<std::int32_t> r(x.raw().begin(), x.raw().end());
        for (auto& v : r) v = std::max(v, 0);
        return Tensor::from_raw(x.shape(), x.dtype(), x.frac_bits(), std::move(r));
    }
    std::vector<double> v(x.values().begin(), x.values().end());
    for (auto& e : v) e = std::max(e, 0.0);
    return Tensor::from_values(x.shape(), std::move(v));
}

std::vector<double> fc(const Tensor& x, const WeightTensor& w, std::span<const double> bias) {
    const std::size_t n = x.size();
    if (w.in_channels() != n || w.kernel() != 1) {
        throw ValidationError("fc weights must be (outputs, " + std::to_string(n) + ", 1, 1)");
    }
    check_bias(bias, w.out_channels());
    if (x.dtype() != w.dtype()) throw ValidationError("fc input and weights must share a dtype");

    std::vector<double> out(w.out_channels());
    if (!x.is_fixed()) {
        const auto xv = x.values();
        const auto wv = w.values();
        for (std::size_t o = 0; o < out.size(); ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += wv[o * n + i] * xv[i];
            out[o] = acc + (bias.empty() ? 0.0 : bias[o]);
        }
        return out;
    }
    const auto xr = x.raw();
    const auto wr = w.raw();
    const int scale_bits = x.frac_bits() + w.frac_bits();
    for (std::size_t o = 0; o < out.size(); ++o) {
        std::int64_t acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += std::int64_t{wr[o * n + i]} * xr[i];
        out[o] = std::ldexp(static_cast<double>(acc), -scale_bits) + (bias.empty() ? 0.0 : bias[o]);
    }
    return out;
}

std::vector<double> l2_normalize(std::span<const double> v) {
    double sq = 0.0;
    for (double e : v) sq += e * e;
    if (!(sq > 0.0)) throw ValidationError("cannot l2-normalize a zero vector");
    const double norm = std::sqrt(sq);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
    return out;
}

Tensor concat(std::span<const Tensor> parts) {
    if (parts.empty()) throw ValidationError("concat of zero tensors");
    const auto& first = parts.front();
    std::size_t channels = 0;
    int frac = first.frac_bits();
    for (const auto& p : parts) {
        if (p.height() != first.height() || p.width() != first.width()) {
            throw ValidationError("concat inputs differ in spatial size");
        }
        if (p.dtype() != first.dtype()) throw ValidationError("concat inputs differ in dtype");
        channels += p.channels();
        frac = std::min(frac, p.frac_bits());
    }
    const Shape3 shape{channels, first.height(), first.width()};

    if (!first.is_fixed()) {
        std::vector<double> out;
        out.reserve(shape.size());
        for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
        return Tensor::from_values(shape, std::move(out));
    }
    std::vector<std::int32_t> out;
    out.reserve(shape.size());
    for (const auto& p : parts) {
        if (p.frac_bits() == frac) {
            out.insert(out.end(), p.raw().begin(), p.raw().end());
        } else {
            auto r = rescale_raw(p.raw(), p.dtype(), p.frac_bits(), frac);
            out.insert(out.end(), r.begin(), r.end());
        }
    }
    return Tensor::from_raw(shape, first.dtype(), frac, std::move(out));
}

}  // namespace hconv::reference
