#include "hconv/tensor.hpp"

#include "hconv/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hconv {

namespace {

constexpr int kMaxFracBits = 62;

void check_size(std::size_t got, std::size_t expected) {
    if (got != expected) {
        throw ValidationError("payload holds " + std::to_string(got) + " values, shape needs " +
                              std::to_string(expected));
    }
}

std::int32_t saturate(double v, DType t) {
    v = std::round(v);  // half away from zero
    if (v > raw_max(t)) return raw_max(t);
    if (v < raw_min(t)) return raw_min(t);
    return static_cast<std::int32_t>(v);
}

}  // namespace

std::string_view to_string(DType t) noexcept {
    switch (t) {
    case DType::float64: return "float64";
    case DType::fix16: return "fix16";
    case DType::fix8: return "fix8";
    }
    return "?";
}

DType fixed_dtype(int width) {
    if (width == 16) return DType::fix16;
    if (width == 8) return DType::fix8;
    throw ValidationError("fixed-point width must be 8 or 16, got " + std::to_string(width));
}

namespace detail {

Payload Payload::make_float(std::vector<double> v, std::size_t expected) {
    check_size(v.size(), expected);
    Payload p;
    p.values = std::move(v);
    return p;
}

Payload Payload::make_fixed(DType t, int frac_bits, std::vector<std::int32_t> r, std::size_t expected) {
    if (!is_fixed(t)) throw ValidationError("raw payload requires a fixed-point dtype");
    if (frac_bits < 0 || frac_bits > 255) throw ValidationError("frac_bits out of range");
    check_size(r.size(), expected);
    for (auto x : r) {
        if (x < raw_min(t) || x > raw_max(t)) {
            throw ValidationError("raw value " + std::to_string(x) + " outside " + std::string(to_string(t)));
        }
    }
    Payload p;
    p.dtype = t;
    p.frac_bits = frac_bits;
    p.raw = std::move(r);
    return p;
}

double Payload::value(std::size_t i) const noexcept {
    if (dtype == DType::float64) return values[i];
    return std::ldexp(static_cast<double>(raw[i]), -frac_bits);
}

std::vector<double> Payload::to_doubles() const {
    if (dtype == DType::float64) return values;
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::ldexp(static_cast<double>(raw[i]), -frac_bits);
    return out;
}

}  // namespace detail

Tensor Tensor::from_values(Shape3 shape, std::vector<double> values) {
    Tensor t;
    t.data_ = detail::Payload::make_float(std::move(values), shape.size());
    t.shape_ = shape;
    return t;
}

Tensor Tensor::from_raw(Shape3 shape, DType dtype, int frac_bits, std::vector<std::int32_t> raw) {
    Tensor t;
    t.data_ = detail::Payload::make_fixed(dtype, frac_bits, std::move(raw), shape.size());
    t.shape_ = shape;
    return t;
}

std::span<const double> Tensor::values() const {
    if (is_fixed()) throw ValidationError("values() on a fixed-point tensor");
    return data_.values;
}

std::span<const std::int32_t> Tensor::raw() const {
    if (!is_fixed()) throw ValidationError("raw() on a float64 tensor");
    return data_.raw;
}

WeightTensor WeightTensor::from_values(KernelShape shape, std::vector<double> values) {
    WeightTensor t;
    t.data_ = detail::Payload::make_float(std::move(values), shape.size());
    t.shape_ = shape;
    return t;
}

WeightTensor WeightTensor::from_raw(KernelShape shape, DType dtype, int frac_bits, std::vector<std::int32_t> raw) {
    WeightTensor t;
    t.data_ = detail::Payload::make_fixed(dtype, frac_bits, std::move(raw), shape.size());
    t.shape_ = shape;
    return t;
}

std::span<const double> WeightTensor::values() const {
    if (is_fixed()) throw ValidationError("values() on fixed-point weights");
    return data_.values;
}

std::span<const std::int32_t> WeightTensor::raw() const {
    if (!is_fixed()) throw ValidationError("raw() on float64 weights");
    return data_.raw;
}

int choose_frac_bits(std::span<const double> values, int width) {
    const DType t = fixed_dtype(width);
    double peak = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw ValidationError("cannot quantize a non-finite value");
        peak = std::max(peak, std::abs(v));
    }
    if (peak == 0.0) return width - 1;

    const double limit = raw_max(t);
    int f = static_cast<int>(std::floor(std::log2(limit / peak)));
    f = std::clamp(f, 0, kMaxFracBits);
    // log2 may be off by one ulp near powers of two
    while (f > 0 && std::ldexp(peak, f) > limit) --f;
    while (f < kMaxFracBits && std::ldexp(peak, f + 1) <= limit) ++f;
    return f;
}

std::vector<std::int32_t> quantize_values(std::span<const double> values, DType dtype, int frac_bits) {
    std::vector<std::int32_t> raw(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) raw[i] = saturate(std::ldexp(values[i], frac_bits), dtype);
    return raw;
}

std::vector<std::int32_t> rescale_raw(std::span<const std::int32_t> raw, DType dtype, int from_bits, int to_bits) {
    std::vector<std::int32_t> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = saturate(std::ldexp(static_cast<double>(raw[i]), to_bits - from_bits), dtype);
    }
    return out;
}

Tensor quantize(const Tensor& t, int width) {
    const DType dtype = fixed_dtype(width);
    const auto values = t.to_doubles();
    const int f = choose_frac_bits(values, width);
    return Tensor::from_raw(t.shape(), dtype, f, quantize_values(values, dtype, f));
}

WeightTensor quantize(const WeightTensor& t, int width) {
    const DType dtype = fixed_dtype(width);
    const auto values = t.to_doubles();
    const int f = choose_frac_bits(values, width);
    return WeightTensor::from_raw(t.shape(), dtype, f, quantize_values(values, dtype, f));
}

Tensor dequantize(const Tensor& t) {
    if (!t.is_fixed()) throw ValidationError("dequantize expects a fixed-point tensor");
    return Tensor::from_values(t.shape(), t.to_doubles());
}

WeightTensor dequantize(const WeightTensor& t) {
    if (!t.is_fixed()) throw ValidationError("dequantize expects fixed-point weights");
    return WeightTensor::from_values(t.shape(), t.to_doubles());
}

Tensor requantize(const Tensor& t, DType dtype) {
    if (dtype == DType::float64) return t.is_fixed() ? dequantize(t) : t;
    return quantize(t, bit_width(dtype));
}

Tensor make_output(Shape3 shape, std::vector<double> values, DType dtype) {
    auto t = Tensor::from_values(shape, std::move(values));
    if (dtype == DType::float64) return t;
    return quantize(t, bit_width(dtype));
}

}  // namespace hconv
