#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace hconv {

enum class DType : std::uint8_t { float64 = 0, fix16 = 1, fix8 = 2 };

constexpr bool is_fixed(DType t) noexcept { return t != DType::float64; }

/// Total bit width of the raw integer (64 for float64).
constexpr int bit_width(DType t) noexcept {
    switch (t) {
    case DType::fix16: return 16;
    case DType::fix8: return 8;
    default: return 64;
    }
}

constexpr std::int32_t raw_max(DType t) noexcept { return t == DType::fix8 ? 127 : 32767; }
constexpr std::int32_t raw_min(DType t) noexcept { return t == DType::fix8 ? -128 : -32768; }

std::string_view to_string(DType t) noexcept;

/// Fixed-point dtype for a total width of 8 or 16 bits.
DType fixed_dtype(int width);

struct Shape3 {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const noexcept { return channels * height * width; }
    std::size_t plane() const noexcept { return height * width; }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// K output channels, L input channels, square Q x Q kernels.
struct KernelShape {
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::size_t kernel = 0;

    std::size_t size() const noexcept { return out_channels * in_channels * kernel * kernel; }
    friend bool operator==(const KernelShape&, const KernelShape&) = default;
};

namespace detail {

// Either float64 values or fixed-point raw integers; never both.
struct Payload {
    DType dtype = DType::float64;
    int frac_bits = 0;
    std::vector<double> values;
    std::vector<std::int32_t> raw;

    static Payload make_float(std::vector<double> v, std::size_t expected);
    static Payload make_fixed(DType t, int frac_bits, std::vector<std::int32_t> r, std::size_t expected);

    double value(std::size_t i) const noexcept;
    std::vector<double> to_doubles() const;
    friend bool operator==(const Payload&, const Payload&) = default;
};

}  // namespace detail

/// Dense C x H x W feature map, channel-major then row-major. Immutable once built.
class Tensor {
public:
    Tensor() = default;

    static Tensor from_values(Shape3 shape, std::vector<double> values);
    static Tensor from_raw(Shape3 shape, DType dtype, int frac_bits, std::vector<std::int32_t> raw);
    static Tensor zeros(Shape3 shape) { return from_values(shape, std::vector<double>(shape.size())); }

    const Shape3& shape() const noexcept { return shape_; }
    std::size_t channels() const noexcept { return shape_.channels; }
    std::size_t height() const noexcept { return shape_.height; }
    std::size_t width() const noexcept { return shape_.width; }
    std::size_t size() const noexcept { return shape_.size(); }

    DType dtype() const noexcept { return data_.dtype; }
    bool is_fixed() const noexcept { return hconv::is_fixed(data_.dtype); }
    int frac_bits() const noexcept { return data_.frac_bits; }

    /// float64 payload; throws for fixed tensors.
    std::span<const double> values() const;
    /// Fixed-point raw payload; throws for float64 tensors.
    std::span<const std::int32_t> raw() const;

    /// Dequantized element value regardless of dtype.
    double value(std::size_t i) const noexcept { return data_.value(i); }
    double at(std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return data_.value((c * shape_.height + h) * shape_.width + w);
    }
    std::vector<double> to_doubles() const { return data_.to_doubles(); }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape3 shape_;
    detail::Payload data_;
};

/// K x L x Q x Q convolution weights.
class WeightTensor {
public:
    WeightTensor() = default;

    static WeightTensor from_values(KernelShape shape, std::vector<double> values);
    static WeightTensor from_raw(KernelShape shape, DType dtype, int frac_bits, std::vector<std::int32_t> raw);

    const KernelShape& shape() const noexcept { return shape_; }
    std::size_t out_channels() const noexcept { return shape_.out_channels; }
    std::size_t in_channels() const noexcept { return shape_.in_channels; }
    std::size_t kernel() const noexcept { return shape_.kernel; }
    std::size_t size() const noexcept { return shape_.size(); }

    DType dtype() const noexcept { return data_.dtype; }
    bool is_fixed() const noexcept { return hconv::is_fixed(data_.dtype); }
    int frac_bits() const noexcept { return data_.frac_bits; }

    std::span<const double> values() const;
    std::span<const std::int32_t> raw() const;

    double value(std::size_t i) const noexcept { return data_.value(i); }
    double at(std::size_t k, std::size_t l, std::size_t i, std::size_t j) const noexcept {
        return data_.value(((k * shape_.in_channels + l) * shape_.kernel + i) * shape_.kernel + j);
    }
    std::vector<double> to_doubles() const { return data_.to_doubles(); }

    friend bool operator==(const WeightTensor&, const WeightTensor&) = default;

private:
    KernelShape shape_;
    detail::Payload data_;
};

// Quantization: per-tensor power-of-two scale, round half away from zero, saturating.

/// Largest f >= 0 with max|x| * 2^f <= 2^(width-1) - 1; width - 1 for an all-zero input.
int choose_frac_bits(std::span<const double> values, int width);

std::vector<std::int32_t> quantize_values(std::span<const double> values, DType dtype, int frac_bits);

/// Re-express raw values at a different frac_bits (rounding, saturating).
std::vector<std::int32_t> rescale_raw(std::span<const std::int32_t> raw, DType dtype, int from_bits, int to_bits);

Tensor quantize(const Tensor& t, int width);
WeightTensor quantize(const WeightTensor& t, int width);
Tensor dequantize(const Tensor& t);
WeightTensor dequantize(const WeightTensor& t);

/// Quantize to the given dtype (identity for float64 input when dtype is float64).
Tensor requantize(const Tensor& t, DType dtype);

/// Quantize float values of the given shape straight to dtype (no-op for float64).
Tensor make_output(Shape3 shape, std::vector<double> values, DType dtype);

}  // namespace hconv
