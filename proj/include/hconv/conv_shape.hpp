#pragma once

#include "hconv/tensor.hpp"

#include <cstddef>
#include <cstdint>

namespace hconv {

/// Square convolution geometry: L input channels of M x M, K kernels of Q x Q.
struct ConvShape {
    std::size_t in_channels = 1;   // L
    std::size_t out_channels = 1;  // K
    std::size_t input_size = 1;    // M, unpadded
    std::size_t kernel_size = 1;   // Q
    std::size_t stride = 1;
    std::size_t pad = 0;

    std::size_t padded_size() const noexcept { return input_size + 2 * pad; }
    /// floor((M + 2 pad - Q) / stride) + 1; requires validate() to have passed.
    std::size_t output_size() const noexcept { return (padded_size() - kernel_size) / stride + 1; }

    Shape3 input_shape() const noexcept { return {in_channels, input_size, input_size}; }
    Shape3 output_shape() const noexcept { return {out_channels, output_size(), output_size()}; }
    KernelShape kernel_shape() const noexcept { return {out_channels, in_channels, kernel_size}; }

    /// Throws ValidationError unless all counts are positive and Q <= M + 2 pad.
    void validate() const;

    friend bool operator==(const ConvShape&, const ConvShape&) = default;
};

/// "Same" padding for odd kernels: (Q - 1) / 2.
constexpr std::size_t same_pad(std::size_t kernel) noexcept { return (kernel - 1) / 2; }

/// Checks x and w against the shape; throws ValidationError on mismatch.
void check_operands(const Tensor& x, const WeightTensor& w, const ConvShape& shape);

/// Operation counters filled in by the engines.
struct ExecStats {
    std::uint64_t multiplications = 0;  // data multiplications (transform-domain for fast engines)
    std::uint64_t tiles = 0;            // Winograd output tiles, per output channel summed
    std::uint64_t forward_ffts = 0;     // 2D forward transforms of feature maps
    std::uint64_t inverse_ffts = 0;     // 2D inverse transforms

    ExecStats& operator+=(const ExecStats& o) noexcept {
        multiplications += o.multiplications;
        tiles += o.tiles;
        forward_ffts += o.forward_ffts;
        inverse_ffts += o.inverse_ffts;
        return *this;
    }
};

}  // namespace hconv
