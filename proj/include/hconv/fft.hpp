#pragma once

#include "hconv/conv_shape.hpp"
#include "hconv/tensor.hpp"

#include <complex>
#include <span>
#include <vector>

namespace hconv {

using Complex = std::complex<double>;

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

/// Smallest power of two >= input_size + kernel_size - 1, the size at which the linear
/// convolution of the two never wraps around.
std::size_t pad_size(std::size_t input_size, std::size_t kernel_size);

/// In-place iterative radix-2 transform. Inverse is unnormalized.
void fft1d(std::span<Complex> data, bool inverse = false);

/// In-place row-column 2D transform of an n x n row-major grid. ifft2d divides by n^2.
void fft2d(std::span<Complex> grid, std::size_t n);
void ifft2d(std::span<Complex> grid, std::size_t n);

struct FftPlan {
    std::size_t transform_size = 0;  // N
    std::size_t input_size = 0;      // unpadded feature map M
    std::size_t kernel_size = 0;     // Q
};

/// Requires stride 1. The convolution's zero padding is absorbed by the linear (non-wrapping)
/// product, so N depends only on M and Q.
FftPlan make_fft_plan(const ConvShape& shape);

/// Spectra of the index-reversed kernels, one N x N grid per (output, input) channel pair.
/// Computed once per layer; read-only afterwards.
class FftKernel {
public:
    FftKernel(const WeightTensor& w, std::size_t transform_size);

    std::size_t transform_size() const noexcept { return n_; }
    const KernelShape& shape() const noexcept { return shape_; }
    const Complex* spectrum(std::size_t k, std::size_t l) const noexcept {
        return spectra_.data() + (k * shape_.in_channels + l) * n_ * n_;
    }

private:
    std::size_t n_;
    KernelShape shape_;
    std::vector<Complex> spectra_;
};

/// Frequency-domain cross-correlation. Products are accumulated over input channels in the
/// frequency domain, so exactly one inverse transform runs per output channel.
Tensor fft_conv(const Tensor& x, const FftKernel& kernel, const ConvShape& shape, std::span<const double> bias = {},
                ExecStats* stats = nullptr);
Tensor fft_conv(const Tensor& x, const WeightTensor& w, const ConvShape& shape, std::span<const double> bias = {},
                ExecStats* stats = nullptr);

}  // namespace hconv
