#include "hconv/fft.hpp"

#include "hconv/error.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace hconv {

std::size_t pad_size(std::size_t input_size, std::size_t kernel_size) {
    const std::size_t need = input_size + kernel_size - 1;
    std::size_t n = 1;
    while (n < need) n <<= 1;
    return n;
}

void fft1d(std::span<Complex> data, bool inverse) {
    const std::size_t n = data.size();
    if (!is_power_of_two(n)) throw ValidationError("FFT size " + std::to_string(n) + " is not a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }

    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        for (std::size_t j = 0; j < half; ++j) {
            const Complex w = std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(len));
            for (std::size_t start = 0; start < n; start += len) {
                const Complex u = data[start + j];
                const Complex v = data[start + j + half] * w;
                data[start + j] = u + v;
                data[start + j + half] = u - v;
            }
        }
    }
}

namespace {

void transform_2d(std::span<Complex> grid, std::size_t n, bool inverse) {
    if (!is_power_of_two(n)) throw ValidationError("FFT size " + std::to_string(n) + " is not a power of two");
    if (grid.size() != n * n) throw ValidationError("grid is not n x n");
    for (std::size_t row = 0; row < n; ++row) fft1d(grid.subspan(row * n, n), inverse);
    std::vector<Complex> column(n);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t row = 0; row < n; ++row) column[row] = grid[row * n + col];
        fft1d(column, inverse);
        for (std::size_t row = 0; row < n; ++row) grid[row * n + col] = column[row];
    }
}

}  // namespace

void fft2d(std::span<Complex> grid, std::size_t n) { transform_2d(grid, n, false); }

void ifft2d(std::span<Complex> grid, std::size_t n) {
    transform_2d(grid, n, true);
    const double scale = 1.0 / static_cast<double>(n * n);
    for (auto& c : grid) c *= scale;
}

FftPlan make_fft_plan(const ConvShape& shape) {
    shape.validate();
    if (shape.stride != 1) throw UnsupportedAlgorithm("FFT convolution requires stride 1");
    return {pad_size(shape.input_size, shape.kernel_size), shape.input_size, shape.kernel_size};
}

FftKernel::FftKernel(const WeightTensor& w, std::size_t transform_size) : n_(transform_size), shape_(w.shape()) {
    if (!is_power_of_two(n_) || n_ < shape_.kernel) throw ValidationError("bad FFT kernel transform size");
    const std::size_t Q = shape_.kernel;
    const std::size_t pairs = shape_.out_channels * shape_.in_channels;
    const auto weights = w.to_doubles();
    spectra_.assign(pairs * n_ * n_, Complex{});

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(pairs); ++pi) {
        const auto p = static_cast<std::size_t>(pi);
        std::span<Complex> grid(spectra_.data() + p * n_ * n_, n_ * n_);
        // index reversal turns the spectral product into a correlation
        for (std::size_t i = 0; i < Q; ++i)
            for (std::size_t j = 0; j < Q; ++j) grid[i * n_ + j] = weights[(p * Q + (Q - 1 - i)) * Q + (Q - 1 - j)];
        fft2d(grid, n_);
    }
}

Tensor fft_conv(const Tensor& x, const FftKernel& kernel, const ConvShape& shape, std::span<const double> bias,
                ExecStats* stats) {
    const FftPlan plan = make_fft_plan(shape);
    if (kernel.transform_size() != plan.transform_size) throw ValidationError("kernel spectra use a different size");
    if (x.shape() != shape.input_shape() || kernel.shape() != shape.kernel_shape()) {
        throw ValidationError("operands do not match convolution shape");
    }
    if (!bias.empty() && bias.size() != shape.out_channels) throw ValidationError("bias length mismatch");

    const std::size_t N = plan.transform_size, NN = N * N;
    const std::size_t L = shape.in_channels, K = shape.out_channels, M = shape.input_size, Q = shape.kernel_size;
    const std::size_t O = shape.output_size();
    const auto input = x.to_doubles();

    std::vector<Complex> spectra(L * NN);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t li = 0; li < static_cast<std::ptrdiff_t>(L); ++li) {
        const auto l = static_cast<std::size_t>(li);
        std::span<Complex> grid(spectra.data() + l * NN, NN);
        for (std::size_t y = 0; y < M; ++y)
            for (std::size_t xx = 0; xx < M; ++xx) grid[y * N + xx] = input[(l * M + y) * M + xx];
        fft2d(grid, N);
    }

    // output (i, j) sits at linear-convolution index (i - pad + Q - 1, j - pad + Q - 1)
    const auto shift = static_cast<std::ptrdiff_t>(Q - 1) - static_cast<std::ptrdiff_t>(shape.pad);
    const auto full = static_cast<std::ptrdiff_t>(M + Q - 1);

    std::vector<double> out(K * O * O);
    std::uint64_t inverses = 0;
    std::uint64_t products = 0;
#pragma omp parallel for schedule(static) reduction(+ : inverses, products)
    for (std::ptrdiff_t ki = 0; ki < static_cast<std::ptrdiff_t>(K); ++ki) {
        const auto k = static_cast<std::size_t>(ki);
        std::vector<Complex> acc(NN);
        for (std::size_t l = 0; l < L; ++l) {
            const Complex* s = spectra.data() + l * NN;
            const Complex* w = kernel.spectrum(k, l);
            for (std::size_t e = 0; e < NN; ++e) acc[e] += s[e] * w[e];
            products += NN;
        }
        ifft2d(acc, N);
        ++inverses;

        const double b = bias.empty() ? 0.0 : bias[k];
        for (std::size_t i = 0; i < O; ++i) {
            const auto row = static_cast<std::ptrdiff_t>(i) + shift;
            for (std::size_t j = 0; j < O; ++j) {
                const auto col = static_cast<std::ptrdiff_t>(j) + shift;
                const bool inside = row >= 0 && row < full && col >= 0 && col < full;
                out[(k * O + i) * O + j] = (inside ? acc[static_cast<std::size_t>(row) * N + static_cast<std::size_t>(col)].real() : 0.0) + b;
            }
        }
    }

    if (stats) {
        stats->multiplications += 4 * products;  // real multiplications per complex product
        stats->forward_ffts += L;
        stats->inverse_ffts += inverses;
    }
    return make_output(shape.output_shape(), std::move(out), x.dtype());
}

Tensor fft_conv(const Tensor& x, const WeightTensor& w, const ConvShape& shape, std::span<const double> bias,
                ExecStats* stats) {
    const FftPlan plan = make_fft_plan(shape);
    return fft_conv(x, FftKernel(w, plan.transform_size), shape, bias, stats);
}

}  // namespace hconv
