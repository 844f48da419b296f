#pragma once

#include "hconv/conv_shape.hpp"
#include "hconv/tensor.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <span>
#include <string>
#include <vector>

namespace hconv {

using Rational = boost::multiprecision::cpp_rational;

class RationalMatrix {
public:
    RationalMatrix() = default;
    RationalMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    Rational& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const Rational& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    RationalMatrix transposed() const;
    /// Gauss-Jordan inverse; throws ValidationError if singular.
    RationalMatrix inverse() const;
    /// Row-major float64 copy.
    std::vector<double> to_doubles() const;

    friend bool operator==(const RationalMatrix&, const RationalMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Rational> data_;
};

/// Finite interpolation points in generation order: 0, 1, -1, 2, -2, 1/2, -1/2, 4, -4, 1/4, -1/4, ...
std::vector<Rational> interpolation_nodes(std::size_t count);

/// Minimal filtering algorithm F(m, r), nested to F(m x m, r x r) in 2D:
///   Y = A^T [ (G g G^T) .* (B^T d B) ] A
/// Matrices are exact; the float64 copies are taken once at construction.
struct WinogradPlan {
    int m = 0;
    int r = 0;
    std::vector<Rational> nodes;  // finite points; the point at infinity is implicit
    RationalMatrix A;             // t x m
    RationalMatrix G;             // t x r
    RationalMatrix B;             // t x t

    std::vector<double> at;  // A^T, m x t
    std::vector<double> g;   // G, t x r
    std::vector<double> bt;  // B^T, t x t

    int tile() const noexcept { return m + r - 1; }
    std::uint64_t mults_per_tile_1d() const noexcept { return static_cast<std::uint64_t>(tile()); }
    std::uint64_t mults_per_tile_2d() const noexcept { return mults_per_tile_1d() * mults_per_tile_1d(); }
    std::string name() const;
};

/// Cook-Toom construction from the first m + r - 2 nodes plus infinity. Requires m, r >= 2.
WinogradPlan cook_toom_generate(int m, int r);

/// Shared immutable plan; generated on first use.
const WinogradPlan& cached_plan(int m, int r);

/// Tile sizes the convolution engine accepts: F(2,3), F(4,3), F(2,5), F(2,7).
bool winograd_supported(int m, int r) noexcept;

/// 1D F(m, r) on one tile: m outputs of the valid correlation of d (length t) with g (length r).
std::vector<Rational> winograd_1d_exact(const WinogradPlan& plan, std::span<const Rational> d,
                                        std::span<const Rational> g);
std::vector<double> winograd_1d(const WinogradPlan& plan, std::span<const double> d, std::span<const double> g,
                                ExecStats* stats = nullptr);

/// Transformed weights U = G g G^T for every (output, input) channel pair.
class WinogradKernel {
public:
    WinogradKernel(const WinogradPlan& plan, const WeightTensor& w);

    const WinogradPlan& plan() const noexcept { return *plan_; }
    const KernelShape& shape() const noexcept { return shape_; }
    /// t x t block for output channel k, input channel l.
    const double* block(std::size_t k, std::size_t l) const noexcept {
        const std::size_t tt = static_cast<std::size_t>(plan_->tile()) * plan_->tile();
        return u_.data() + (k * shape_.in_channels + l) * tt;
    }

private:
    const WinogradPlan* plan_;
    KernelShape shape_;
    std::vector<double> u_;
};

/// Tiled 2D Winograd convolution, parallel over input channels (transform) and output
/// channels (accumulate + inverse). Requires stride 1 and Q == plan.r. Fixed-point input is
/// computed in float64 and requantized to the input dtype.
Tensor winograd_conv(const Tensor& x, const WinogradKernel& kernel, const ConvShape& shape,
                     std::span<const double> bias = {}, ExecStats* stats = nullptr);
Tensor winograd_conv(const Tensor& x, const WeightTensor& w, const ConvShape& shape, const WinogradPlan& plan,
                     std::span<const double> bias = {}, ExecStats* stats = nullptr);

}  // namespace hconv
