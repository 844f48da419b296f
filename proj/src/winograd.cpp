#include "hconv/winograd.hpp"

#include "hconv/error.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace hconv {

RationalMatrix RationalMatrix::transposed() const {
    RationalMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

RationalMatrix RationalMatrix::inverse() const {
    if (rows_ != cols_) throw ValidationError("inverse of a non-square matrix");
    const std::size_t n = rows_;
    RationalMatrix a = *this;
    RationalMatrix inv(n, n);
    for (std::size_t i = 0; i < n; ++i) inv(i, i) = 1;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        while (pivot < n && a(pivot, col) == 0) ++pivot;
        if (pivot == n) throw ValidationError("singular interpolation matrix");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(pivot, j), a(col, j));
                std::swap(inv(pivot, j), inv(col, j));
            }
        }
        const Rational p = a(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            a(col, j) /= p;
            inv(col, j) /= p;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == col || a(i, col) == 0) continue;
            const Rational f = a(i, col);
            for (std::size_t j = 0; j < n; ++j) {
                a(i, j) -= f * a(col, j);
                inv(i, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

std::vector<double> RationalMatrix::to_doubles() const {
    std::vector<double> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = data_[i].convert_to<double>();
    return out;
}

std::vector<Rational> interpolation_nodes(std::size_t count) {
    std::vector<Rational> nodes;
    nodes.reserve(count);
    if (count > 0) nodes.emplace_back(0);
    for (std::size_t i = 1; nodes.size() < count; ++i) {
        const std::size_t p = (i - 1) / 2;
        Rational mag = 1;
        if (p % 2 == 1) {
            mag = Rational(boost::multiprecision::cpp_int(1) << ((p + 1) / 2));
        } else if (p > 0) {
            mag = Rational(1, boost::multiprecision::cpp_int(1) << (p / 2));
        }
        nodes.push_back((i - 1) % 2 == 0 ? mag : Rational(-mag));
    }
    return nodes;
}

namespace {

// Evaluation matrix for polynomials with `degree_terms` coefficients at the finite nodes,
// with a last row selecting the leading coefficient (evaluation at infinity).
RationalMatrix evaluation_matrix(const std::vector<Rational>& nodes, std::size_t degree_terms) {
    const std::size_t t = nodes.size() + 1;
    RationalMatrix v(t, degree_terms);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        Rational power = 1;
        for (std::size_t j = 0; j < degree_terms; ++j) {
            v(i, j) = power;
            power *= nodes[i];
        }
    }
    v(t - 1, degree_terms - 1) = 1;
    return v;
}

// out (n x cols) = lhs (n x inner) * rhs (inner x cols), all row-major
void matmul(const double* lhs, const double* rhs, double* out, std::size_t n, std::size_t inner, std::size_t cols) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < inner; ++k) acc += lhs[i * inner + k] * rhs[k * cols + j];
            out[i * cols + j] = acc;
        }
    }
}

// out (n x rows) = lhs (n x inner) * rhs^T where rhs is (rows x inner)
void matmul_bt(const double* lhs, const double* rhs, double* out, std::size_t n, std::size_t inner,
               std::size_t rows) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < rows; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < inner; ++k) acc += lhs[i * inner + k] * rhs[j * inner + k];
            out[i * rows + j] = acc;
        }
    }
}

}  // namespace

std::string WinogradPlan::name() const {
    return "F(" + std::to_string(m) + "x" + std::to_string(m) + "," + std::to_string(r) + "x" + std::to_string(r) + ")";
}

WinogradPlan cook_toom_generate(int m, int r) {
    if (m < 2 || r < 2) throw ValidationError("Cook-Toom generation needs m >= 2 and r >= 2");
    if (m + r > 32) throw ValidationError("tile size m + r - 1 too large");

    WinogradPlan plan;
    plan.m = m;
    plan.r = r;
    const std::size_t t = static_cast<std::size_t>(m + r - 1);
    plan.nodes = interpolation_nodes(t - 1);
    plan.A = evaluation_matrix(plan.nodes, static_cast<std::size_t>(m));
    plan.G = evaluation_matrix(plan.nodes, static_cast<std::size_t>(r));
    plan.B = evaluation_matrix(plan.nodes, t).inverse();

    plan.at = plan.A.transposed().to_doubles();
    plan.g = plan.G.to_doubles();
    plan.bt = plan.B.transposed().to_doubles();
    return plan;
}

const WinogradPlan& cached_plan(int m, int r) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<WinogradPlan>> plans;
    std::lock_guard lock(mu);
    auto& slot = plans[{m, r}];
    if (!slot) slot = std::make_unique<WinogradPlan>(cook_toom_generate(m, r));
    return *slot;
}

bool winograd_supported(int m, int r) noexcept {
    return (r == 3 && (m == 2 || m == 4)) || (m == 2 && (r == 5 || r == 7));
}

std::vector<Rational> winograd_1d_exact(const WinogradPlan& plan, std::span<const Rational> d,
                                        std::span<const Rational> g) {
    const auto t = static_cast<std::size_t>(plan.tile());
    if (d.size() != t || g.size() != static_cast<std::size_t>(plan.r)) {
        throw ValidationError("1D tile sizes do not match the plan");
    }
    std::vector<Rational> prod(t);
    for (std::size_t i = 0; i < t; ++i) {
        Rational gi = 0, di = 0;
        for (std::size_t j = 0; j < g.size(); ++j) gi += plan.G(i, j) * g[j];
        for (std::size_t j = 0; j < t; ++j) di += plan.B(j, i) * d[j];
        prod[i] = gi * di;
    }
    std::vector<Rational> y(static_cast<std::size_t>(plan.m));
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < t; ++j) y[i] += plan.A(j, i) * prod[j];
    return y;
}

std::vector<double> winograd_1d(const WinogradPlan& plan, std::span<const double> d, std::span<const double> g,
                                ExecStats* stats) {
    const auto t = static_cast<std::size_t>(plan.tile());
    const auto r = static_cast<std::size_t>(plan.r);
    const auto m = static_cast<std::size_t>(plan.m);
    if (d.size() != t || g.size() != r) throw ValidationError("1D tile sizes do not match the plan");

    std::vector<double> gu(t), dv(t), prod(t), y(m);
    matmul(plan.g.data(), g.data(), gu.data(), t, r, 1);
    matmul(plan.bt.data(), d.data(), dv.data(), t, t, 1);
    for (std::size_t i = 0; i < t; ++i) prod[i] = gu[i] * dv[i];
    matmul(plan.at.data(), prod.data(), y.data(), m, t, 1);
    if (stats) stats->multiplications += t;
    return y;
}

WinogradKernel::WinogradKernel(const WinogradPlan& plan, const WeightTensor& w) : plan_(&plan), shape_(w.shape()) {
    if (w.kernel() != static_cast<std::size_t>(plan.r)) {
        throw UnsupportedAlgorithm("kernel size " + std::to_string(w.kernel()) + " does not match plan " + plan.name());
    }
    const auto t = static_cast<std::size_t>(plan.tile());
    const auto r = static_cast<std::size_t>(plan.r);
    const auto weights = w.to_doubles();
    const std::size_t pairs = shape_.out_channels * shape_.in_channels;
    u_.resize(pairs * t * t);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(pairs); ++p) {
        std::vector<double> tmp(t * r);
        // U = G g G^T
        matmul(plan.g.data(), weights.data() + static_cast<std::size_t>(p) * r * r, tmp.data(), t, r, r);
        matmul_bt(tmp.data(), plan.g.data(), u_.data() + static_cast<std::size_t>(p) * t * t, t, r, t);
    }
}

Tensor winograd_conv(const Tensor& x, const WinogradKernel& kernel, const ConvShape& shape,
                     std::span<const double> bias, ExecStats* stats) {
    shape.validate();
    if (shape.stride != 1) throw UnsupportedAlgorithm("Winograd convolution requires stride 1");
    const WinogradPlan& plan = kernel.plan();
    if (shape.kernel_size != static_cast<std::size_t>(plan.r)) {
        throw UnsupportedAlgorithm("kernel size does not match plan " + plan.name());
    }
    if (x.shape() != shape.input_shape() || kernel.shape() != shape.kernel_shape()) {
        throw ValidationError("operands do not match convolution shape");
    }
    if (!bias.empty() && bias.size() != shape.out_channels) throw ValidationError("bias length mismatch");

    const auto m = static_cast<std::size_t>(plan.m);
    const auto t = static_cast<std::size_t>(plan.tile());
    const std::size_t tt = t * t;
    const std::size_t L = shape.in_channels, K = shape.out_channels, M = shape.input_size;
    const std::size_t O = shape.output_size();
    const std::size_t tiles_1d = (O + m - 1) / m;
    const std::size_t tiles = tiles_1d * tiles_1d;
    // zero-extended input so every tile is complete; cropped after the inverse transform
    const std::size_t P = tiles_1d * m + t - m;

    const auto input = x.to_doubles();
    std::vector<double> v(L * tiles * tt);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t li = 0; li < static_cast<std::ptrdiff_t>(L); ++li) {
        const auto l = static_cast<std::size_t>(li);
        std::vector<double> padded(P * P, 0.0);
        for (std::size_t y = 0; y < M; ++y)
            for (std::size_t xx = 0; xx < M; ++xx) padded[(y + shape.pad) * P + xx + shape.pad] = input[(l * M + y) * M + xx];

        std::vector<double> d(tt), tmp(tt);
        for (std::size_t ty = 0; ty < tiles_1d; ++ty) {
            for (std::size_t tx = 0; tx < tiles_1d; ++tx) {
                for (std::size_t i = 0; i < t; ++i)
                    for (std::size_t j = 0; j < t; ++j) d[i * t + j] = padded[(ty * m + i) * P + tx * m + j];
                // V = B^T d B
                matmul(plan.bt.data(), d.data(), tmp.data(), t, t, t);
                matmul_bt(tmp.data(), plan.bt.data(), v.data() + (l * tiles + ty * tiles_1d + tx) * tt, t, t, t);
            }
        }
    }

    std::vector<double> out(K * O * O);
    std::uint64_t mults = 0;
    std::uint64_t tiles_done = 0;
#pragma omp parallel for schedule(static) reduction(+ : mults, tiles_done)
    for (std::ptrdiff_t ki = 0; ki < static_cast<std::ptrdiff_t>(K); ++ki) {
        const auto k = static_cast<std::size_t>(ki);
        const double b = bias.empty() ? 0.0 : bias[k];
        std::vector<double> acc(tt), tmp(m * t), y(m * m);
        for (std::size_t tile = 0; tile < tiles; ++tile) {
            std::fill(acc.begin(), acc.end(), 0.0);
            // canonical order: input channels ascending
            for (std::size_t l = 0; l < L; ++l) {
                const double* u = kernel.block(k, l);
                const double* vv = v.data() + (l * tiles + tile) * tt;
                for (std::size_t e = 0; e < tt; ++e) acc[e] += u[e] * vv[e];
                mults += tt;
            }
            ++tiles_done;
            // Y = A^T acc A
            matmul(plan.at.data(), acc.data(), tmp.data(), m, t, t);
            matmul_bt(tmp.data(), plan.at.data(), y.data(), m, t, m);

            const std::size_t oy0 = (tile / tiles_1d) * m, ox0 = (tile % tiles_1d) * m;
            for (std::size_t i = 0; i < m && oy0 + i < O; ++i)
                for (std::size_t j = 0; j < m && ox0 + j < O; ++j) out[(k * O + oy0 + i) * O + ox0 + j] = y[i * m + j] + b;
        }
    }

    if (stats) {
        stats->multiplications += mults;
        stats->tiles += tiles_done;
    }
    return make_output(shape.output_shape(), std::move(out), x.dtype());
}

Tensor winograd_conv(const Tensor& x, const WeightTensor& w, const ConvShape& shape, const WinogradPlan& plan,
                     std::span<const double> bias, ExecStats* stats) {
    if (shape.stride != 1) throw UnsupportedAlgorithm("Winograd convolution requires stride 1");
    return winograd_conv(x, WinogradKernel(plan, w), shape, bias, stats);
}

}  // namespace hconv
