#include "hconv/costmodel.hpp"

#include "hconv/direct.hpp"
#include "hconv/error.hpp"
#include "hconv/fft.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace hconv {

std::string AlgoChoice::tag() const {
    switch (kind) {
    case Algorithm::direct: return "direct";
    case Algorithm::winograd: return "winograd" + std::to_string(tile);
    case Algorithm::fft: return "fft";
    }
    return "?";
}

AlgoChoice AlgoChoice::parse(std::string_view tag) {
    if (tag == "direct") return direct();
    if (tag == "fft") return fft();
    if (tag == "winograd2") return winograd(2);
    if (tag == "winograd4") return winograd(4);
    throw ValidationError("unknown algorithm '" + std::string(tag) + "'");
}

void CostWeights::validate() const {
    if (!(mult > 0.0) || !(add >= 0.0) || !(fft_penalty > 0.0) || !std::isfinite(mult) || !std::isfinite(add) ||
        !std::isfinite(fft_penalty)) {
        throw ValidationError("cost weights must be finite, mult and penalty positive, add non-negative");
    }
}

namespace {

// ops to apply a matrix to one vector: per row, (nonzeros - 1) additions plus one constant
// multiplication for every entry that is not +-1
std::uint64_t apply_ops(const RationalMatrix& mtx) {
    std::uint64_t ops = 0;
    for (std::size_t i = 0; i < mtx.rows(); ++i) {
        std::uint64_t nnz = 0;
        for (std::size_t j = 0; j < mtx.cols(); ++j) {
            const Rational& v = mtx(i, j);
            if (v == 0) continue;
            ++nnz;
            if (v != 1 && v != -1) ++ops;
        }
        if (nnz > 0) ops += nnz - 1;
    }
    return ops;
}

double weigh(const CostReport& r, const CostWeights& w) {
    return w.mult * static_cast<double>(r.multiplications) +
           w.add * static_cast<double>(r.additions + r.transform_ops);
}

CostReport finish(CostReport r, const ConvShape& shape, const CostWeights& w) {
    r.weighted_cost = weigh(r, w);
    if (r.algo.kind == Algorithm::direct) {
        r.speedup_vs_direct = 1.0;
    } else {
        r.speedup_vs_direct = cost_direct(shape, w).weighted_cost / r.weighted_cost;
    }
    return r;
}

std::uint64_t log2_exact(std::uint64_t n) {
    std::uint64_t l = 0;
    while ((std::uint64_t{1} << l) < n) ++l;
    return l;
}

}  // namespace

TransformOps winograd_transform_ops(const WinogradPlan& plan) {
    const auto t = static_cast<std::uint64_t>(plan.tile());
    const auto m = static_cast<std::uint64_t>(plan.m);
    const auto r = static_cast<std::uint64_t>(plan.r);
    TransformOps ops;
    ops.input_per_tile = 2 * t * apply_ops(plan.B.transposed());
    ops.inverse_per_tile = (t + m) * apply_ops(plan.A.transposed());
    ops.weight_per_kernel = (r + t) * apply_ops(plan.G);
    return ops;
}

std::uint64_t fft_inference_ops(std::uint64_t in_channels, std::uint64_t out_channels, std::uint64_t transform_size) {
    const std::uint64_t area = transform_size * transform_size;
    const std::uint64_t log_area = 2 * log2_exact(transform_size);
    return in_channels * area * log_area + 4 * out_channels * in_channels * area + out_channels * area * log_area;
}

double fft_theoretical_speedup(double in_channels, double out_channels, double kernel, double size) {
    const double kl = in_channels * out_channels;
    return kl * kernel * kernel / ((in_channels + out_channels) * std::log2(size * size) + 4.0 * kl);
}

CostReport cost_direct(const ConvShape& shape, const CostWeights& w) {
    shape.validate();
    const std::uint64_t O = shape.output_size();
    CostReport r;
    r.algo = AlgoChoice::direct();
    r.multiplications = std::uint64_t{shape.out_channels} * shape.in_channels * shape.kernel_size * shape.kernel_size * O * O;
    r.additions = r.multiplications;
    return finish(r, shape, w);
}

CostReport cost_fft(const ConvShape& shape, const CostWeights& w) {
    const FftPlan plan = make_fft_plan(shape);
    const std::uint64_t N = plan.transform_size, area = N * N;
    const std::uint64_t L = shape.in_channels, K = shape.out_channels;
    CostReport r;
    r.algo = AlgoChoice::fft();
    r.multiplications = 4 * K * L * area;
    r.transform_ops = (L + K) * area * 2 * log2_exact(N);
    return finish(r, shape, w);
}

CostReport cost_winograd(const ConvShape& shape, const WinogradPlan& plan, const CostWeights& w) {
    shape.validate();
    if (shape.stride != 1) throw UnsupportedAlgorithm("Winograd requires stride 1");
    if (shape.kernel_size != static_cast<std::size_t>(plan.r)) {
        throw UnsupportedAlgorithm("kernel size does not match plan " + plan.name());
    }
    const std::uint64_t m = static_cast<std::uint64_t>(plan.m);
    const std::uint64_t tt = plan.mults_per_tile_2d();
    const std::uint64_t tiles_1d = (shape.output_size() + m - 1) / m;
    const std::uint64_t tiles = tiles_1d * tiles_1d;
    const std::uint64_t L = shape.in_channels, K = shape.out_channels;
    const TransformOps ops = winograd_transform_ops(plan);

    CostReport r;
    r.algo = AlgoChoice::winograd(plan.m);
    r.multiplications = tiles * tt * L * K;
    r.additions = tiles * tt * (L - 1) * K;
    r.transform_ops = tiles * (L * ops.input_per_tile + K * ops.inverse_per_tile);
    return finish(r, shape, w);
}

CostReport cost_of(const ConvShape& shape, AlgoChoice algo, const CostWeights& w) {
    require_applicable(shape, algo);
    switch (algo.kind) {
    case Algorithm::direct: return cost_direct(shape, w);
    case Algorithm::fft: return cost_fft(shape, w);
    case Algorithm::winograd: return cost_winograd(shape, cached_plan(algo.tile, static_cast<int>(shape.kernel_size)), w);
    }
    return cost_direct(shape, w);
}

bool applicable(const ConvShape& shape, AlgoChoice algo) noexcept {
    switch (algo.kind) {
    case Algorithm::direct: return true;
    case Algorithm::fft: return shape.stride == 1;
    case Algorithm::winograd:
        return shape.stride == 1 && winograd_supported(algo.tile, static_cast<int>(shape.kernel_size));
    }
    return false;
}

void require_applicable(const ConvShape& shape, AlgoChoice algo) {
    if (applicable(shape, algo)) return;
    if (shape.stride != 1) {
        throw UnsupportedAlgorithm(algo.tag() + " does not support stride " + std::to_string(shape.stride) +
                                   "; stride > 1 convolutions run direct");
    }
    throw UnsupportedAlgorithm(algo.tag() + " does not support " + std::to_string(shape.kernel_size) + "x" +
                               std::to_string(shape.kernel_size) + " kernels");
}

int winograd_tile_for(const ConvShape& shape) noexcept {
    const int r = static_cast<int>(shape.kernel_size);
    if (shape.output_size() >= 16 && winograd_supported(4, r)) return 4;
    return 2;
}

std::optional<Algorithm> decision_table(std::size_t kernel, std::size_t feature_map) noexcept {
    auto col = [](std::size_t fm) -> int { return fm == 6 ? 0 : fm == 12 ? 1 : fm == 24 ? 2 : -1; };
    const int c = col(feature_map);
    if (c < 0) return std::nullopt;
    constexpr Algorithm W = Algorithm::winograd, F = Algorithm::fft;
    constexpr Algorithm table[3][3] = {
        {W, W, W},  // 3x3
        {W, W, F},  // 5x5
        {W, F, F},  // 7x7
    };
    switch (kernel) {
    case 3: return table[0][c];
    case 5: return table[1][c];
    case 7: return table[2][c];
    default: return std::nullopt;
    }
}

AlgoChoice choose_algorithm(const ConvShape& shape, const CostWeights& w) {
    shape.validate();
    const std::size_t Q = shape.kernel_size;
    if (shape.stride > 1 || (Q != 3 && Q != 5 && Q != 7)) return AlgoChoice::direct();

    const AlgoChoice wino = AlgoChoice::winograd(winograd_tile_for(shape));
    if (auto cell = decision_table(Q, shape.input_size)) return *cell == Algorithm::fft ? AlgoChoice::fft() : wino;

    const double wino_cost = cost_of(shape, wino, w).weighted_cost;
    const double fft_cost = cost_fft(shape, w).weighted_cost * w.fft_penalty;
    return fft_cost < wino_cost ? AlgoChoice::fft() : wino;
}

std::vector<GridPoint> default_grid() {
    constexpr std::size_t kernels[] = {3, 5, 7};
    constexpr std::size_t maps[] = {6, 12, 24};
    constexpr std::size_t channels[] = {16, 32, 64, 128};
    std::vector<GridPoint> grid;
    for (auto q : kernels)
        for (auto fm : maps)
            for (auto l : channels)
                for (auto k : channels) grid.push_back({q, fm, l, k});
    return grid;
}

std::vector<GridPoint> read_grid(std::istream& in) {
    std::vector<GridPoint> grid;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        GridPoint p;
        if (!(ss >> p.kernel)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw SyntaxError(lineno, "expected 'Q fm L K'");
        }
        std::string extra;
        if (!(ss >> p.feature_map >> p.in_channels >> p.out_channels) || (ss >> extra)) {
            throw SyntaxError(lineno, "expected 'Q fm L K'");
        }
        if (p.kernel == 0 || p.feature_map == 0 || p.in_channels == 0 || p.out_channels == 0) {
            throw SyntaxError(lineno, "grid values must be positive");
        }
        grid.push_back(p);
    }
    return grid;
}

namespace {

double time_engine(const ConvShape& shape, AlgoChoice algo, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> xv(shape.input_shape().size()), wv(shape.kernel_shape().size());
    for (auto& v : xv) v = dist(rng);
    for (auto& v : wv) v = dist(rng);
    const auto x = Tensor::from_values(shape.input_shape(), std::move(xv));
    const auto w = WeightTensor::from_values(shape.kernel_shape(), std::move(wv));

    const auto start = std::chrono::steady_clock::now();
    switch (algo.kind) {
    case Algorithm::direct: direct_conv(x, w, shape); break;
    case Algorithm::fft: fft_conv(x, w, shape); break;
    case Algorithm::winograd:
        winograd_conv(x, w, shape, cached_plan(algo.tile, static_cast<int>(shape.kernel_size)));
        break;
    }
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::micro>(stop - start).count();
}

}  // namespace

std::vector<CharacterizeRow> characterize(const std::vector<GridPoint>& grid, const CostWeights& w, bool bench) {
    w.validate();
    std::vector<CharacterizeRow> rows;
    std::uint64_t seed = 0;
    for (const auto& p : grid) {
        const ConvShape shape = p.shape();
        shape.validate();
        const AlgoChoice chosen = choose_algorithm(shape, w);

        std::vector<AlgoChoice> candidates{AlgoChoice::direct(), AlgoChoice::winograd(2), AlgoChoice::winograd(4),
                                           AlgoChoice::fft()};
        for (const auto& algo : candidates) {
            if (!applicable(shape, algo)) continue;
            CharacterizeRow row{p, cost_of(shape, algo, w), algo == chosen, std::nullopt};
            if (bench) row.time_us = time_engine(shape, algo, seed++);
            rows.push_back(row);
        }
    }
    return rows;
}

void write_characterization_csv(std::ostream& out, const std::vector<CharacterizeRow>& rows) {
    const bool timed = !rows.empty() && rows.front().time_us.has_value();
    fmt::print(out, "Q,fm,L,K,algo,mults,transform_ops,weighted_cost,selected{}\n", timed ? ",time_us" : "");
    for (const auto& r : rows) {
        fmt::print(out, "{},{},{},{},{},{},{},{},{}", r.point.kernel, r.point.feature_map, r.point.in_channels,
                   r.point.out_channels, r.cost.algo.tag(), r.cost.multiplications, r.cost.transform_ops,
                   r.cost.weighted_cost, r.selected ? 1 : 0);
        if (timed) fmt::print(out, ",{:.1f}", r.time_us.value_or(0.0));
        out << '\n';
    }
}

}  // namespace hconv
