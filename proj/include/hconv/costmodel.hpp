#pragma once

#include "hconv/conv_shape.hpp"
#include "hconv/winograd.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hconv {

enum class Algorithm : std::uint8_t { direct, winograd, fft };

struct AlgoChoice {
    Algorithm kind = Algorithm::direct;
    int tile = 0;  // Winograd output tile m; 0 otherwise

    static AlgoChoice direct() noexcept { return {Algorithm::direct, 0}; }
    static AlgoChoice winograd(int m) noexcept { return {Algorithm::winograd, m}; }
    static AlgoChoice fft() noexcept { return {Algorithm::fft, 0}; }

    /// "direct", "winograd2", "winograd4", "fft"
    std::string tag() const;
    /// Inverse of tag(); throws ValidationError for unknown names.
    static AlgoChoice parse(std::string_view tag);

    friend bool operator==(const AlgoChoice&, const AlgoChoice&) = default;
};

/// Relative cost of one multiplication, one addition/transform op, and the FFT penalty
/// applied when comparing against Winograd off the decision grid.
struct CostWeights {
    double mult = 1.0;
    double add = 0.15;
    double fft_penalty = 1.5;

    void validate() const;
};

struct CostReport {
    AlgoChoice algo;
    std::uint64_t multiplications = 0;
    std::uint64_t additions = 0;
    std::uint64_t transform_ops = 0;
    double weighted_cost = 0.0;
    double speedup_vs_direct = 1.0;

    std::uint64_t operations() const noexcept { return multiplications + additions + transform_ops; }
};

/// Additions plus non-unit constant multiplications needed to apply each transform to one tile.
struct TransformOps {
    std::uint64_t input_per_tile = 0;     // B^T d B
    std::uint64_t inverse_per_tile = 0;   // A^T M A
    std::uint64_t weight_per_kernel = 0;  // G g G^T, done offline
};
TransformOps winograd_transform_ops(const WinogradPlan& plan);

/// L N^2 log2 N^2 + 4 K L N^2 + K N^2 log2 N^2
std::uint64_t fft_inference_ops(std::uint64_t in_channels, std::uint64_t out_channels, std::uint64_t transform_size);

/// K L Q^2 / ((K + L) log2 M^2 + 4 K L); tends to Q^2 / 4 for large K, L.
double fft_theoretical_speedup(double in_channels, double out_channels, double kernel, double size);

CostReport cost_direct(const ConvShape& shape, const CostWeights& w = {});
/// Throws UnsupportedAlgorithm for stride != 1.
CostReport cost_fft(const ConvShape& shape, const CostWeights& w = {});
/// Throws UnsupportedAlgorithm for stride != 1 or Q != plan.r.
CostReport cost_winograd(const ConvShape& shape, const WinogradPlan& plan, const CostWeights& w = {});
CostReport cost_of(const ConvShape& shape, AlgoChoice algo, const CostWeights& w = {});

/// Whether the engines can run `algo` on `shape`.
bool applicable(const ConvShape& shape, AlgoChoice algo) noexcept;
/// Throws UnsupportedAlgorithm naming the reason when not applicable.
void require_applicable(const ConvShape& shape, AlgoChoice algo);

/// Winograd tile for a 3x3 layer: 4 when the output is at least 16 wide, else 2. Larger kernels use 2.
int winograd_tile_for(const ConvShape& shape) noexcept;

/// Empirical kernel-size x feature-map table for the cells it covers ({3,5,7} x {6,12,24}).
std::optional<Algorithm> decision_table(std::size_t kernel, std::size_t feature_map) noexcept;

/// Direct for stride > 1 or kernels outside {3,5,7}; the table on its grid; weighted costs elsewhere.
AlgoChoice choose_algorithm(const ConvShape& shape, const CostWeights& w = {});

struct GridPoint {
    std::size_t kernel = 3;
    std::size_t feature_map = 6;
    std::size_t in_channels = 16;
    std::size_t out_channels = 16;

    ConvShape shape() const noexcept {
        return {in_channels, out_channels, feature_map, kernel, 1, same_pad(kernel)};
    }
};

/// Kernels {3,5,7} x feature maps {6,12,24} x all (L, K) pairs from {16,32,64,128}.
std::vector<GridPoint> default_grid();
/// Whitespace-separated "Q fm L K" lines; '#' starts a comment.
std::vector<GridPoint> read_grid(std::istream& in);

struct CharacterizeRow {
    GridPoint point;
    CostReport cost;
    bool selected = false;
    std::optional<double> time_us;  // only with benchmarking enabled
};

/// Cost rows for every applicable algorithm at every grid point, selection marked.
/// With `bench`, each engine also runs once on seeded random data and is timed.
std::vector<CharacterizeRow> characterize(const std::vector<GridPoint>& grid, const CostWeights& w = {},
                                          bool bench = false);

/// Columns: Q,fm,L,K,algo,mults,transform_ops,weighted_cost,selected[,time_us]
void write_characterization_csv(std::ostream& out, const std::vector<CharacterizeRow>& rows);

}  // namespace hconv
