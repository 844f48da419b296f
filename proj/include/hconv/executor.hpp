#pragma once

#include "hconv/costmodel.hpp"
#include "hconv/fft.hpp"
#include "hconv/network.hpp"
#include "hconv/weights.hpp"
#include "hconv/winograd.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hconv {

struct ExecutorOptions {
    DType precision = DType::float64;  // feature maps and weights are quantized to this at load time
    bool force_direct = false;         // ignore algorithm choices; every conv runs direct
    bool parallel_branches = true;     // evaluate module branches concurrently
    CostWeights costs;                 // used for convs without an explicit algorithm
};

struct LayerStats {
    std::string name;
    AlgoChoice algo;
    ExecStats exec;
    std::uint64_t direct_mults = 0;  // what conv_direct would have spent on the same layer

    double reduction() const noexcept {
        return exec.multiplications ? static_cast<double>(direct_mults) / static_cast<double>(exec.multiplications)
                                    : 0.0;
    }
};

/// Runs a validated network. All weights, quantized copies and transformed kernels are
/// prepared in the constructor and read-only afterwards. Stats slots are per layer, so
/// concurrent branches never write the same slot.
class Executor {
public:
    Executor(const NetworkSpec& net, const WeightArchive& weights, ExecutorOptions options = {});

    const NetworkSpec& network() const noexcept { return net_; }
    const ExecutorOptions& options() const noexcept { return options_; }

    /// Quantizes a float input to the configured precision (identity in float mode).
    Tensor prepare_input(const Tensor& x) const;

    Tensor run_layer(const LayerSpec& layer, const Tensor& x);
    /// split_input / per-branch evaluation / combine_output. `order` permutes the evaluation
    /// sequence only; concatenation always follows declaration order.
    Tensor run_module(const ModuleSpec& module, const Tensor& x, std::span<const std::size_t> order = {});
    /// All stages, without the tail.
    Tensor run_features(const Tensor& x);
    /// Full network: stages, fc, l2 normalization. Resets the stats first.
    std::vector<double> run(const Tensor& x);

    AlgoChoice algorithm(const LayerSpec& layer) const;
    const std::vector<LayerStats>& stats() const noexcept { return stats_; }
    void reset_stats();

private:
    struct ConvPrep {
        AlgoChoice algo;
        ConvShape shape;
        WeightTensor weights;  // in the run precision
        std::vector<double> bias;
        std::optional<WinogradKernel> winograd;
        std::optional<FftKernel> fft;
    };
    struct BnPrep {
        std::vector<double> scale;
        std::vector<double> shift;
    };

    std::size_t slot(const LayerSpec& layer) const;
    Tensor run_branch(const BranchSpec& branch, const Tensor& x);

    NetworkSpec net_;
    ExecutorOptions options_;
    std::map<std::string, std::size_t> slots_;
    std::vector<LayerStats> stats_;
    std::vector<std::optional<ConvPrep>> convs_;
    std::vector<std::optional<BnPrep>> bns_;
    WeightTensor fc_weights_;
    std::vector<double> fc_bias_;
};

/// Convenience wrapper: build an executor and run once.
std::vector<double> run_network(const NetworkSpec& net, const WeightArchive& weights, const Tensor& input,
                                ExecutorOptions options = {});

struct Verdict {
    double distance = 0.0;  // sum of squared differences
    bool same = false;      // distance < threshold
};

/// Squared-L2 comparison of two embeddings; the default threshold is 1.
Verdict verify_pair(std::span<const double> a, std::span<const double> b, double threshold = 1.0);

}  // namespace hconv
