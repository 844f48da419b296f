#pragma once

#include "hconv/conv_shape.hpp"
#include "hconv/costmodel.hpp"
#include "hconv/tensor.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hconv {

// Descriptor grammar (whitespace-insensitive, '#' comments):
//
//   net <name> { input c=<C> s=<M> ; <stmt>* ; fc out=128 ; l2norm }
//   stmt := conv k=<Q> out=<K> [stride=<s>] [pad=<p>] [alg=direct|winograd2|winograd4|fft|auto]
//         | pool max|avg k=<w> stride=<s> [pad=<p>]
//         | bn | relu
//         | module <name> { branch { <stmt>* } ... }
//
// conv pad defaults to (Q - 1) / 2, pool pad to 0. Modules do not nest.

struct ConvSpec {
    std::size_t kernel = 1;
    std::size_t out_channels = 1;
    std::size_t stride = 1;
    std::size_t pad = 0;
    std::optional<AlgoChoice> algorithm;  // empty = choose automatically
};

enum class PoolKind { max, avg };

struct PoolSpec {
    PoolKind kind = PoolKind::max;
    std::size_t window = 2;
    std::size_t stride = 2;
    std::size_t pad = 0;
};

struct BnSpec {};
struct ReluSpec {};

using LayerOp = std::variant<ConvSpec, PoolSpec, BnSpec, ReluSpec>;

struct LayerSpec {
    std::string name;  // unique; also the weight-archive key prefix
    LayerOp op;
    Shape3 input;
    Shape3 output;
    int line = 0;

    const ConvSpec* conv() const noexcept { return std::get_if<ConvSpec>(&op); }
    ConvSpec* conv() noexcept { return std::get_if<ConvSpec>(&op); }
    /// Geometry of a conv layer; throws ValidationError for other kinds.
    ConvShape conv_shape() const;
    std::string_view kind() const noexcept;
};

struct BranchSpec {
    std::vector<LayerSpec> layers;
    Shape3 output;
};

/// Concurrent branches merged by channel concatenation in declaration order.
struct ModuleSpec {
    std::string name;
    std::vector<BranchSpec> branches;
    std::vector<std::uint64_t> unroll;  // per-branch parallel factor; 1 until a plan assigns one
    Shape3 input;
    Shape3 output;
    int line = 0;
};

using Stage = std::variant<LayerSpec, ModuleSpec>;

/// fc to `embedding` outputs followed by l2 normalization.
struct TailSpec {
    std::size_t embedding = 128;
    Shape3 input;
};

struct NetworkSpec {
    std::string name;
    Shape3 input;
    std::vector<Stage> stages;
    std::optional<TailSpec> tail;

    /// Shape entering the tail (or leaving the last stage).
    Shape3 feature_shape() const;
    const ModuleSpec* find_module(std::string_view name) const noexcept;

    /// Every layer, stage order then branch order.
    std::vector<const LayerSpec*> layers() const;
    std::vector<LayerSpec*> layers();
};

/// Parses and fully validates a descriptor. Throws SyntaxError (with line number) for
/// grammar problems and ValidationError for dimension or algorithm problems.
NetworkSpec parse_network(std::string_view text);
/// Reads a descriptor file; IoError if it cannot be read.
NetworkSpec load_network(const std::filesystem::path& path);

/// Assigns choose_algorithm() to every conv without an explicit algorithm.
void resolve_algorithms(NetworkSpec& net, const CostWeights& weights = {});

/// Conv algorithm after resolution: explicit choice, else choose_algorithm().
AlgoChoice effective_algorithm(const LayerSpec& layer, const CostWeights& weights = {});

}  // namespace hconv
