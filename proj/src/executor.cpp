#include "hconv/executor.hpp"

#include "hconv/direct.hpp"
#include "hconv/error.hpp"
#include "hconv/reference.hpp"

#include <exception>
#include <numeric>

namespace hconv {

namespace {

WeightTensor in_precision(const WeightTensor& w, DType precision) {
    if (!is_fixed(precision)) return w.is_fixed() ? dequantize(w) : w;
    return quantize(w.is_fixed() ? dequantize(w) : w, bit_width(precision));
}

std::uint64_t direct_mults(const ConvShape& s) {
    const std::uint64_t o = s.output_size();
    return std::uint64_t{s.out_channels} * s.in_channels * s.kernel_size * s.kernel_size * o * o;
}

}  // namespace

Executor::Executor(const NetworkSpec& net, const WeightArchive& weights, ExecutorOptions options)
    : net_(net), options_(options) {
    options_.costs.validate();
    const auto layers = net_.layers();
    convs_.resize(layers.size());
    bns_.resize(layers.size());
    stats_.resize(layers.size());

    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& layer = *layers[i];
        if (!slots_.emplace(layer.name, i).second) throw ValidationError("duplicate layer name " + layer.name);
        stats_[i].name = layer.name;

        if (layer.conv()) {
            ConvPrep prep;
            prep.shape = layer.conv_shape();
            prep.algo = options_.force_direct ? AlgoChoice::direct() : effective_algorithm(layer, options_.costs);
            require_applicable(prep.shape, prep.algo);
            const WeightTensor& w = archive_weights(weights, layer.name + ".weight");
            if (w.shape() != prep.shape.kernel_shape()) {
                throw ValidationError(layer.name + ".weight does not match the layer shape");
            }
            prep.weights = in_precision(w, options_.precision);
            prep.bias = archive_vector(weights, layer.name + ".bias", prep.shape.out_channels);
            if (prep.algo.kind == Algorithm::winograd) {
                prep.winograd.emplace(cached_plan(prep.algo.tile, static_cast<int>(prep.shape.kernel_size)),
                                      prep.weights);
            } else if (prep.algo.kind == Algorithm::fft) {
                prep.fft.emplace(prep.weights, make_fft_plan(prep.shape).transform_size);
            }
            stats_[i].algo = prep.algo;
            stats_[i].direct_mults = direct_mults(prep.shape);
            convs_[i] = std::move(prep);
        } else if (std::holds_alternative<BnSpec>(layer.op)) {
            const std::size_t c = layer.input.channels;
            bns_[i] = BnPrep{archive_vector(weights, layer.name + ".scale", c),
                             archive_vector(weights, layer.name + ".shift", c)};
        }
    }

    if (net_.tail) {
        const WeightTensor& w = archive_weights(weights, "fc.weight");
        const KernelShape expected{net_.tail->embedding, net_.tail->input.size(), 1};
        if (w.shape() != expected) throw ValidationError("fc.weight does not match the tail shape");
        fc_weights_ = in_precision(w, options_.precision);
        fc_bias_ = archive_vector(weights, "fc.bias", net_.tail->embedding);
    }
}

std::size_t Executor::slot(const LayerSpec& layer) const {
    auto it = slots_.find(layer.name);
    if (it == slots_.end()) throw ValidationError("layer " + layer.name + " is not part of this network");
    return it->second;
}

AlgoChoice Executor::algorithm(const LayerSpec& layer) const {
    const auto& prep = convs_[slot(layer)];
    if (!prep) throw ValidationError("layer " + layer.name + " is not a convolution");
    return prep->algo;
}

void Executor::reset_stats() {
    for (auto& s : stats_) s.exec = {};
}

Tensor Executor::prepare_input(const Tensor& x) const {
    if (x.shape() != net_.input) throw ValidationError("input tensor does not match the network input shape");
    return requantize(x.is_fixed() ? dequantize(x) : x, options_.precision);
}

Tensor Executor::run_layer(const LayerSpec& layer, const Tensor& x) {
    const std::size_t i = slot(layer);
    if (x.shape() != layer.input) throw ValidationError("input to " + layer.name + " has the wrong shape");

    if (const auto& prep = convs_[i]) {
        ExecStats& st = stats_[i].exec;
        switch (prep->algo.kind) {
        case Algorithm::winograd: return winograd_conv(x, *prep->winograd, prep->shape, prep->bias, &st);
        case Algorithm::fft: return fft_conv(x, *prep->fft, prep->shape, prep->bias, &st);
        case Algorithm::direct: break;
        }
        return direct_conv(x, prep->weights, prep->shape, prep->bias, &st);
    }
    if (const auto* p = std::get_if<PoolSpec>(&layer.op)) {
        return p->kind == PoolKind::max ? reference::pool_max(x, p->window, p->stride, p->pad)
                                        : reference::pool_avg(x, p->window, p->stride, p->pad);
    }
    if (const auto& bn = bns_[i]) return reference::affine_bn(x, bn->scale, bn->shift);
    return reference::relu(x);
}

Tensor Executor::run_branch(const BranchSpec& branch, const Tensor& x) {
    Tensor cur = x;
    for (const auto& layer : branch.layers) cur = run_layer(layer, cur);
    return cur;
}

Tensor Executor::run_module(const ModuleSpec& module, const Tensor& x, std::span<const std::size_t> order) {
    const std::size_t n = module.branches.size();
    std::vector<std::size_t> seq(n);
    if (order.empty()) {
        std::iota(seq.begin(), seq.end(), std::size_t{0});
    } else {
        std::vector<bool> seen(n, false);
        if (order.size() != n) throw ValidationError("branch order must list every branch once");
        for (std::size_t j = 0; j < n; ++j) {
            if (order[j] >= n || seen[order[j]]) throw ValidationError("branch order must list every branch once");
            seen[order[j]] = true;
            seq[j] = order[j];
        }
    }

    // split_input: every branch reads the same immutable tensor
    std::vector<Tensor> outputs(n);
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1) if (options_.parallel_branches && n > 1)
    for (std::ptrdiff_t j = 0; j < count; ++j) {
        const std::size_t b = seq[static_cast<std::size_t>(j)];
        try {
            outputs[b] = run_branch(module.branches[b], x);
        } catch (...) {
            errors[b] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    // combine_output
    return reference::concat(outputs);
}

Tensor Executor::run_features(const Tensor& x) {
    Tensor cur = prepare_input(x);
    for (const auto& stage : net_.stages) {
        if (const auto* layer = std::get_if<LayerSpec>(&stage)) {
            cur = run_layer(*layer, cur);
        } else {
            cur = run_module(std::get<ModuleSpec>(stage), cur);
        }
    }
    return cur;
}

std::vector<double> Executor::run(const Tensor& x) {
    reset_stats();
    Tensor features = run_features(x);
    if (!net_.tail) return reference::l2_normalize(features.to_doubles());
    return reference::l2_normalize(reference::fc(features, fc_weights_, fc_bias_));
}

std::vector<double> run_network(const NetworkSpec& net, const WeightArchive& weights, const Tensor& input,
                                ExecutorOptions options) {
    Executor ex(net, weights, options);
    return ex.run(input);
}

Verdict verify_pair(std::span<const double> a, std::span<const double> b, double threshold) {
    if (a.size() != b.size()) {
        throw ValidationError("embedding lengths differ: " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    }
    if (!(threshold >= 0.0)) throw ValidationError("threshold must be non-negative");
    Verdict v;
    for (std::size_t i = 0; i < a.size(); ++i) v.distance += (a[i] - b[i]) * (a[i] - b[i]);
    v.same = v.distance < threshold;
    return v;
}

}  // namespace hconv
