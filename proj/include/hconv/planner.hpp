#pragma once

#include "hconv/allocator.hpp"
#include "hconv/costmodel.hpp"
#include "hconv/network.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace hconv {

struct ConvPlan {
    std::string layer;
    AlgoChoice algo;
    double cost = 0.0;  // weighted cost under algo
};

struct StagePlan {
    std::string name;         // layer name or module name
    bool is_module = false;
    double complexity = 0.0;  // sum of layer costs
    double share = 0.0;       // sqrt(C) partition of the resource total
    // modules only
    double module_total = 0.0;  // share, raised to the branch count when smaller
    bool raised = false;
    AllocationPlan allocation;
    std::vector<std::string> branch_algorithms;  // per branch, comma-joined conv tags
};

struct NetworkPlan {
    std::string net;
    double resources = 0.0;
    std::vector<StagePlan> stages;
    std::vector<ConvPlan> convs;

    std::map<std::string, AlgoChoice> algorithms() const;
};

/// Weighted cost of one layer under its chosen algorithm. Non-conv layers get a small
/// per-element cost so every stage has positive complexity.
double layer_complexity(const LayerSpec& layer, AlgoChoice algo, const CostWeights& w = {});

/// Algorithm per conv, sqrt(C) split of `resources` over stages, Algorithm-1 split of each
/// module's share over its branches.
NetworkPlan make_plan(const NetworkSpec& net, double resources, const CostWeights& w = {});

void write_plan(std::ostream& out, const NetworkPlan& plan);
/// Parses the text written by write_plan. Throws SyntaxError with line numbers.
NetworkPlan read_plan(std::istream& in);

/// Sets every conv's algorithm and every module's unroll factors from the plan. Throws
/// ValidationError if the plan names a different network, misses a conv, or picks an
/// algorithm the layer cannot run.
void apply_plan(NetworkSpec& net, const NetworkPlan& plan);

}  // namespace hconv
