#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hconv {

/// Resources proportional to sqrt(C_i): R_i = R_total * sqrt(C_i) / sum_j sqrt(C_j).
std::vector<double> interlayer_partition(std::span<const double> complexities, double total);

struct BranchShare {
    double complexity = 0.0;   // C_Bi
    double normalized = 0.0;   // C_Bi / min_j C_Bj
    double ideal = 0.0;        // R_ideal_Bi
    std::uint64_t initial = 0; // power-of-two truncation of the ideal share
    std::uint64_t realized = 0;// R_Bi after gap filling
    double gap = 0.0;          // R_ideal_Bi - R_Bi at exit
};

struct AllocationPlan {
    std::vector<BranchShare> branches;
    double total = 0.0;         // R_total
    double ideal_sum = 0.0;     // sum of ideal shares
    std::uint64_t realized_sum = 0;
    bool clamped = false;       // some ideal share was below one unit and was raised to 1
    std::uint64_t iterations = 0;

    /// max_i C_Bi / R_Bi, the slowest branch in units of work per resource.
    double estimated_latency() const;
};

/// Proportional shares truncated to powers of two, then greedily doubled largest-gap-first
/// while the budget allows. Ties go to the lower branch index.
AllocationPlan branch_allocate(std::span<const double> complexities, double total);

}  // namespace hconv
