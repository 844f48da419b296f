#include "hconv/allocator.hpp"

#include "hconv/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hconv {

namespace {

void require_positive(std::span<const double> c) {
    if (c.empty()) throw ValidationError("no complexities given");
    for (double v : c) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("complexities must be positive and finite");
    }
}

// Budget comparisons tolerate rounding in the ideal shares; they are sums of R * c / sum(c).
constexpr double kSlack = 1e-9;

}  // namespace

std::vector<double> interlayer_partition(std::span<const double> complexities, double total) {
    require_positive(complexities);
    if (!(total > 0.0)) throw ValidationError("resource total must be positive");
    std::vector<double> roots(complexities.size());
    std::transform(complexities.begin(), complexities.end(), roots.begin(), [](double c) { return std::sqrt(c); });
    const double sum = std::accumulate(roots.begin(), roots.end(), 0.0);
    std::vector<double> out(roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i) out[i] = total * roots[i] / sum;
    return out;
}

double AllocationPlan::estimated_latency() const {
    double worst = 0.0;
    for (const auto& b : branches) worst = std::max(worst, b.complexity / static_cast<double>(b.realized));
    return worst;
}

AllocationPlan branch_allocate(std::span<const double> complexities, double total) {
    require_positive(complexities);
    const std::size_t n = complexities.size();
    if (!(total >= static_cast<double>(n))) throw ValidationError("resource total smaller than the branch count");

    AllocationPlan plan;
    plan.total = total;
    plan.branches.resize(n);

    const double smallest = *std::min_element(complexities.begin(), complexities.end());
    double norm_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        plan.branches[i].complexity = complexities[i];
        plan.branches[i].normalized = complexities[i] / smallest;
        norm_sum += plan.branches[i].normalized;
    }
    for (auto& b : plan.branches) {
        b.ideal = total * b.normalized / norm_sum;
        plan.ideal_sum += b.ideal;
        if (b.ideal < 1.0) {
            b.realized = 1;
            plan.clamped = true;
        } else {
            b.realized = std::uint64_t{1} << static_cast<unsigned>(std::floor(std::log2(b.ideal)));
            // log2 rounding near exact powers of two
            if (static_cast<double>(b.realized) * 2.0 <= b.ideal) b.realized *= 2;
            if (static_cast<double>(b.realized) > b.ideal) b.realized /= 2;
        }
        b.initial = b.realized;
        plan.realized_sum += b.realized;
    }

    const double slack = kSlack * plan.ideal_sum;
    std::vector<std::size_t> queue(n);
    std::iota(queue.begin(), queue.end(), std::size_t{0});
    while (static_cast<double>(plan.realized_sum) < plan.ideal_sum - slack && !queue.empty()) {
        ++plan.iterations;
        // re-rank by current gap, ties to the lower branch index
        std::sort(queue.begin(), queue.end(), [&](std::size_t a, std::size_t b) {
            const double ga = plan.branches[a].ideal - static_cast<double>(plan.branches[a].realized);
            const double gb = plan.branches[b].ideal - static_cast<double>(plan.branches[b].realized);
            return ga != gb ? ga > gb : a < b;
        });
        const std::size_t sel = queue.front();
        auto& branch = plan.branches[sel];
        if (static_cast<double>(plan.realized_sum + branch.realized) <= plan.ideal_sum + slack) {
            plan.realized_sum += branch.realized;
            branch.realized *= 2;
            continue;
        }
        queue.erase(queue.begin());
    }

    for (auto& b : plan.branches) b.gap = b.ideal - static_cast<double>(b.realized);
    return plan;
}

}  // namespace hconv
