#include "hconv/allocator.hpp"
#include "hconv/error.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace hconv;
using hconv::testing::Gen;

namespace {

std::vector<std::uint64_t> realized(const AllocationPlan& p) {
    std::vector<std::uint64_t> out;
    for (const auto& b : p.branches) out.push_back(b.realized);
    return out;
}

bool pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

TEST(InterlayerPartition, Examples) {
    auto near = [](const std::vector<double>& got, const std::vector<double>& want) {
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
    };
    near(interlayer_partition(std::vector<double>{4, 1}, 30), {20, 10});
    near(interlayer_partition(std::vector<double>{1, 1, 1}, 9), {3, 3, 3});
    near(interlayer_partition(std::vector<double>{9, 4, 1}, 12), {6, 4, 2});
}

TEST(InterlayerPartition, Errors) {
    EXPECT_THROW(interlayer_partition(std::vector<double>{1, 0}, 4), ValidationError);
    EXPECT_THROW(interlayer_partition(std::vector<double>{1, -2}, 4), ValidationError);
    EXPECT_THROW(interlayer_partition(std::vector<double>{1}, 0), ValidationError);
    EXPECT_THROW(interlayer_partition(std::vector<double>{}, 4), ValidationError);
}

TEST(InterlayerPartitionProperty, SumAndScaleInvariance) {
    Gen gen(70);
    for (int trial = 0; trial < 500; ++trial) {
        const auto c = gen.reals(1 + gen.index(10), 0.01, 1e6);
        const double total = gen.real(1, 1e4);
        const auto r = interlayer_partition(c, total);
        ASSERT_NEAR(std::accumulate(r.begin(), r.end(), 0.0), total, 1e-9 * total);
        auto scaled = c;
        const double factor = gen.real(1e-3, 1e3);
        for (auto& v : scaled) v *= factor;
        const auto r2 = interlayer_partition(scaled, total);
        for (std::size_t i = 0; i < r.size(); ++i) ASSERT_NEAR(r[i], r2[i], 1e-9 * total);
    }
}

TEST(BranchAllocate, HandTraceThreeBranches) {
    // ideal 16, 9.6, 6.4 -> truncated 16, 8, 4 (sum 28); largest gap is branch 2 (2.4):
    // 28 + 4 <= 32 so it doubles to 8 and the budget is met
    const AllocationPlan p = branch_allocate(std::vector<double>{100, 60, 40}, 32);
    EXPECT_EQ(realized(p), (std::vector<std::uint64_t>{16, 8, 8}));
    EXPECT_EQ(p.realized_sum, 32u);
    EXPECT_FALSE(p.clamped);
    EXPECT_NEAR(p.branches[1].ideal, 9.6, 1e-12);
    EXPECT_EQ(p.branches[2].initial, 4u);
}

TEST(BranchAllocate, HandTraceFourBranches) {
    // ideal 16, 8, 4, 4 are already powers of two
    const AllocationPlan p = branch_allocate(std::vector<double>{100, 50, 25, 25}, 32);
    EXPECT_EQ(realized(p), (std::vector<std::uint64_t>{16, 8, 4, 4}));
    EXPECT_EQ(p.iterations, 0u);
}

TEST(BranchAllocate, TieGoesToLowerIndex) {
    // ideal 3, 3, 3, 3 -> 2 each (sum 8); four equal gaps of 1, budget 12: branch 0 doubles
    // (sum 10), then branch 1 (sum 12)
    const AllocationPlan p = branch_allocate(std::vector<double>{5, 5, 5, 5}, 12);
    EXPECT_EQ(realized(p), (std::vector<std::uint64_t>{4, 4, 2, 2}));
}

TEST(BranchAllocate, ClampsTinySharesToOne) {
    const AllocationPlan p = branch_allocate(std::vector<double>{1000, 1}, 4);
    EXPECT_TRUE(p.clamped);
    EXPECT_EQ(p.branches[1].initial, 1u);
    EXPECT_GE(p.branches[1].realized, 1u);
}

TEST(BranchAllocate, Errors) {
    EXPECT_THROW(branch_allocate(std::vector<double>{}, 8), ValidationError);
    EXPECT_THROW(branch_allocate(std::vector<double>{1, 1, 1}, 2), ValidationError);
    EXPECT_THROW(branch_allocate(std::vector<double>{1, 0}, 8), ValidationError);
}

TEST(BranchAllocate, LatencyIsSlowestBranch) {
    const AllocationPlan p = branch_allocate(std::vector<double>{100, 60, 40}, 32);
    EXPECT_DOUBLE_EQ(p.estimated_latency(), 60.0 / 8.0);
}

TEST(BranchAllocateProperty, Invariants) {
    Gen gen(71);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + gen.index(8);
        std::vector<double> c(n);
        for (auto& v : c) v = gen.real(0.5, gen.pick<double>({2.0, 100.0, 1e6}));
        const double total = static_cast<double>(n) + gen.real(0.0, gen.pick<double>({4.0, 64.0, 1024.0}));

        const AllocationPlan p = branch_allocate(c, total);
        ASSERT_EQ(p.branches.size(), n);

        double ideal_sum = 0.0;
        std::uint64_t sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& b = p.branches[i];
            ASSERT_TRUE(pow2(b.realized)) << "trial " << trial;
            ASSERT_TRUE(pow2(b.initial));
            ASSERT_GE(b.realized, b.initial);
            ideal_sum += b.ideal;
            sum += b.realized;
        }
        ASSERT_NEAR(ideal_sum, total, 1e-9 * total);
        ASSERT_EQ(sum, p.realized_sum);
        if (!p.clamped) ASSERT_LE(static_cast<double>(sum), ideal_sum * (1 + 1e-9));

        // termination: each iteration either doubles one branch or drops one from the queue
        std::uint64_t doublings = 0;
        for (const auto& b : p.branches) doublings += static_cast<std::uint64_t>(std::log2(b.realized / b.initial));
        ASSERT_LE(p.iterations, doublings + n);

        // truncation monotonicity
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (c[i] >= c[j]) ASSERT_GE(p.branches[i].initial, p.branches[j].initial);

        // determinism
        const AllocationPlan again = branch_allocate(c, total);
        ASSERT_EQ(realized(again), realized(p));
        ASSERT_EQ(again.iterations, p.iterations);
    }
}

TEST(BranchAllocateProperty, OnlyRelativeComplexityMatters) {
    Gen gen(72);
    for (int trial = 0; trial < 300; ++trial) {
        const auto c = gen.reals(2 + gen.index(5), 1.0, 50.0);
        auto scaled = c;
        for (auto& v : scaled) v *= 8.0;  // exact in binary
        const double total = 32 + gen.real(0, 64);
        ASSERT_EQ(realized(branch_allocate(c, total)), realized(branch_allocate(scaled, total)));
    }
}
