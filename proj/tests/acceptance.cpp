// Acceptance checks, one PASS/FAIL line per criterion. Exit status is non-zero if any fails.

#include "hconv/allocator.hpp"
#include "hconv/cli.hpp"
#include "hconv/costmodel.hpp"
#include "hconv/executor.hpp"
#include "hconv/fft.hpp"
#include "hconv/network.hpp"
#include "hconv/reference.hpp"
#include "hconv/weights.hpp"
#include "hconv/winograd.hpp"
#include "support.hpp"

#include <fmt/format.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace hconv;
using hconv::testing::Gen;
using hconv::testing::rel_error;

namespace {

const std::string kFixtures = HCONV_FIXTURE_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome oracle_equivalence() {
    Gen gen(2024);
    const auto grid = default_grid();
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    int checks = 0;
    for (int i = 0; i < 200; ++i) {
        const GridPoint p = grid[gen.index(grid.size())];
        const ConvShape s = p.shape();
        const Tensor x = gen.tensor(s.input_shape());
        const WeightTensor w = gen.weights(s.kernel_shape());
        const auto ref = reference::conv_direct(x, w, s).to_doubles();
        const int q = static_cast<int>(p.kernel);
        const int m = (q == 3 && i % 2 == 1) ? 4 : 2;
        worst = std::max(worst, rel_error(winograd_conv(x, w, s, cached_plan(m, q)).to_doubles(), ref));
        worst = std::max(worst, rel_error(fft_conv(x, w, s).to_doubles(), ref));
        checks += 2;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst < 1e-8 && secs < 300.0,
            fmt::format("200 instances, {} engine checks, worst relative error {:.3e}, {:.1f} s", checks, worst, secs)};
}

Outcome winograd_counts() {
    Gen gen(1);
    const ConvShape s{1, 1, 4, 3, 1, 0};  // one 2x2 output tile
    const Tensor x = gen.tensor(s.input_shape());
    const WeightTensor w = gen.weights(s.kernel_shape());
    ExecStats wino, direct, one_d;
    winograd_conv(x, w, s, cached_plan(2, 3), {}, &wino);
    reference::conv_direct(x, w, s, {}, &direct);
    winograd_1d(cached_plan(2, 3), gen.reals(4), gen.reals(3), &one_d);
    const std::uint64_t direct_1d = 2 * 3;
    const bool ok = wino.multiplications == 16 && direct.multiplications == 36 &&
                    direct.multiplications * 4 == wino.multiplications * 9 && one_d.multiplications == 4;
    return {ok, fmt::format("2D tile {} vs {} (ratio {}), 1D {} vs {}", wino.multiplications, direct.multiplications,
                            static_cast<double>(direct.multiplications) / static_cast<double>(wino.multiplications),
                            one_d.multiplications, direct_1d)};
}

Outcome cook_toom() {
    Gen gen(3);
    int checked = 0;
    for (auto [m, r] : std::vector<std::pair<int, int>>{{2, 3}, {4, 3}, {2, 5}, {2, 7}, {3, 3}, {4, 5}}) {
        const WinogradPlan p = cook_toom_generate(m, r);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<Rational> d, g;
            for (int i = 0; i < p.tile(); ++i) d.emplace_back(gen.integer(-1000, 1000));
            for (int i = 0; i < r; ++i) g.emplace_back(gen.integer(-1000, 1000));
            std::vector<Rational> want(static_cast<std::size_t>(m));
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < r; ++j) want[i] += d[i + j] * g[j];
            if (winograd_1d_exact(p, d, g) != want) return {false, "mismatch for " + p.name()};
            ++checked;
        }
    }
    return {true, fmt::format("{} exact rational identities over 6 plans", checked)};
}

Outcome fft_counts() {
    const std::uint64_t ops = fft_inference_ops(64, 64, 32);
    const std::uint64_t report = cost_fft({64, 64, 24, 5, 1, 2}).operations();
    const double speedup = fft_theoretical_speedup(4096, 4096, 5, 32);
    const bool ok = ops == 18087936 && report == 18087936 && std::abs(speedup - 6.25) <= 0.02 * 6.25;
    return {ok, fmt::format("inference ops {} (cost_fft {}), speedup {:.4f} vs 6.25", ops, report, speedup)};
}

Outcome decision_table_cli() {
    const auto csv = std::filesystem::temp_directory_path() / "hconv_acceptance_characterize.csv";
    std::ostringstream out, err;
    if (dispatch({"characterize", "--out", csv.string()}, out, err) != 0) return {false, err.str()};
    std::ifstream in(csv);
    std::map<std::pair<int, int>, std::set<std::string>> chosen;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        if (f.size() >= 9 && f[8] == "1") chosen[{std::stoi(f[0]), std::stoi(f[1])}].insert(f[4] == "fft" ? "F" : "W");
    }
    std::filesystem::remove(csv);
    std::string matrix;
    bool ok = chosen.size() == 9;
    for (int q : {3, 5, 7}) {
        for (int fm : {6, 12, 24}) {
            const bool fft = (q == 5 && fm == 24) || (q == 7 && fm >= 12);
            const std::set<std::string> want{fft ? "F" : "W"};
            const auto it = chosen.find({q, fm});
            ok = ok && it != chosen.end() && it->second == want;
            matrix += it == chosen.end() ? "?" : (it->second.size() == 1 ? *it->second.begin() : "*");
        }
        matrix += q == 7 ? "" : "/";
    }
    return {ok, "selection rows Q3/Q5/Q7 x fm 6,12,24: " + matrix};
}

Outcome padding_rule() {
    const bool ok = pad_size(6, 3) == 8 && pad_size(12, 3) == 16 && pad_size(24, 5) == 32 && pad_size(6, 5) == 16 &&
                    pad_size(6, 7) == 16;
    return {ok, fmt::format("{} {} {} {} {}", pad_size(6, 3), pad_size(12, 3), pad_size(24, 5), pad_size(6, 5),
                            pad_size(6, 7))};
}

std::vector<std::uint64_t> realized(const AllocationPlan& p) {
    std::vector<std::uint64_t> v;
    for (const auto& b : p.branches) v.push_back(b.realized);
    return v;
}

Outcome allocator() {
    const auto a = realized(branch_allocate(std::vector<double>{100, 60, 40}, 32));
    const auto b = realized(branch_allocate(std::vector<double>{100, 50, 25, 25}, 32));
    bool ok = a == std::vector<std::uint64_t>{16, 8, 8} && b == std::vector<std::uint64_t>{16, 8, 4, 4};
    Gen gen(7);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + gen.index(8);
        const auto c = gen.reals(n, 0.5, 1000.0);
        const double total = static_cast<double>(n) + gen.real(0.0, 512.0);
        const AllocationPlan p = branch_allocate(c, total);
        std::uint64_t sum = 0, doublings = 0;
        for (const auto& br : p.branches) {
            if (br.realized == 0 || (br.realized & (br.realized - 1)) != 0) ++violations;
            sum += br.realized;
            doublings += static_cast<std::uint64_t>(std::log2(br.realized / br.initial));
        }
        if (!p.clamped && static_cast<double>(sum) > p.ideal_sum * (1 + 1e-9)) ++violations;
        if (p.iterations > doublings + n) ++violations;
        if (realized(branch_allocate(c, total)) != realized(p)) ++violations;
    }
    ok = ok && violations == 0;
    return {ok, fmt::format("[{},{},{}] and [{},{},{},{}]; 1000 random instances, {} violations", a[0], a[1], a[2], b[0],
                            b[1], b[2], b[3], violations)};
}

Outcome planner_fixture() {
    NetworkSpec net = load_network(kFixtures + "/inception_v2.net");
    resolve_algorithms(net);
    int checked = 0, wrong = 0;
    std::string first_wrong;
    for (const auto& stage : net.stages) {
        const auto* m = std::get_if<ModuleSpec>(&stage);
        if (!m) continue;
        for (const auto& b : m->branches)
            for (const auto& l : b.layers) {
                const auto* c = l.conv();
                if (!c || c->kernel == 1) continue;
                const ConvShape s = l.conv_shape();
                AlgoChoice want;
                if (s.stride > 1) {
                    want = AlgoChoice::direct();
                } else if (s.kernel_size == 3) {
                    if (s.input_size == 28) want = AlgoChoice::winograd(4);
                    else if (s.input_size == 14 || s.input_size == 7) want = AlgoChoice::winograd(2);
                    else continue;
                } else if (s.kernel_size == 5 && s.input_size >= 24) {
                    want = AlgoChoice::fft();
                } else {
                    continue;
                }
                ++checked;
                if (*c->algorithm != want) {
                    ++wrong;
                    if (first_wrong.empty()) first_wrong = l.name + " got " + c->algorithm->tag();
                }
            }
    }
    return {wrong == 0 && checked > 0,
            fmt::format("{} module convs checked, {} mismatches{}", checked, wrong,
                        first_wrong.empty() ? "" : " (" + first_wrong + ")")};
}

Outcome quantization_error() {
    const NetworkSpec net = load_network(kFixtures + "/toy.net");
    double worst16 = 0.0, worst8 = 0.0;
    bool ordered = true;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const WeightArchive w = random_weights(net, seed);
        const Tensor x = random_input(net.input, 1000 + seed);
        const auto f = run_network(net, w, x);
        ExecutorOptions o16, o8;
        o16.precision = DType::fix16;
        o8.precision = DType::fix8;
        const double e16 = verify_pair(run_network(net, w, x, o16), f).distance;
        const double e8 = verify_pair(run_network(net, w, x, o8), f).distance;
        worst16 = std::max(worst16, e16);
        worst8 = std::max(worst8, e8);
        ordered = ordered && e16 < e8;
    }
    return {worst16 < 1e-2 && worst8 < 1.0 && ordered,
            fmt::format("20 seeds: worst fix16 L2^2 {:.3e}, worst fix8 L2^2 {:.3e}, fix16 < fix8 on every seed: {}",
                        worst16, worst8, ordered ? "yes" : "no")};
}

Outcome op_count_reduction() {
    const NetworkSpec net = load_network(kFixtures + "/toy.net");
    Executor ex(net, random_weights(net, 1));
    ex.run(random_input(net.input, 2));
    double worst = 1e300;
    int layers = 0;
    for (const auto& s : ex.stats()) {
        if (s.algo.kind != Algorithm::winograd) continue;
        const auto* l = net.layers()[static_cast<std::size_t>(&s - ex.stats().data())];
        if (l->conv()->kernel != 3) continue;
        ++layers;
        worst = std::min(worst, s.reduction());
    }
    return {layers > 0 && worst >= 2.0,
            fmt::format("{} 3x3 Winograd layers in the toy network, smallest --stats reduction {:.3f}x", layers, worst)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle equivalence over the characterization grid", oracle_equivalence},
        {"Winograd multiplication counts", winograd_counts},
        {"Cook-Toom 1D identity", cook_toom},
        {"FFT operation count and theoretical speedup", fft_counts},
        {"characterize reproduces the decision table", decision_table_cli},
        {"FFT padding rule", padding_rule},
        {"allocator traces and invariants", allocator},
        {"Inception V2 planner mapping", planner_fixture},
        {"fixed-point embedding error", quantization_error},
        {"--stats multiplication reduction", op_count_reduction},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << fmt::format("criterion {:>2}: {} - {}: {}", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                                 o.detail)
                  << std::endl;
    }
    std::cout << fmt::format("{}/{} criteria passed", criteria.size() - static_cast<std::size_t>(failures),
                             criteria.size())
              << std::endl;
    return failures == 0 ? 0 : 1;
}
