#include "hconv/cli.hpp"

#include "hconv/costmodel.hpp"
#include "hconv/error.hpp"
#include "hconv/executor.hpp"
#include "hconv/planner.hpp"
#include "hconv/tensor_io.hpp"
#include "hconv/weights.hpp"
#include "hconv/winograd.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>

namespace hconv {

namespace {

struct CostFlags {
    std::optional<double> mult, add, lambda;

    void attach(CLI::App* app) {
        app->add_option("--w-mult", mult, "cost of one multiplication (env HCONV_W_MULT)");
        app->add_option("--w-add", add, "cost of one addition or transform op (env HCONV_W_ADD)");
        app->add_option("--lambda", lambda, "FFT penalty off the decision grid (env HCONV_LAMBDA)");
    }

    static std::optional<double> from_env(const char* name) {
        const char* raw = std::getenv(name);
        if (!raw || !*raw) return std::nullopt;
        const std::string_view v(raw);
        double d = 0.0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
        if (ec != std::errc{} || p != v.data() + v.size()) {
            throw ValidationError(std::string(name) + " is not a number: " + raw);
        }
        return d;
    }

    // flags win over the environment, which wins over the defaults
    CostWeights resolve() const {
        CostWeights w;
        if (auto e = from_env("HCONV_W_MULT")) w.mult = *e;
        if (auto e = from_env("HCONV_W_ADD")) w.add = *e;
        if (auto e = from_env("HCONV_LAMBDA")) w.fft_penalty = *e;
        if (mult) w.mult = *mult;
        if (add) w.add = *add;
        if (lambda) w.fft_penalty = *lambda;
        w.validate();
        return w;
    }
};

DType parse_mode(const std::string& mode) {
    if (mode == "float") return DType::float64;
    if (mode == "fix16") return DType::fix16;
    if (mode == "fix8") return DType::fix8;
    throw ValidationError("unknown mode '" + mode + "' (float, fix16, fix8)");
}

std::ofstream open_text(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    return f;
}

Tensor embedding_tensor(const std::vector<double>& e) {
    return Tensor::from_values({e.size(), 1, 1}, e);
}

void print_matrix(std::ostream& out, const char* label, const RationalMatrix& m) {
    out << label << " (" << m.rows() << "x" << m.cols() << ")\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? " " : "  ") << fmt::format("{:>6}", m(i, j).str());
        out << "\n";
    }
    const auto d = m.to_doubles();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? " " : "  ") << fmt::format("{:>10.6f}", d[i * m.cols() + j]);
        out << "\n";
    }
}

void print_stats(std::ostream& out, const Executor& ex) {
    out << fmt::format("{:<24} {:<10} {:>14} {:>14} {:>9} {:>8} {:>6}\n", "layer", "algo", "mults", "direct_mults",
                       "reduction", "tiles", "iffts");
    std::uint64_t total = 0, total_direct = 0;
    for (const auto& s : ex.stats()) {
        if (s.direct_mults == 0) continue;
        out << fmt::format("{:<24} {:<10} {:>14} {:>14} {:>9.3f} {:>8} {:>6}\n", s.name, s.algo.tag(),
                           s.exec.multiplications, s.direct_mults, s.reduction(), s.exec.tiles, s.exec.inverse_ffts);
        total += s.exec.multiplications;
        total_direct += s.direct_mults;
    }
    out << fmt::format("{:<24} {:<10} {:>14} {:>14} {:>9.3f}\n", "total", "", total, total_direct,
                       total ? static_cast<double>(total_direct) / static_cast<double>(total) : 0.0);
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hybrid Winograd/FFT convolution engine and planner", "hconv"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    auto versioned = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->set_version_flag("--version", kVersion);
        return sub;
    };

    // characterize
    std::string grid_arg = "default", out_path;
    bool bench = false;
    CostFlags char_costs;
    auto* characterize_cmd = versioned("characterize", "cost table and algorithm selection over a grid");
    characterize_cmd->add_option("--grid", grid_arg, "'default' or a file of 'Q fm L K' lines");
    characterize_cmd->add_flag("--bench", bench, "also time each engine once");
    characterize_cmd->add_option("--out", out_path, "CSV output")->required();
    char_costs.attach(characterize_cmd);

    // plan
    std::string net_path;
    double resources = 0.0;
    CostFlags plan_costs;
    auto* plan_cmd = versioned("plan", "per-layer algorithms and resource allocation");
    plan_cmd->add_option("--net", net_path, "network descriptor")->required();
    plan_cmd->add_option("--resources", resources, "total resource units")->required();
    plan_cmd->add_option("--out", out_path, "plan output")->required();
    plan_costs.attach(plan_cmd);

    // run
    std::string weights_path, input_path, mode = "float", plan_path;
    bool stats = false, force_direct = false;
    CostFlags run_costs;
    auto* run_cmd = versioned("run", "end-to-end inference to an embedding");
    run_cmd->add_option("--net", net_path, "network descriptor")->required();
    run_cmd->add_option("--weights", weights_path, "weight archive")->required();
    run_cmd->add_option("--input", input_path, "input tensor")->required();
    run_cmd->add_option("--mode", mode, "float, fix16 or fix8")->check(CLI::IsMember({"float", "fix16", "fix8"}));
    run_cmd->add_option("--plan", plan_path, "plan fixing each conv's algorithm");
    run_cmd->add_flag("--stats", stats, "print per-layer multiplication counts");
    run_cmd->add_flag("--force-direct", force_direct, "run every conv with the direct engine");
    run_cmd->add_option("--out", out_path, "embedding output (HCT1, 128x1x1)")->required();
    run_costs.attach(run_cmd);

    // verify
    std::string a_path, b_path;
    double threshold = 1.0;
    auto* verify_cmd = versioned("verify", "squared-L2 comparison of two embeddings");
    verify_cmd->add_option("--a", a_path, "first embedding")->required();
    verify_cmd->add_option("--b", b_path, "second embedding")->required();
    verify_cmd->add_option("--threshold", threshold, "same identity below this distance");

    // gen-transforms
    int m = 2, r = 3;
    auto* gen_cmd = versioned("gen-transforms", "print Cook-Toom A, G, B for F(m, r)");
    gen_cmd->add_option("--m", m, "output tile size")->required();
    gen_cmd->add_option("--r", r, "kernel size")->required();

    // rand-weights / rand-input
    std::uint64_t seed = 0;
    auto* rw_cmd = versioned("rand-weights", "seeded random weight archive for a network");
    rw_cmd->add_option("--net", net_path, "network descriptor")->required();
    rw_cmd->add_option("--seed", seed, "generator seed")->required();
    rw_cmd->add_option("--out", out_path, "archive output")->required();

    auto* ri_cmd = versioned("rand-input", "seeded random input tensor for a network");
    ri_cmd->add_option("--net", net_path, "network descriptor")->required();
    ri_cmd->add_option("--seed", seed, "generator seed")->required();
    ri_cmd->add_option("--out", out_path, "tensor output")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (characterize_cmd->parsed()) {
            const CostWeights w = char_costs.resolve();
            std::vector<GridPoint> grid;
            if (grid_arg == "default") {
                grid = default_grid();
            } else {
                std::ifstream in(grid_arg);
                if (!in) throw IoError("cannot open grid file " + grid_arg);
                grid = read_grid(in);
            }
            const auto rows = characterize(grid, w, bench);
            auto f = open_text(out_path);
            write_characterization_csv(f, rows);
            if (!f) throw IoError("failed writing " + out_path);
        } else if (plan_cmd->parsed()) {
            const CostWeights w = plan_costs.resolve();
            const NetworkSpec net = load_network(net_path);
            const NetworkPlan plan = make_plan(net, resources, w);
            auto f = open_text(out_path);
            write_plan(f, plan);
        } else if (run_cmd->parsed()) {
            ExecutorOptions opts;
            opts.costs = run_costs.resolve();
            opts.precision = parse_mode(mode);
            opts.force_direct = force_direct;
            NetworkSpec net = load_network(net_path);
            if (!plan_path.empty()) {
                std::ifstream in(plan_path);
                if (!in) throw IoError("cannot open plan " + plan_path);
                apply_plan(net, read_plan(in));
            }
            const WeightArchive weights = load_archive(weights_path);
            const Tensor input = read_tensor(input_path);
            Executor ex(net, weights, opts);
            const auto embedding = ex.run(input);
            write_tensor(out_path, embedding_tensor(embedding));
            if (stats) print_stats(out, ex);
        } else if (verify_cmd->parsed()) {
            const Tensor a = read_tensor(a_path);
            const Tensor b = read_tensor(b_path);
            const Verdict v = verify_pair(a.to_doubles(), b.to_doubles(), threshold);
            out << fmt::format("distance {}\n{}\n", v.distance, v.same ? "same" : "different");
        } else if (gen_cmd->parsed()) {
            if (m < 2 || r < 2) throw ValidationError("gen-transforms needs m >= 2 and r >= 2");
            const WinogradPlan plan = cook_toom_generate(m, r);
            out << plan.name() << ": tile " << plan.tile() << ", " << plan.mults_per_tile_1d()
                << " multiplications per 1D tile, " << plan.mults_per_tile_2d() << " per 2D tile\n";
            out << "nodes:";
            for (const auto& n : plan.nodes) out << " " << n.str();
            out << " inf\n";
            print_matrix(out, "A", plan.A);
            print_matrix(out, "G", plan.G);
            print_matrix(out, "B", plan.B);
        } else if (rw_cmd->parsed()) {
            save_archive(out_path, random_weights(load_network(net_path), seed));
        } else if (ri_cmd->parsed()) {
            write_tensor(out_path, random_input(load_network(net_path).input, seed));
        }
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace hconv
