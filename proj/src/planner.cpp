#include "hconv/planner.hpp"

#include "hconv/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace hconv {

std::map<std::string, AlgoChoice> NetworkPlan::algorithms() const {
    std::map<std::string, AlgoChoice> out;
    for (const auto& c : convs) out.emplace(c.layer, c.algo);
    return out;
}

double layer_complexity(const LayerSpec& layer, AlgoChoice algo, const CostWeights& w) {
    if (layer.conv()) return cost_of(layer.conv_shape(), algo, w).weighted_cost;
    const double out_elems = static_cast<double>(layer.output.size());
    if (const auto* p = std::get_if<PoolSpec>(&layer.op)) {
        return w.add * out_elems * static_cast<double>(p->window * p->window);
    }
    if (std::holds_alternative<BnSpec>(layer.op)) return (w.mult + w.add) * out_elems;
    return w.add * out_elems;
}

namespace {

double add_layer(const LayerSpec& layer, const CostWeights& w, NetworkPlan& plan, std::string& tags) {
    AlgoChoice algo;
    if (layer.conv()) {
        algo = effective_algorithm(layer, w);
        const double cost = layer_complexity(layer, algo, w);
        plan.convs.push_back({layer.name, algo, cost});
        if (!tags.empty()) tags += ',';
        tags += algo.tag();
        return cost;
    }
    return layer_complexity(layer, algo, w);
}

}  // namespace

NetworkPlan make_plan(const NetworkSpec& net, double resources, const CostWeights& w) {
    w.validate();
    if (!(resources > 0.0)) throw ValidationError("resource total must be positive");
    NetworkPlan plan;
    plan.net = net.name;
    plan.resources = resources;

    for (const auto& stage : net.stages) {
        StagePlan sp;
        if (const auto* layer = std::get_if<LayerSpec>(&stage)) {
            sp.name = layer->name;
            std::string tags;
            sp.complexity = add_layer(*layer, w, plan, tags);
        } else {
            const auto& m = std::get<ModuleSpec>(stage);
            sp.name = m.name;
            sp.is_module = true;
            std::vector<double> branch_costs;
            for (const auto& b : m.branches) {
                std::string tags;
                double c = 0.0;
                for (const auto& l : b.layers) c += add_layer(l, w, plan, tags);
                // a branch of pure pass-through layers would otherwise cost nothing
                branch_costs.push_back(c > 0.0 ? c : 1.0);
                sp.branch_algorithms.push_back(tags.empty() ? "-" : tags);
            }
            for (double c : branch_costs) sp.complexity += c;
            sp.allocation.branches.resize(branch_costs.size());
            for (std::size_t i = 0; i < branch_costs.size(); ++i) sp.allocation.branches[i].complexity = branch_costs[i];
        }
        plan.stages.push_back(std::move(sp));
    }
    if (plan.stages.empty()) return plan;

    std::vector<double> complexities;
    for (const auto& s : plan.stages) complexities.push_back(s.complexity > 0.0 ? s.complexity : 1.0);
    const auto shares = interlayer_partition(complexities, resources);
    for (std::size_t i = 0; i < plan.stages.size(); ++i) {
        auto& s = plan.stages[i];
        s.share = shares[i];
        if (!s.is_module) continue;
        std::vector<double> costs;
        for (const auto& b : s.allocation.branches) costs.push_back(b.complexity);
        const auto n = static_cast<double>(costs.size());
        s.raised = s.share < n;
        s.module_total = s.raised ? n : s.share;
        s.allocation = branch_allocate(costs, s.module_total);
    }
    return plan;
}

void write_plan(std::ostream& out, const NetworkPlan& plan) {
    out << "hconv-plan 1\n";
    out << fmt::format("net {}\n", plan.net);
    out << fmt::format("resources {}\n", plan.resources);
    for (const auto& c : plan.convs) out << fmt::format("conv {} alg={} cost={}\n", c.layer, c.algo.tag(), c.cost);
    for (const auto& s : plan.stages) {
        out << fmt::format("stage {} module={} complexity={} share={}\n", s.name, s.is_module ? 1 : 0, s.complexity,
                           s.share);
        if (!s.is_module) continue;
        for (std::size_t i = 0; i < s.allocation.branches.size(); ++i) {
            const auto& b = s.allocation.branches[i];
            out << fmt::format("branch {} {} alg={} complexity={} ideal={} realized={}\n", s.name, i,
                               s.branch_algorithms.at(i), b.complexity, b.ideal, b.realized);
        }
        out << fmt::format("module {} total={} raised={} clamped={} ideal_sum={} realized_sum={} latency={}\n", s.name,
                           s.module_total, s.raised ? 1 : 0, s.allocation.clamped ? 1 : 0, s.allocation.ideal_sum,
                           s.allocation.realized_sum, s.allocation.estimated_latency());
    }
    if (!out) throw IoError("failed writing plan");
}

namespace {

double parse_real(const std::string& v, int line, const std::string& what) {
    double d = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
    if (ec != std::errc{} || p != v.data() + v.size()) throw SyntaxError(line, "bad number for " + what);
    return d;
}

struct Fields {
    int line = 0;
    std::vector<std::string> words;
    std::map<std::string, std::string> keys;

    const std::string& key(const std::string& k) const {
        auto it = keys.find(k);
        if (it == keys.end()) throw SyntaxError(line, "missing " + k + "=");
        return it->second;
    }
    double real(const std::string& k) const { return parse_real(key(k), line, k); }
    std::uint64_t count(const std::string& k) const {
        const auto& v = key(k);
        std::uint64_t n = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
        if (ec != std::errc{} || p != v.data() + v.size()) throw SyntaxError(line, "bad count for " + k);
        return n;
    }
    bool flag(const std::string& k) const {
        const auto n = count(k);
        if (n > 1) throw SyntaxError(line, k + " must be 0 or 1");
        return n == 1;
    }
};

Fields split(const std::string& text, int line) {
    Fields f;
    f.line = line;
    std::istringstream ss(text);
    std::string w;
    while (ss >> w) {
        const auto eq = w.find('=');
        if (eq == std::string::npos) {
            if (!f.keys.empty()) throw SyntaxError(line, "positional word after key=value: " + w);
            f.words.push_back(w);
        } else {
            f.keys[w.substr(0, eq)] = w.substr(eq + 1);
        }
    }
    return f;
}

}  // namespace

NetworkPlan read_plan(std::istream& in) {
    NetworkPlan plan;
    std::string text;
    int line = 0;
    bool header = false;
    while (std::getline(in, text)) {
        ++line;
        const Fields f = split(text, line);
        if (f.words.empty()) continue;
        const std::string& head = f.words[0];
        if (!header) {
            if (head != "hconv-plan" || f.words.size() != 2 || f.words[1] != "1") {
                throw SyntaxError(line, "expected 'hconv-plan 1'");
            }
            header = true;
            continue;
        }
        auto need = [&](std::size_t n) {
            if (f.words.size() != n) throw SyntaxError(line, "wrong number of fields for '" + head + "'");
        };
        if (head == "net") {
            need(2);
            plan.net = f.words[1];
        } else if (head == "resources") {
            need(2);
            plan.resources = parse_real(f.words[1], line, "resources");
        } else if (head == "conv") {
            need(2);
            AlgoChoice algo;
            try {
                algo = AlgoChoice::parse(f.key("alg"));
            } catch (const SyntaxError&) {
                throw;
            } catch (const ValidationError& e) {
                throw SyntaxError(line, e.what());
            }
            plan.convs.push_back({f.words[1], algo, f.real("cost")});
        } else if (head == "stage") {
            need(2);
            StagePlan s;
            s.name = f.words[1];
            s.is_module = f.flag("module");
            s.complexity = f.real("complexity");
            s.share = f.real("share");
            plan.stages.push_back(std::move(s));
        } else if (head == "branch") {
            need(3);
            if (plan.stages.empty() || plan.stages.back().name != f.words[1] || !plan.stages.back().is_module) {
                throw SyntaxError(line, "branch outside its module stage");
            }
            auto& s = plan.stages.back();
            if (f.words[2] != std::to_string(s.allocation.branches.size())) {
                throw SyntaxError(line, "branches must be listed in order");
            }
            BranchShare b;
            b.complexity = f.real("complexity");
            b.ideal = f.real("ideal");
            b.realized = f.count("realized");
            if (b.realized == 0 || (b.realized & (b.realized - 1)) != 0) {
                throw SyntaxError(line, "realized share must be a power of two");
            }
            b.gap = b.ideal - static_cast<double>(b.realized);
            s.allocation.branches.push_back(b);
            s.branch_algorithms.push_back(f.key("alg"));
        } else if (head == "module") {
            need(2);
            if (plan.stages.empty() || plan.stages.back().name != f.words[1] || !plan.stages.back().is_module) {
                throw SyntaxError(line, "module summary outside its stage");
            }
            auto& s = plan.stages.back();
            s.module_total = f.real("total");
            s.raised = f.flag("raised");
            s.allocation.total = s.module_total;
            s.allocation.clamped = f.flag("clamped");
            s.allocation.ideal_sum = f.real("ideal_sum");
            s.allocation.realized_sum = f.count("realized_sum");
        } else {
            throw SyntaxError(line, "unknown plan entry '" + head + "'");
        }
    }
    if (!header) throw SyntaxError(line == 0 ? 1 : line, "empty plan");
    return plan;
}

void apply_plan(NetworkSpec& net, const NetworkPlan& plan) {
    if (plan.net != net.name) throw ValidationError("plan is for network '" + plan.net + "', not '" + net.name + "'");
    const auto algos = plan.algorithms();
    std::set<std::string> used;
    for (auto* layer : net.layers()) {
        auto* c = layer->conv();
        if (!c) continue;
        auto it = algos.find(layer->name);
        if (it == algos.end()) throw ValidationError("plan has no entry for conv " + layer->name);
        try {
            require_applicable(layer->conv_shape(), it->second);
        } catch (const UnsupportedAlgorithm& e) {
            throw ValidationError("plan entry for " + layer->name + ": " + e.what());
        }
        c->algorithm = it->second;
        used.insert(layer->name);
    }
    if (used.size() != algos.size()) throw ValidationError("plan names convs that are not in the network");
    for (auto& stage : net.stages) {
        auto* m = std::get_if<ModuleSpec>(&stage);
        if (!m) continue;
        for (const auto& s : plan.stages) {
            if (!s.is_module || s.name != m->name) continue;
            if (s.allocation.branches.size() != m->branches.size()) {
                throw ValidationError("plan for module " + m->name + " has the wrong branch count");
            }
            for (std::size_t i = 0; i < m->branches.size(); ++i) m->unroll[i] = s.allocation.branches[i].realized;
        }
    }
}

}  // namespace hconv
