#include "hconv/network.hpp"

#include "hconv/error.hpp"
#include "hconv/reference.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hconv {

ConvShape LayerSpec::conv_shape() const {
    const auto* c = conv();
    if (!c) throw ValidationError("layer " + name + " is not a convolution");
    return {input.channels, c->out_channels, input.height, c->kernel, c->stride, c->pad};
}

std::string_view LayerSpec::kind() const noexcept {
    switch (op.index()) {
    case 0: return "conv";
    case 1: return std::get<PoolSpec>(op).kind == PoolKind::max ? "maxpool" : "avgpool";
    case 2: return "bn";
    default: return "relu";
    }
}

Shape3 NetworkSpec::feature_shape() const {
    if (stages.empty()) return input;
    return std::visit([](const auto& s) { return s.output; }, stages.back());
}

const ModuleSpec* NetworkSpec::find_module(std::string_view module) const noexcept {
    for (const auto& s : stages) {
        if (const auto* m = std::get_if<ModuleSpec>(&s); m && m->name == module) return m;
    }
    return nullptr;
}

std::vector<const LayerSpec*> NetworkSpec::layers() const {
    std::vector<const LayerSpec*> out;
    for (const auto& s : stages) {
        if (const auto* l = std::get_if<LayerSpec>(&s)) {
            out.push_back(l);
            continue;
        }
        for (const auto& b : std::get<ModuleSpec>(s).branches)
            for (const auto& l : b.layers) out.push_back(&l);
    }
    return out;
}

std::vector<LayerSpec*> NetworkSpec::layers() {
    std::vector<LayerSpec*> out;
    for (auto& s : stages) {
        if (auto* l = std::get_if<LayerSpec>(&s)) {
            out.push_back(l);
            continue;
        }
        for (auto& b : std::get<ModuleSpec>(s).branches)
            for (auto& l : b.layers) out.push_back(&l);
    }
    return out;
}

namespace {

struct Token {
    std::string text;
    int line = 0;
};

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    int line = 1;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            ++line;
            ++i;
        } else if (c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '{' || c == '}' || c == ';') {
            tokens.push_back({std::string(1, c), line});
            ++i;
        } else {
            const std::size_t start = i;
            while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) && text[i] != '{' &&
                   text[i] != '}' && text[i] != ';' && text[i] != '#') {
                ++i;
            }
            tokens.push_back({std::string(text.substr(start, i - start)), line});
        }
    }
    return tokens;
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    NetworkSpec parse() {
        NetworkSpec net;
        expect("net");
        net.name = take_name("network name");
        expect("{");
        skip_separators();

        const int input_line = peek_line();
        expect("input");
        auto kv = take_keys({"c", "s"}, {"c", "s"});
        net.input = {kv.at("c"), kv.at("s"), kv.at("s")};
        if (net.input.size() == 0) throw SyntaxError(input_line, "input dimensions must be positive");

        std::set<std::string> module_names;
        std::size_t index = 0;
        for (skip_separators(); !at("}"); skip_separators()) {
            if (at_end()) throw SyntaxError(last_line(), "unexpected end of descriptor, missing '}'");
            if (at("fc")) {
                net.tail = parse_tail();
                skip_separators();
                break;
            }
            if (at("module")) {
                auto m = parse_module();
                if (!module_names.insert(m.name).second) {
                    throw SyntaxError(m.line, "duplicate module name '" + m.name + "'");
                }
                net.stages.emplace_back(std::move(m));
            } else {
                net.stages.emplace_back(parse_layer("L" + std::to_string(index)));
            }
            ++index;
        }
        expect("}");
        if (!at_end()) throw SyntaxError(peek_line(), "trailing text after network body");
        return net;
    }

private:
    bool at_end() const { return pos_ >= tokens_.size(); }
    bool at(std::string_view s) const { return !at_end() && tokens_[pos_].text == s; }
    int peek_line() const { return at_end() ? last_line() : tokens_[pos_].line; }
    int last_line() const { return tokens_.empty() ? 1 : tokens_.back().line; }

    void skip_separators() {
        while (at(";")) ++pos_;
    }

    void expect(std::string_view s) {
        if (!at(s)) {
            throw SyntaxError(peek_line(), "expected '" + std::string(s) + "'" +
                                               (at_end() ? std::string(" at end of input")
                                                         : ", found '" + tokens_[pos_].text + "'"));
        }
        ++pos_;
    }

    std::string take_name(const char* what) {
        if (at_end() || at("{") || at("}") || at(";")) throw SyntaxError(peek_line(), std::string("expected ") + what);
        return tokens_[pos_++].text;
    }

    // key=value words up to the end of the statement
    std::map<std::string, std::string> take_pairs(const std::set<std::string>& allowed) {
        std::map<std::string, std::string> out;
        // a word without '=' starts the next statement, so ';' between statements is optional
        while (!at_end() && tokens_[pos_].text.find('=') != std::string::npos) {
            const Token& tok = tokens_[pos_++];
            const auto eq = tok.text.find('=');
            if (eq == 0 || eq + 1 == tok.text.size()) {
                throw SyntaxError(tok.line, "expected key=value, found '" + tok.text + "'");
            }
            auto key = tok.text.substr(0, eq);
            if (!allowed.count(key)) throw SyntaxError(tok.line, "unknown key '" + key + "'");
            if (!out.emplace(key, tok.text.substr(eq + 1)).second) throw SyntaxError(tok.line, "repeated key '" + key + "'");
        }
        return out;
    }

    std::map<std::string, std::size_t> take_keys(const std::set<std::string>& allowed,
                                                 const std::set<std::string>& required) {
        const int line = peek_line();
        auto pairs = take_pairs(allowed);
        std::map<std::string, std::size_t> out;
        for (const auto& [k, v] : pairs) {
            std::size_t value = 0;
            auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
            if (ec != std::errc{} || ptr != v.data() + v.size()) {
                throw SyntaxError(line, "value of '" + k + "' must be a non-negative integer");
            }
            out[k] = value;
        }
        for (const auto& k : required) {
            if (!out.count(k)) throw SyntaxError(line, "missing required key '" + k + "'");
        }
        return out;
    }

    LayerSpec parse_layer(std::string name) {
        LayerSpec layer;
        layer.name = std::move(name);
        layer.line = peek_line();
        const std::string word = take_name("statement");

        if (word == "conv") {
            const int line = layer.line;
            auto pairs = take_pairs({"k", "out", "stride", "pad", "alg"});
            ConvSpec c;
            if (auto it = pairs.find("alg"); it != pairs.end()) {
                if (it->second != "auto") {
                    try {
                        c.algorithm = AlgoChoice::parse(it->second);
                    } catch (const ValidationError&) {
                        throw SyntaxError(line, "unknown algorithm '" + it->second + "'");
                    }
                }
                pairs.erase(it);
            }
            auto num = [&](const char* key, std::optional<std::size_t> fallback) -> std::size_t {
                auto it = pairs.find(key);
                if (it == pairs.end()) {
                    if (!fallback) throw SyntaxError(line, std::string("missing required key '") + key + "'");
                    return *fallback;
                }
                std::size_t v = 0;
                auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
                if (ec != std::errc{} || ptr != it->second.data() + it->second.size()) {
                    throw SyntaxError(line, std::string("value of '") + key + "' must be a non-negative integer");
                }
                return v;
            };
            c.kernel = num("k", std::nullopt);
            c.out_channels = num("out", std::nullopt);
            c.stride = num("stride", 1);
            c.pad = num("pad", c.kernel > 0 ? same_pad(c.kernel) : 0);
            if (c.kernel == 0 || c.out_channels == 0 || c.stride == 0) {
                throw SyntaxError(line, "conv k, out and stride must be positive");
            }
            layer.op = c;
        } else if (word == "pool") {
            PoolSpec p;
            const std::string kind = take_name("pool kind");
            if (kind == "max") {
                p.kind = PoolKind::max;
            } else if (kind == "avg") {
                p.kind = PoolKind::avg;
            } else {
                throw SyntaxError(layer.line, "pool kind must be max or avg, found '" + kind + "'");
            }
            auto kv = take_keys({"k", "stride", "pad"}, {"k", "stride"});
            p.window = kv.at("k");
            p.stride = kv.at("stride");
            p.pad = kv.count("pad") ? kv.at("pad") : 0;
            if (p.window == 0 || p.stride == 0) throw SyntaxError(layer.line, "pool k and stride must be positive");
            layer.op = p;
        } else if (word == "bn") {
            take_keys({}, {});
            layer.op = BnSpec{};
        } else if (word == "relu") {
            take_keys({}, {});
            layer.op = ReluSpec{};
        } else {
            throw SyntaxError(layer.line, "unknown statement '" + word + "'");
        }
        return layer;
    }

    ModuleSpec parse_module() {
        ModuleSpec m;
        m.line = peek_line();
        expect("module");
        m.name = take_name("module name");
        expect("{");
        for (skip_separators(); !at("}"); skip_separators()) {
            if (at_end()) throw SyntaxError(last_line(), "unterminated module '" + m.name + "'");
            expect("branch");
            expect("{");
            BranchSpec b;
            const std::string prefix = m.name + "/b" + std::to_string(m.branches.size()) + "/L";
            for (skip_separators(); !at("}"); skip_separators()) {
                if (at_end()) throw SyntaxError(last_line(), "unterminated branch in module '" + m.name + "'");
                if (at("module")) throw SyntaxError(peek_line(), "modules do not nest");
                b.layers.push_back(parse_layer(prefix + std::to_string(b.layers.size())));
            }
            expect("}");
            m.branches.push_back(std::move(b));
        }
        expect("}");
        if (m.branches.empty()) throw SyntaxError(m.line, "module '" + m.name + "' has no branches");
        m.unroll.assign(m.branches.size(), 1);
        return m;
    }

    TailSpec parse_tail() {
        const int line = peek_line();
        expect("fc");
        auto kv = take_keys({"out"}, {"out"});
        if (kv.at("out") != 128) throw SyntaxError(line, "the embedding width must be 128");
        skip_separators();
        expect("l2norm");
        take_keys({}, {});
        TailSpec t;
        t.embedding = kv.at("out");
        return t;
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

[[noreturn]] void fail(const LayerSpec& layer, const std::string& what) {
    throw ValidationError("line " + std::to_string(layer.line) + ": " + layer.name + ": " + what);
}

// Fills input/output shapes and checks every layer against its input.
Shape3 resolve_layer(LayerSpec& layer, Shape3 in) {
    layer.input = in;
    if (in.height != in.width) fail(layer, "feature maps must be square");
    if (auto* c = layer.conv()) {
        const ConvShape shape = layer.conv_shape();
        if (c->kernel > shape.padded_size()) {
            fail(layer, "kernel " + std::to_string(c->kernel) + " exceeds padded input " + std::to_string(shape.padded_size()));
        }
        if (c->algorithm) {
            try {
                require_applicable(shape, *c->algorithm);
            } catch (const UnsupportedAlgorithm& e) {
                fail(layer, std::string(e.what()) + " (fast methods do not support strided convolution)");
            }
        }
        layer.output = shape.output_shape();
    } else if (const auto* p = std::get_if<PoolSpec>(&layer.op)) {
        if (p->window > in.height + 2 * p->pad) fail(layer, "pool window exceeds padded input");
        const std::size_t o = reference::window_output(in.height, p->window, p->stride, p->pad);
        layer.output = {in.channels, o, o};
    } else {
        layer.output = in;
    }
    return layer.output;
}

void resolve(NetworkSpec& net) {
    Shape3 cur = net.input;
    for (auto& stage : net.stages) {
        if (auto* layer = std::get_if<LayerSpec>(&stage)) {
            cur = resolve_layer(*layer, cur);
            continue;
        }
        auto& m = std::get<ModuleSpec>(stage);
        m.input = cur;
        std::size_t channels = 0;
        for (std::size_t bi = 0; bi < m.branches.size(); ++bi) {
            auto& b = m.branches[bi];
            Shape3 s = cur;
            for (auto& l : b.layers) s = resolve_layer(l, s);
            b.output = s;
            const auto& first = m.branches.front().output;
            if (s.height != first.height || s.width != first.width) {
                throw ValidationError("line " + std::to_string(m.line) + ": module " + m.name + ": branch " +
                                      std::to_string(bi) + " ends at " + std::to_string(s.height) + "x" +
                                      std::to_string(s.width) + " but branch 0 ends at " +
                                      std::to_string(first.height) + "x" + std::to_string(first.width));
            }
            channels += s.channels;
        }
        m.output = {channels, m.branches.front().output.height, m.branches.front().output.width};
        cur = m.output;
    }
    if (net.tail) net.tail->input = cur;
}

}  // namespace

NetworkSpec parse_network(std::string_view text) {
    Parser parser(tokenize(text));
    NetworkSpec net = parser.parse();
    resolve(net);
    return net;
}

NetworkSpec load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open network descriptor " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_network(ss.str());
}

AlgoChoice effective_algorithm(const LayerSpec& layer, const CostWeights& weights) {
    const auto* c = layer.conv();
    if (!c) throw ValidationError("layer " + layer.name + " is not a convolution");
    return c->algorithm ? *c->algorithm : choose_algorithm(layer.conv_shape(), weights);
}

void resolve_algorithms(NetworkSpec& net, const CostWeights& weights) {
    for (auto* layer : net.layers()) {
        if (auto* c = layer->conv(); c && !c->algorithm) c->algorithm = choose_algorithm(layer->conv_shape(), weights);
    }
}

}  // namespace hconv
