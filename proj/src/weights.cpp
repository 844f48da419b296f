#include "hconv/weights.hpp"

#include "hconv/error.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace hconv {

namespace {

// Names longer than this are treated as corruption rather than allocated.
constexpr std::uint32_t kMaxName = 4096;

void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b.data(), 4);
}

}  // namespace

void write_archive(std::ostream& out, const WeightArchive& archive) {
    for (const auto& [name, tensor] : archive) {
        if (name.size() > kMaxName) throw ValidationError("archive key too long: " + name);
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        std::visit([&](const auto& t) { write_record(out, t); }, tensor);
    }
    if (!out) throw IoError("failed writing weight archive");
}

WeightArchive read_archive(std::istream& in) {
    WeightArchive archive;
    while (true) {
        std::array<unsigned char, 4> b{};
        in.read(reinterpret_cast<char*>(b.data()), 4);
        if (in.gcount() == 0 && in.eof()) break;
        if (in.gcount() != 4) throw FormatError(FormatErrorKind::truncated, "truncated archive entry header");
        const std::uint32_t len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
        if (len == 0 || len > kMaxName) throw FormatError(FormatErrorKind::bad_header, "invalid archive key length");
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (in.gcount() != static_cast<std::streamsize>(len)) {
            throw FormatError(FormatErrorKind::truncated, "truncated archive key");
        }
        auto record = read_record(in);
        if (!archive.emplace(name, std::move(record)).second) {
            throw FormatError(FormatErrorKind::bad_header, "duplicate archive key " + name);
        }
    }
    return archive;
}

void save_archive(const std::filesystem::path& path, const WeightArchive& archive) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_archive(out, archive);
}

WeightArchive load_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open weight archive " + path.string());
    return read_archive(in);
}

const WeightTensor& archive_weights(const WeightArchive& archive, const std::string& key) {
    auto it = archive.find(key);
    if (it == archive.end()) throw ValidationError("missing weights: " + key);
    const auto* w = std::get_if<WeightTensor>(&it->second);
    if (!w) throw ValidationError(key + " must be a 4-d weight record");
    return *w;
}

std::vector<double> archive_vector(const WeightArchive& archive, const std::string& key, std::size_t expected) {
    auto it = archive.find(key);
    if (it == archive.end()) throw ValidationError("missing weights: " + key);
    std::vector<double> v = std::visit([](const auto& t) { return t.to_doubles(); }, it->second);
    if (v.size() != expected) {
        throw ValidationError(key + " has " + std::to_string(v.size()) + " values, expected " + std::to_string(expected));
    }
    return v;
}

Uniform::Uniform(std::uint64_t seed) : engine_(seed) {}

double Uniform::next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

namespace {

Tensor vector_record(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor::from_values({n, 1, 1}, std::move(v));
}

void add_layer(WeightArchive& archive, const LayerSpec& layer, Uniform& rng) {
    if (const auto* c = layer.conv()) {
        const KernelShape ks{c->out_channels, layer.input.channels, c->kernel};
        const double fan_in = static_cast<double>(ks.in_channels * ks.kernel * ks.kernel);
        const double bound = std::sqrt(3.0 / fan_in);
        std::vector<double> w(ks.size());
        for (auto& v : w) v = rng.next(-bound, bound);
        std::vector<double> b(ks.out_channels);
        for (auto& v : b) v = rng.next(-0.1, 0.1);
        archive.emplace(layer.name + ".weight", WeightTensor::from_values(ks, std::move(w)));
        archive.emplace(layer.name + ".bias", vector_record(std::move(b)));
    } else if (std::holds_alternative<BnSpec>(layer.op)) {
        std::vector<double> scale(layer.input.channels), shift(layer.input.channels);
        for (auto& v : scale) v = rng.next(0.5, 1.5);
        for (auto& v : shift) v = rng.next(-0.1, 0.1);
        archive.emplace(layer.name + ".scale", vector_record(std::move(scale)));
        archive.emplace(layer.name + ".shift", vector_record(std::move(shift)));
    }
}

}  // namespace

WeightArchive random_weights(const NetworkSpec& net, std::uint64_t seed) {
    Uniform rng(seed);
    WeightArchive archive;
    for (const auto* layer : net.layers()) add_layer(archive, *layer, rng);
    if (net.tail) {
        const std::size_t n = net.tail->input.size();
        const double bound = std::sqrt(3.0 / static_cast<double>(n));
        std::vector<double> w(net.tail->embedding * n);
        for (auto& v : w) v = rng.next(-bound, bound);
        std::vector<double> b(net.tail->embedding);
        for (auto& v : b) v = rng.next(-0.1, 0.1);
        archive.emplace("fc.weight", WeightTensor::from_values({net.tail->embedding, n, 1}, std::move(w)));
        archive.emplace("fc.bias", vector_record(std::move(b)));
    }
    return archive;
}

Tensor random_input(Shape3 shape, std::uint64_t seed) {
    Uniform rng(seed);
    std::vector<double> v(shape.size());
    for (auto& x : v) x = rng.next(-1.0, 1.0);
    return Tensor::from_values(shape, std::move(v));
}

}  // namespace hconv
