#include "hconv/tensor_io.hpp"

#include "hconv/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace hconv {

namespace {

constexpr std::array<char, 4> kMagic{'H', 'C', 'T', '1'};
// Refuse headers describing more than 2^31 elements before allocating anything.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

template <class T>
void put_le(std::ostream& out, T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
    out.write(bytes.data(), bytes.size());
}

template <class T>
T get_le(std::istream& in, const char* what) {
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw FormatError(FormatErrorKind::truncated, std::string("truncated HCT1 record while reading ") + what);
    }
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(bytes[i]) << (8 * i);
    return static_cast<T>(u);
}

void write_header(std::ostream& out, DType dtype, int frac_bits, std::span<const std::uint32_t> dims) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype == DType::float64 ? 0 : frac_bits));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dims.size()));
    for (auto d : dims) put_le<std::uint32_t>(out, d);
}

std::uint32_t narrow_dim(std::size_t d) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw ValidationError("dimension does not fit in u32");
    return static_cast<std::uint32_t>(d);
}

template <class Tn>
void write_payload(std::ostream& out, const Tn& t) {
    switch (t.dtype()) {
    case DType::float64:
        for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
        break;
    case DType::fix16:
        for (auto v : t.raw()) put_le<std::int16_t>(out, static_cast<std::int16_t>(v));
        break;
    case DType::fix8:
        for (auto v : t.raw()) put_le<std::int8_t>(out, static_cast<std::int8_t>(v));
        break;
    }
    if (!out) throw IoError("failed writing tensor payload");
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

}  // namespace

void write_record(std::ostream& out, const Tensor& t) {
    const std::array dims{narrow_dim(t.channels()), narrow_dim(t.height()), narrow_dim(t.width())};
    write_header(out, t.dtype(), t.frac_bits(), dims);
    write_payload(out, t);
}

void write_record(std::ostream& out, const WeightTensor& t) {
    const auto q = narrow_dim(t.kernel());
    const std::array dims{narrow_dim(t.out_channels()), narrow_dim(t.in_channels()), q, q};
    write_header(out, t.dtype(), t.frac_bits(), dims);
    write_payload(out, t);
}

AnyTensor read_record(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != 4) throw FormatError(FormatErrorKind::truncated, "truncated HCT1 record: missing magic");
    if (magic != kMagic) throw FormatError(FormatErrorKind::bad_magic, "bad magic, expected HCT1");

    const auto code = get_le<std::uint8_t>(in, "dtype");
    if (code > 2) throw FormatError(FormatErrorKind::bad_header, "unknown dtype code " + std::to_string(code));
    const auto dtype = static_cast<DType>(code);
    const int frac_bits = get_le<std::uint8_t>(in, "frac_bits");
    const auto ndims = get_le<std::uint8_t>(in, "ndims");
    if (ndims != 3 && ndims != 4) {
        throw FormatError(FormatErrorKind::bad_header, "ndims must be 3 or 4, got " + std::to_string(ndims));
    }

    std::array<std::uint32_t, 4> dims{};
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < ndims; ++i) {
        dims[i] = get_le<std::uint32_t>(in, "dims");
        count *= dims[i];
        if (count > kMaxElements) throw FormatError(FormatErrorKind::dimension_overflow, "HCT1 dimensions overflow");
    }
    if (ndims == 4 && dims[2] != dims[3]) throw FormatError(FormatErrorKind::bad_header, "weights must be square");

    std::vector<double> values;
    std::vector<std::int32_t> raw;
    switch (dtype) {
    case DType::float64:
        values.resize(count);
        for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "payload"));
        break;
    case DType::fix16:
        raw.resize(count);
        for (auto& v : raw) v = get_le<std::int16_t>(in, "payload");
        break;
    case DType::fix8:
        raw.resize(count);
        for (auto& v : raw) v = get_le<std::int8_t>(in, "payload");
        break;
    }

    if (ndims == 3) {
        const Shape3 shape{dims[0], dims[1], dims[2]};
        if (dtype == DType::float64) return Tensor::from_values(shape, std::move(values));
        return Tensor::from_raw(shape, dtype, frac_bits, std::move(raw));
    }
    const KernelShape shape{dims[0], dims[1], dims[2]};
    if (dtype == DType::float64) return WeightTensor::from_values(shape, std::move(values));
    return WeightTensor::from_raw(shape, dtype, frac_bits, std::move(raw));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    auto out = open_out(path);
    write_record(out, t);
}

void write_weights(const std::filesystem::path& path, const WeightTensor& t) {
    auto out = open_out(path);
    write_record(out, t);
}

Tensor read_tensor(const std::filesystem::path& path) {
    auto in = open_in(path);
    auto rec = read_record(in);
    if (auto* t = std::get_if<Tensor>(&rec)) return std::move(*t);
    throw FormatError(FormatErrorKind::bad_header, path.string() + " holds a 4-d weight record, expected a tensor");
}

WeightTensor read_weights(const std::filesystem::path& path) {
    auto in = open_in(path);
    auto rec = read_record(in);
    if (auto* t = std::get_if<WeightTensor>(&rec)) return std::move(*t);
    throw FormatError(FormatErrorKind::bad_header, path.string() + " holds a 3-d tensor, expected weights");
}

}  // namespace hconv
