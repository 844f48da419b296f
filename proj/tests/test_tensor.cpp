#include "hconv/error.hpp"
#include "hconv/tensor.hpp"
#include "hconv/tensor_io.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace hconv;
using hconv::testing::Gen;

namespace {

Tensor vec(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor::from_values({1, 1, n}, std::move(v));
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("hconv_test_" + name);
}

}  // namespace

TEST(Quantize, OneAndMinusHalfAt16Bits) {
    const Tensor q = quantize(vec({1.0, -0.5}), 16);
    EXPECT_EQ(q.dtype(), DType::fix16);
    EXPECT_EQ(q.frac_bits(), 14);
    EXPECT_EQ(std::vector<std::int32_t>(q.raw().begin(), q.raw().end()), (std::vector<std::int32_t>{16384, -8192}));
}

TEST(Quantize, AllZeroUsesMaximumFraction) {
    const Tensor q = quantize(vec({0.0, 0.0, 0.0}), 8);
    EXPECT_EQ(q.frac_bits(), 7);
    for (auto r : q.raw()) EXPECT_EQ(r, 0);
}

TEST(Quantize, HalfAt8Bits) {
    const Tensor q = quantize(vec({0.5}), 8);
    EXPECT_EQ(q.frac_bits(), 7);
    EXPECT_EQ(q.raw()[0], 64);
}

TEST(Quantize, RoundsHalfAwayFromZero) {
    // with max|x| = 3.0 at 8 bits, f = 5 (3 * 32 = 96 <= 127, 3 * 64 > 127)
    const Tensor q = quantize(vec({3.0, 1.0 / 64.0, -1.0 / 64.0}), 8);
    ASSERT_EQ(q.frac_bits(), 5);
    EXPECT_EQ(q.raw()[1], 1);   // 0.5 -> 1
    EXPECT_EQ(q.raw()[2], -1);  // -0.5 -> -1
}

TEST(Quantize, RejectsNonFinite) {
    EXPECT_THROW(quantize(vec({1.0, std::numeric_limits<double>::infinity()}), 16), ValidationError);
    EXPECT_THROW(quantize(vec({std::nan("")}), 8), ValidationError);
}

TEST(Quantize, RejectsOtherWidths) { EXPECT_THROW(quantize(vec({1.0}), 12), ValidationError); }

TEST(Quantize, LargeMagnitudeSaturatesAtZeroFraction) {
    const Tensor q = quantize(vec({1000.0, -1000.0}), 8);
    EXPECT_EQ(q.frac_bits(), 0);
    EXPECT_EQ(q.raw()[0], 127);
    EXPECT_EQ(q.raw()[1], -128);
}

TEST(Dequantize, Examples) {
    const Tensor t = Tensor::from_raw({1, 1, 3}, DType::fix16, 14, {16384, -8192, 0});
    const Tensor d = dequantize(t);
    EXPECT_EQ(d.dtype(), DType::float64);
    EXPECT_EQ(d.values()[0], 1.0);
    EXPECT_EQ(d.values()[1], -0.5);
    EXPECT_EQ(d.values()[2], 0.0);
}

TEST(Tensor, RejectsInconsistentData) {
    EXPECT_THROW(Tensor::from_values({2, 2, 2}, std::vector<double>(7)), ValidationError);
    EXPECT_THROW(Tensor::from_raw({1, 1, 1}, DType::fix8, 3, {200}), ValidationError);
    EXPECT_THROW(Tensor::from_raw({1, 1, 1}, DType::fix16, 3, {-40000}), ValidationError);
    EXPECT_THROW(Tensor::from_raw({1, 1, 1}, DType::fix8, -1, {1}), ValidationError);
}

TEST(Tensor, PayloadAccessorsMatchDtype) {
    const Tensor f = vec({1.0});
    EXPECT_THROW((void)f.raw(), ValidationError);
    const Tensor q = quantize(f, 8);
    EXPECT_THROW((void)q.values(), ValidationError);
}

TEST(QuantizeProperty, RoundTripWithinHalfStep) {
    Gen gen(11);
    for (int trial = 0; trial < 300; ++trial) {
        const double scale = std::ldexp(1.0, static_cast<int>(gen.integer(-8, 6)));  // 2^6 < 127: no saturation at 8 bits
        const Tensor x = gen.tensor({2, 3, 3}, -scale, scale);
        for (int width : {8, 16}) {
            const Tensor q = quantize(x, width);
            const Tensor back = dequantize(q);
            const double bound = std::ldexp(1.0, -q.frac_bits() - 1);
            for (std::size_t i = 0; i < x.size(); ++i) {
                ASSERT_LE(std::abs(back.values()[i] - x.values()[i]), bound * (1 + 1e-12)) << "trial " << trial;
            }
        }
    }
}

TEST(QuantizeProperty, PowerOfTwoScaleCovariance) {
    Gen gen(12);
    for (int trial = 0; trial < 300; ++trial) {
        const Tensor x = gen.tensor({1, 4, 4}, -3.0, 3.0);
        std::vector<double> doubled(x.values().begin(), x.values().end());
        for (auto& v : doubled) v *= 2.0;
        for (int width : {8, 16}) {
            const Tensor a = quantize(x, width);
            if (a.frac_bits() == 0) continue;  // doubling would saturate
            const Tensor b = quantize(Tensor::from_values(x.shape(), doubled), width);
            ASSERT_EQ(b.frac_bits(), a.frac_bits() - 1);
            ASSERT_TRUE(std::equal(a.raw().begin(), a.raw().end(), b.raw().begin()));
        }
    }
}

TEST(QuantizeProperty, ChosenFractionIsLargestThatFits) {
    Gen gen(13);
    for (int trial = 0; trial < 300; ++trial) {
        const auto v = gen.reals(5, -gen.real(0.01, 50.0), gen.real(0.01, 50.0));
        double mx = 0.0;
        for (double e : v) mx = std::max(mx, std::abs(e));
        for (int width : {8, 16}) {
            const int f = choose_frac_bits(v, width);
            const double limit = std::ldexp(1.0, width - 1) - 1;
            if (f > 0) ASSERT_LE(mx * std::ldexp(1.0, f), limit);
            ASSERT_GT(mx * std::ldexp(1.0, f + 1), limit);
        }
    }
}

TEST(TensorFile, FloatRoundTrip) {
    Gen gen(1);
    const Tensor t = gen.tensor({2, 3, 3});
    const auto path = temp_file("float.hct");
    write_tensor(path, t);
    EXPECT_EQ(read_tensor(path), t);
    std::filesystem::remove(path);
}

TEST(TensorFile, RoundTripAllDtypesBitExact) {
    Gen gen(2);
    for (int trial = 0; trial < 50; ++trial) {
        const Shape3 s{static_cast<std::size_t>(gen.integer(1, 4)), static_cast<std::size_t>(gen.integer(1, 6)),
                       static_cast<std::size_t>(gen.integer(1, 6))};
        const Tensor f = gen.tensor(s, -100, 100);
        for (const Tensor& t : {f, quantize(f, 16), quantize(f, 8)}) {
            std::stringstream ss;
            write_record(ss, t);
            const AnyTensor back = read_record(ss);
            ASSERT_TRUE(std::holds_alternative<Tensor>(back));
            ASSERT_EQ(std::get<Tensor>(back), t);
        }
    }
}

TEST(TensorFile, NegativeZeroAndExtremesSurvive) {
    const Tensor t = Tensor::from_values({1, 1, 4}, {-0.0, std::numeric_limits<double>::denorm_min(),
                                                     std::numeric_limits<double>::max(), -1e-300});
    std::stringstream ss;
    write_record(ss, t);
    const Tensor back = std::get<Tensor>(read_record(ss));
    EXPECT_TRUE(std::signbit(back.values()[0]));
    EXPECT_EQ(back, t);
}

TEST(TensorFile, WeightsRoundTrip) {
    Gen gen(3);
    const WeightTensor w = gen.weights({3, 2, 5});
    for (const WeightTensor& x : {w, quantize(w, 16), quantize(w, 8)}) {
        std::stringstream ss;
        write_record(ss, x);
        EXPECT_EQ(std::get<WeightTensor>(read_record(ss)), x);
    }
}

TEST(TensorFile, LayoutIsLittleEndian) {
    const Tensor t = Tensor::from_raw({1, 1, 2}, DType::fix16, 3, {0x0102, -2});
    std::stringstream ss;
    write_record(ss, t);
    const std::string bytes = ss.str();
    const std::string expected{'H', 'C', 'T', '1', 1, 3, 3, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0,
                               0x02, 0x01, static_cast<char>(0xFE), static_cast<char>(0xFF)};
    EXPECT_EQ(bytes, expected);
}

TEST(TensorFile, BadMagic) {
    std::stringstream ss("HCT2\x00\x00\x03");
    try {
        read_record(ss);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatErrorKind::bad_magic);
    }
}

TEST(TensorFile, TruncatedPayload) {
    // header says 1x2x2 float64 but only three values follow
    const Tensor full = Tensor::from_values({1, 2, 2}, {1, 2, 3, 4});
    std::stringstream ss;
    write_record(ss, full);
    std::string bytes = ss.str();
    bytes.resize(bytes.size() - 8);
    std::stringstream cut(bytes);
    try {
        read_record(cut);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatErrorKind::truncated);
    }
}

TEST(TensorFile, DimensionOverflow) {
    std::string bytes{'H', 'C', 'T', '1', 0, 0, 3};
    for (int d = 0; d < 3; ++d) bytes += std::string("\xFF\xFF\x00\x00", 4);
    std::stringstream ss(bytes);
    try {
        read_record(ss);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatErrorKind::dimension_overflow);
    }
}

TEST(TensorFile, BadHeaderFields) {
    for (std::string bytes : {std::string{'H', 'C', 'T', '1', 7, 0, 3}, std::string{'H', 'C', 'T', '1', 0, 0, 5}}) {
        bytes += std::string(20, '\x01');
        std::stringstream ss(bytes);
        try {
            read_record(ss);
            FAIL();
        } catch (const FormatError& e) {
            EXPECT_EQ(e.kind(), FormatErrorKind::bad_header);
        }
    }
}

TEST(TensorFile, MissingFileIsIoError) {
    EXPECT_THROW(read_tensor("/nonexistent/dir/x.hct"), IoError);
}

TEST(TensorFile, WrongRankForReader) {
    Gen gen(4);
    const auto path = temp_file("rank.hct");
    write_weights(path, gen.weights({1, 1, 3}));
    EXPECT_THROW(read_tensor(path), FormatError);
    EXPECT_NO_THROW(read_weights(path));
    std::filesystem::remove(path);
}
