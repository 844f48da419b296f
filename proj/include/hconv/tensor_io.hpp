#pragma once

#include "hconv/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <variant>

namespace hconv {

// HCT1 record layout, all integers little-endian:
//   "HCT1" | dtype u8 (0 float64, 1 fix16, 2 fix8) | frac_bits u8 | ndims u8 (3 or 4)
//   | dims u32 x ndims | payload (f64 / i16 / i8)
// Feature maps use ndims 3 (C, H, W); weights use ndims 4 (K, L, Q, Q).

using AnyTensor = std::variant<Tensor, WeightTensor>;

void write_record(std::ostream& out, const Tensor& t);
void write_record(std::ostream& out, const WeightTensor& t);
AnyTensor read_record(std::istream& in);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
void write_weights(const std::filesystem::path& path, const WeightTensor& t);

/// Reads a 3-d record. Throws FormatError on malformed data, IoError if the file cannot be opened.
Tensor read_tensor(const std::filesystem::path& path);
WeightTensor read_weights(const std::filesystem::path& path);

}  // namespace hconv
