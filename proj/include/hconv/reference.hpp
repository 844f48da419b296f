#pragma once

// Serial, obviously-correct implementations of every network operation. These are the
// oracle the parallel and fast engines are tested against; the executor also uses them
// for pooling, batch-norm, activation and the fully connected tail.

#include "hconv/conv_shape.hpp"
#include "hconv/tensor.hpp"

#include <span>
#include <vector>

namespace hconv::reference {

/// Cross-correlation with zero padding. Fixed-point operands (same dtype) accumulate in
/// 32-bit (fix8) or 64-bit (fix16) integers; bias joins the accumulator and the output is
/// requantized to the operand dtype.
Tensor conv_direct(const Tensor& x, const WeightTensor& w, const ConvShape& shape,
                   std::span<const double> bias = {}, ExecStats* stats = nullptr);

/// Windowed max; padded positions never win.
Tensor pool_max(const Tensor& x, std::size_t window, std::size_t stride, std::size_t pad = 0);
/// Windowed mean over the full window area, zero padding included.
Tensor pool_avg(const Tensor& x, std::size_t window, std::size_t stride, std::size_t pad = 0);

/// Output spatial size of a pool or conv window.
std::size_t window_output(std::size_t input, std::size_t window, std::size_t stride, std::size_t pad);

/// y[c] = scale[c] * x[c] + shift[c]
Tensor affine_bn(const Tensor& x, std::span<const double> scale, std::span<const double> shift);

Tensor relu(const Tensor& x);

/// Matrix-vector product over the flattened input. w is (outputs, C*H*W, 1, 1).
std::vector<double> fc(const Tensor& x, const WeightTensor& w, std::span<const double> bias = {});

/// v / ||v||_2; throws ValidationError for the zero vector.
std::vector<double> l2_normalize(std::span<const double> v);

/// Channel concatenation in argument order. Fixed inputs are brought to the smallest frac_bits.
Tensor concat(std::span<const Tensor> parts);

}  // namespace hconv::reference
