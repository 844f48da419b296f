#pragma once

#include "hconv/conv_shape.hpp"
#include "hconv/tensor.hpp"

#include <span>

namespace hconv {

/// Direct convolution parallelized over output channels. Same contract as
/// reference::conv_direct (any stride, fixed or float); fixed-point results are
/// bit-identical to the reference, float results agree to rounding.
Tensor direct_conv(const Tensor& x, const WeightTensor& w, const ConvShape& shape, std::span<const double> bias = {},
                   ExecStats* stats = nullptr);

}  // namespace hconv
