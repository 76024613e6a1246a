#pragma once

#include <vector>

#include "spdnet/tensor.hpp"

namespace spdnet {

enum class Padding { kSame, kValid };

// Elementwise. add() accepts equal shapes or a rhs whose shape is a trailing
// suffix of lhs (bias broadcast); sub/mul require equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// Multiply by a learnable single-element tensor; gradient flows to both.
Tensor scale_by(const Tensor& x, const Tensor& factor);

/// Batched matrix product a[...,m,k] x b[...,k,n] -> [...,m,n].
/// Batch extents must match exactly, or either operand may be rank-2
/// (shared across the other's batch).
Tensor matmul(const Tensor& a, const Tensor& b);

/// Cross-correlation convolutions (no kernel flip). 'same' pads with zeros,
/// left pad = (kw-1)/2, and preserves length.
Tensor conv1d(const Tensor& x, const Tensor& kernel, Padding padding);            // x [B,C,L], k [OC,C,KW]
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, Padding padding);  // x [B,C,L], k [C,KW]
Tensor conv2d(const Tensor& x, const Tensor& kernel, Padding padding);            // x [B,C,H,W], k [OC,C,KH,KW]

/// Numerically stabilized softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Layer normalization over the last axis with learnable gain/bias of that
/// extent. Variance is the population variance.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor mean_all(const Tensor& x);  // scalar
Tensor sum_all(const Tensor& x);   // scalar

Tensor reshape(const Tensor& x, std::vector<std::size_t> new_shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t count);
/// Extends `axis` to new_extent by appending zeros.
Tensor pad_to(const Tensor& x, std::size_t axis, std::size_t new_extent);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

}  // namespace spdnet
