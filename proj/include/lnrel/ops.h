#pragma once

#include <vector>

#include "lnrel/geometry.h"
#include "lnrel/tensor.h"

namespace lnrel {

enum class Activation { none, relu, sigmoid };

// Elementwise arithmetic on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// Concatenation along `axis`; all other extents must agree.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis = 0);
// Stacks equal-shape tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);
// Slice `index` of the leading axis.
Tensor select(const Tensor& a, std::size_t index);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor activation(const Tensor& a, Activation kind);

// input [C_in,D,H,W], weights [C_out,C_in,k,k,k], optional bias [C_out].
Tensor conv3d(const Tensor& input, const Tensor& weights, int stride, int padding);
Tensor conv3d(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
              int padding);

// Per-channel mean of feature_map [C,D,H,W] over roi.
Tensor roi_gap(const Tensor& feature_map, const Box3& roi);

// input [N_in] or [B,N_in]; weights [N_out,N_in]; bias [N_out] or undefined.
Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias);

// [M,K] x [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);

// Row-wise softmax of a [M,N] matrix.
Tensor softmax_rows(const Tensor& a);

// Row (u*N + v) of the result is targets[u] ++ sources[v]; both are [N,d*].
Tensor pairwise_concat(const Tensor& targets, const Tensor& sources);

// [G*block, d] -> [G, d], summing consecutive rows of each block in order.
Tensor block_sum(const Tensor& a, std::size_t block);

inline constexpr double kProbabilityClamp = 1e-7;

// Mean weighted binary cross-entropy. Predictions are clamped to
// [1e-7, 1-1e-7]; labels must be exactly 0 or 1.
Tensor bce_loss(const Tensor& predictions, const Tensor& labels, double positive_weight);
// Same loss evaluated on pre-sigmoid logits. Stable for any logit magnitude and
// its gradient sigmoid(z) - y never vanishes on confidently wrong outputs.
Tensor bce_with_logits(const Tensor& logits, const Tensor& labels, double positive_weight);

}  // namespace lnrel
