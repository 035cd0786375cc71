#pragma once

#include <cstdint>
#include <vector>

#include "gog/tensor.hpp"

namespace gog {

// Core differentiable kernels. Every op validates shapes, checks outputs for
// non-finite values, and records a backward closure when the tape is enabled.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_rowvec(const Tensor& a, const Tensor& bias);  // bias is 1 x cols

Tensor relu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int c0, int c1);  // [c0, c1)
Tensor row(const Tensor& a, int r);
Tensor repeat_rows(const Tensor& a, int n);  // a is 1 x cols

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

/// Row-wise softmax where masked-out positions are exactly zero. A fully
/// masked row yields all zeros (isolated nodes are representable, not errors).
Tensor masked_softmax_rows(const Tensor& scores, const std::vector<std::uint8_t>& mask);

/// Convenience for a single score vector; mask and scores have length k.
Tensor masked_softmax(const Tensor& scores, const std::vector<std::uint8_t>& mask);

/// Per-row normalization to zero mean / unit variance (population variance,
/// epsilon added before the square root), then an elementwise affine.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = 1e-5);

Tensor log_softmax_row(const Tensor& x);  // x is 1 x k
Tensor pick(const Tensor& x, int index);  // 1x1 entry of a 1 x k tensor

/// Gathers rows of `table` at `ids`; backward scatter-adds into the table.
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

/// n x n bias matrix with entry (i, j) = table[labels(i, j)] wherever
/// adjacency is set, zero elsewhere. Labels index rows of an n_labels x 1 table.
Tensor gather_label_bias(const Tensor& table, const std::vector<int>& labels,
                         const std::vector<std::uint8_t>& adjacency, int n);

}  // namespace gog
