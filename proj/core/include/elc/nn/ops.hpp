#pragma once

#include "elc/nn/tape.hpp"

// Differentiable primitives. Every op records its result on the tape of its
// first argument; shapes are checked eagerly and mismatches throw
// std::invalid_argument.
namespace elc::nn {

Var matmul(Var a, Var b);     // a * b
Var matmul_nt(Var a, Var b);  // a * b^T

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise

Var add_row(Var a, Var row);  // a + broadcast(row), row is 1 x cols(a)
Var mul_row(Var a, Var row);  // a .* broadcast(row)
Var mul_col(Var a, Var col);  // a .* broadcast(col), col is rows(a) x 1

Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var neg(Var a);

Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var square(Var a);
Var reciprocal(Var a);
Var clamp(Var a, double lo, double hi);  // zero gradient outside [lo, hi]

Var sum(Var a);       // 1 x 1
Var mean(Var a);      // 1 x 1
Var sum_rows(Var a);  // rows x 1
Var max_rows(Var a);  // rows x 1, gradient routed to the first maximiser

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

// ||a_r - b_c||^2 for every row pair: rows(a) x rows(b).
Var pairwise_sq_dist(Var a, Var b);

// 1-D convolution over channel-interleaved rows: x is B x (length * in_ch)
// laid out position-major, w is out_ch x (kernel * in_ch), bias is 1 x out_ch.
// Output is B x (out_length * out_ch) in the same layout.
Var conv1d(Var x, Var w, Var bias, Eigen::Index in_channels, Eigen::Index kernel, Eigen::Index stride);
Eigen::Index conv1d_out_length(Eigen::Index length, Eigen::Index kernel, Eigen::Index stride);

// Adaptive average pooling over positions of a channel-interleaved row:
// bin b averages positions [floor(b*L/bins), ceil((b+1)*L/bins)).
// Output is B x (bins * channels), position-major.
Var avg_pool(Var x, Eigen::Index channels, Eigen::Index bins);

// Column block [first, first + count).
Var slice_cols(Var a, Eigen::Index first, Eigen::Index count);

}  // namespace elc::nn
