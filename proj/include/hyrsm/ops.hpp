#pragma once

#include <vector>

#include "hyrsm/tape.hpp"
#include "hyrsm/tensor.hpp"

namespace hyrsm {

// Differentiable primitives. Every function computes its value eagerly and
// records one node on the tape; inputs produced by a different tape (or by
// none) act as constants. All primitives have a matching backward rule and a
// finite-difference check in the test suite.

// [m x k] * [k x n] -> [m x n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// Softmax over the last axis of a rank-1 or rank-2 tensor, computed with
// max subtraction so each row is a proper distribution on finite input.
Tensor softmax(Tape& tape, const Tensor& x);

// Mean over one axis of a rank-2 tensor; axis 0 of [T x C] gives [C].
Tensor mean_axis(Tape& tape, const Tensor& m, std::size_t axis);

// Temporal average pooling: [T x C] -> [C].
Tensor global_avg_pool(Tape& tape, const Tensor& f);

// 1 - cos(a, b), in [0, 2]; returns 1.0 (with zero gradient) when either
// norm falls below 1e-12.
Tensor cosine_distance(Tape& tape, const Tensor& a, const Tensor& b);

// Plain double variant of the same formula, shared by the distance-matrix
// builder so tape and value paths agree bit for bit.
double cosine_distance_value(const std::vector<double>& a, const std::vector<double>& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor multiply(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double c);

// Concatenation along the last (channel) axis; all other dims must agree.
Tensor concat(Tape& tape, const std::vector<Tensor>& parts);

Tensor transpose(Tape& tape, const Tensor& m);

Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);

// Exact Gaussian-CDF form: x * Phi(x).
Tensor gelu(Tape& tape, const Tensor& x);

// Stable -log softmax(logits)[target] for a rank-1 logits vector.
Tensor cross_entropy_with_logits(Tape& tape, const Tensor& logits, std::size_t target);

Tensor reshape(Tape& tape, const Tensor& t, std::vector<std::size_t> shape);

// Row r of [T x C] as a rank-1 [C] tensor.
Tensor row_slice(Tape& tape, const Tensor& m, std::size_t row);

// n rank-1 [C] tensors stacked into [n x C].
Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows);

// [C] broadcast to [T x C].
Tensor tile_rows(Tape& tape, const Tensor& v, std::size_t t);

}  // namespace hyrsm
