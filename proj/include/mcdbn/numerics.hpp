#pragma once

#include "mcdbn/matrix.hpp"
#include "mcdbn/rng.hpp"

namespace mcdbn {

enum class Activation { kSigmoid, kTanh, kRelu };

Mat sigmoid(const Mat& a);
Mat tanh_m(const Mat& a);
Mat relu(const Mat& a);
Mat elementwise(const Mat& a, Activation fn);

// Row-wise softmax with per-row max subtraction; each output row is
// nonnegative and sums to 1.
Mat softmax_rows(const Mat& a);

// Row-wise layer normalization with population variance (1/n):
// out = (x - mean) / sqrt(var + eps). eps must be > 0.
Mat layer_norm_rows(const Mat& a, double eps);

// Entry (i,j) is 1 iff the next uniform draw < p(i,j); draws consumed in
// row-major order. Entries of p must lie in [0, 1].
Mat bernoulli_sample(const Mat& p, Rng& rng);

// Stable log(1 + exp(x)).
double softplus(double x);

}  // namespace mcdbn
