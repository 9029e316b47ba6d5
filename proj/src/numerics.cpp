#include "mcdbn/numerics.hpp"

#include <cmath>

namespace mcdbn {

Mat sigmoid(const Mat& a) {
  return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

Mat tanh_m(const Mat& a) { return a.array().tanh().matrix(); }

Mat relu(const Mat& a) { return a.array().max(0.0).matrix(); }

Mat elementwise(const Mat& a, Activation fn) {
  switch (fn) {
    case Activation::kSigmoid:
      return sigmoid(a);
    case Activation::kTanh:
      return tanh_m(a);
    case Activation::kRelu:
      return relu(a);
  }
  throw DomainError("elementwise: unknown activation");
}

Mat softmax_rows(const Mat& a) {
  Mat out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double m = a.row(i).maxCoeff();
    Eigen::ArrayXd e = (a.row(i).array() - m).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}

Mat layer_norm_rows(const Mat& a, double eps) {
  if (!(eps > 0.0)) throw ConfigError("layer_norm_rows: eps must be > 0");
  Mat out(a.rows(), a.cols());
  const double n = static_cast<double>(a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mean = a.row(i).mean();
    const double var = (a.row(i).array() - mean).square().sum() / n;
    out.row(i) = ((a.row(i).array() - mean) / std::sqrt(var + eps)).matrix();
  }
  return out;
}

Mat bernoulli_sample(const Mat& p, Rng& rng) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double v = p(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DomainError("bernoulli_sample: p(" + std::to_string(i) + "," +
                          std::to_string(j) + ") = " + std::to_string(v) +
                          " outside [0,1]");
      }
    }
  }
  Mat out(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      out(i, j) = rng.next_uniform() < p(i, j) ? 1.0 : 0.0;
    }
  }
  return out;
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace mcdbn
