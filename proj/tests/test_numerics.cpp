#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mcdbn/numerics.hpp"

using namespace mcdbn;

namespace {

Mat row2(double a, double b) {
  Mat m(1, 2);
  m << a, b;
  return m;
}

}  // namespace

TEST_CASE("sigmoid hits closed-form points and saturates cleanly") {
  Mat in(1, 4);
  in << 0.0, 2.0, 1000.0, -1000.0;
  const Mat out = sigmoid(in);
  CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out(0, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-14));
  CHECK(out(0, 2) == 1.0);
  CHECK(out(0, 3) == 0.0);
  CHECK(out.allFinite());
}

TEST_CASE("tanh and relu are plain elementwise maps") {
  Mat in(2, 2);
  in << -1.5, 0.0, 0.5, 3.0;
  const Mat t = tanh_m(in);
  const Mat r = relu(in);
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      CHECK(t(i, j) == doctest::Approx(std::tanh(in(i, j))).epsilon(1e-15));
      CHECK(r(i, j) == std::max(in(i, j), 0.0));
    }
  }
}

TEST_CASE("elementwise dispatches to the named activation") {
  Mat in(1, 3);
  in << -2.0, 0.25, 4.0;
  CHECK(elementwise(in, Activation::kSigmoid) == sigmoid(in));
  CHECK(elementwise(in, Activation::kTanh) == tanh_m(in));
  CHECK(elementwise(in, Activation::kRelu) == relu(in));
}

TEST_CASE("softmax of [ln 1, ln 3] is [1/4, 3/4]") {
  const Mat out = softmax_rows(row2(std::log(1.0), std::log(3.0)));
  CHECK(out(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(out(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax of equal scores is uniform") {
  const Mat out = softmax_rows(row2(0.0, 0.0));
  CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("softmax survives huge scores via max subtraction") {
  Mat in(1, 3);
  in << 1000.0, 1000.0, 1000.0;
  const Mat out = softmax_rows(in);
  CHECK(out.allFinite());
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(out(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax rows sum to one and shifting scores changes nothing") {
  Rng rng(5);
  Mat in(6, 5);
  for (Eigen::Index i = 0; i < in.rows(); ++i) {
    for (Eigen::Index j = 0; j < in.cols(); ++j) in(i, j) = 3.0 * rng.next_gaussian();
  }
  const Mat out = softmax_rows(in);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    CHECK(out.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index j = 0; j < out.cols(); ++j) CHECK(out(i, j) >= 0.0);
  }
  const Mat shifted = softmax_rows(in + Mat::Constant(6, 5, 17.5));
  CHECK((out - shifted).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("layer norm maps a constant row to zeros") {
  Mat in(1, 3);
  in << 5.0, 5.0, 5.0;
  const Mat out = layer_norm_rows(in, 1e-5);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(out(0, j) == 0.0);
}

TEST_CASE("layer norm of [0, 2] approaches [-1, 1] as eps shrinks") {
  const Mat out = layer_norm_rows(row2(0.0, 2.0), 1e-12);
  CHECK(out(0, 0) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(out(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("layer norm leaves rows with zero mean and near-unit variance") {
  Rng rng(6);
  Mat in(4, 8);
  for (Eigen::Index i = 0; i < in.rows(); ++i) {
    for (Eigen::Index j = 0; j < in.cols(); ++j) in(i, j) = 2.0 + rng.next_gaussian();
  }
  const Mat out = layer_norm_rows(in, 1e-12);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    CHECK(std::abs(out.row(i).mean()) < 1e-12);
    const double var = (out.row(i).array() - out.row(i).mean()).square().sum() /
                       static_cast<double>(out.cols());
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("layer norm rejects a non-positive eps") {
  CHECK_THROWS_AS(layer_norm_rows(row2(1.0, 2.0), 0.0), ConfigError);
  CHECK_THROWS_AS(layer_norm_rows(row2(1.0, 2.0), -1e-9), ConfigError);
}

TEST_CASE("bernoulli sampling is the documented row-major threshold rule") {
  Rng rng(42);
  Rng mirror(42);
  Mat p(3, 4);
  Rng fill(9);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) p(i, j) = fill.next_uniform();
  }
  const Mat out = bernoulli_sample(p, rng);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double expected = mirror.next_uniform() < p(i, j) ? 1.0 : 0.0;
      CHECK(out(i, j) == expected);
    }
  }
}

TEST_CASE("bernoulli endpoints are deterministic") {
  Rng rng(1);
  CHECK(bernoulli_sample(Mat::Zero(5, 5), rng).isZero());
  CHECK(bernoulli_sample(Mat::Ones(5, 5), rng) == Mat::Ones(5, 5));
}

TEST_CASE("bernoulli rejects probabilities outside [0, 1]") {
  Rng rng(1);
  CHECK_THROWS_AS(bernoulli_sample(Mat::Constant(1, 1, 1.5), rng), DomainError);
  CHECK_THROWS_AS(bernoulli_sample(Mat::Constant(1, 1, -0.1), rng), DomainError);
  const double nan = std::nan("");
  CHECK_THROWS_AS(bernoulli_sample(Mat::Constant(1, 1, nan), rng), DomainError);
}

TEST_CASE("bernoulli empirical rate matches p") {
  Rng rng(77);
  const Mat p = Mat::Constant(1000, 100, 0.3);
  const Mat out = bernoulli_sample(p, rng);
  CHECK(out.mean() == doctest::Approx(0.3).epsilon(0.02));
}

TEST_CASE("softplus closed-form points and asymptotes") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(1000.0) == 1000.0);
  CHECK(softplus(-1000.0) == 0.0);
  CHECK(softplus(1.0) == doctest::Approx(std::log1p(std::exp(1.0))).epsilon(1e-14));
  for (double x : {-3.0, -0.5, 0.1, 2.0, 10.0}) CHECK(softplus(x) >= std::max(x, 0.0));
}
