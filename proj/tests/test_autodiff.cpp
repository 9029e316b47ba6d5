#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "mcdbn/autodiff.hpp"
#include "mcdbn/numerics.hpp"
#include "mcdbn/rng.hpp"
#include "mcdbn/training.hpp"

using namespace mcdbn;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.next_gaussian();
  }
  return m;
}

// Linear reduction to 1x1 so the op under test owns the whole curvature:
// sum over entries of (v .* w).
ad::Var weighted_sum(ad::Graph& g, ad::Var v, const Mat& w) {
  ad::Var weighted = ad::hadamard_const(v, w);
  ad::Var left = g.constant(Mat::Ones(1, v.value().rows()));
  ad::Var right = g.constant(Mat::Ones(v.value().cols(), 1));
  return ad::matmul(ad::matmul(left, weighted), right);
}

}  // namespace

TEST_CASE("matmul, transpose and affine reproduce Eigen forward values") {
  Rng rng(1);
  const Mat a = random_mat(2, 3, rng);
  const Mat b = random_mat(3, 4, rng);
  const Mat bias = random_mat(1, 4, rng);
  ad::Graph g;
  ad::Var va = g.constant(a);
  ad::Var vb = g.constant(b);
  ad::Var vbias = g.constant(bias);
  CHECK(((ad::matmul(va, vb).value()) - Mat(a * b)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::transpose(va).value() - Mat(a.transpose())).cwiseAbs().maxCoeff() == 0.0);
  const Mat expected = (a * b).rowwise() + bias.row(0);
  CHECK((ad::affine(va, vb, vbias).value() - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("matmul with mismatched inner dimensions names both shapes") {
  ad::Graph g;
  ad::Var a = g.constant(Mat::Zero(2, 3));
  ad::Var b = g.constant(Mat::Zero(4, 2));
  try {
    ad::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x2") != std::string::npos);
  }
}

TEST_CASE("elementwise ops match their plain-matrix counterparts") {
  Rng rng(2);
  const Mat x = random_mat(3, 4, rng);
  const Mat y = random_mat(3, 4, rng);
  ad::Graph g;
  ad::Var vx = g.constant(x);
  ad::Var vy = g.constant(y);
  CHECK((ad::add(vx, vy).value() - Mat(x + y)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::sub(vx, vy).value() - Mat(x - y)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::hadamard(vx, vy).value() - Mat(x.cwiseProduct(y))).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::hadamard_const(vx, y).value() - Mat(x.cwiseProduct(y))).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::add_const(vx, y).value() - Mat(x + y)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::scale(vx, -2.5).value() - Mat(-2.5 * x)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::sigmoid(vx).value() - sigmoid(x)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::tanh_v(vx).value() - tanh_m(x)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::relu(vx).value() - relu(x)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::softmax_rows_v(vx).value() - softmax_rows(x)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::layer_norm_rows_v(vx, 1e-5).value() - layer_norm_rows(x, 1e-5))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}

TEST_CASE("add_row broadcasts and rejects a non-matching row") {
  Rng rng(3);
  const Mat m = random_mat(3, 4, rng);
  const Mat row = random_mat(1, 4, rng);
  ad::Graph g;
  const Mat out = ad::add_row(g.constant(m), g.constant(row)).value();
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK((out.row(i) - (m.row(i) + row.row(0))).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(ad::add_row(g.constant(m), g.constant(Mat::Zero(1, 3))), ShapeError);
}

TEST_CASE("concat and slice are exact inverses on values") {
  Rng rng(4);
  const Mat a = random_mat(3, 2, rng);
  const Mat b = random_mat(3, 5, rng);
  ad::Graph g;
  ad::Var joined = ad::concat_cols({g.constant(a), g.constant(b)});
  CHECK(joined.value().rows() == 3);
  CHECK(joined.value().cols() == 7);
  CHECK((ad::slice_cols(joined, 0, 2).value() - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::slice_cols(joined, 2, 5).value() - b).cwiseAbs().maxCoeff() == 0.0);

  const Mat c = random_mat(4, 3, rng);
  const Mat d = random_mat(2, 3, rng);
  ad::Var stacked = ad::concat_rows({g.constant(c), g.constant(d)});
  CHECK(stacked.value().rows() == 6);
  CHECK((ad::slice_rows(stacked, 0, 4).value() - c).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad::slice_rows(stacked, 4, 2).value() - d).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(ad::concat_cols({}), ShapeError);
  CHECK_THROWS_AS(ad::concat_rows({}), ShapeError);
  CHECK_THROWS_AS(ad::concat_cols({g.constant(a), g.constant(c)}), ShapeError);
  CHECK_THROWS_AS(ad::slice_rows(stacked, 5, 3), ShapeError);
  CHECK_THROWS_AS(ad::slice_cols(joined, -1, 2), ShapeError);
}

TEST_CASE("mix_mask picks observed entries where the mask is one") {
  Rng rng(5);
  const Mat gen = random_mat(3, 3, rng);
  const Mat obs = random_mat(3, 3, rng);
  Mat mask = Mat::Zero(3, 3);
  mask(0, 0) = 1.0;
  mask(1, 2) = 1.0;
  mask(2, 1) = 1.0;
  ad::Graph g;
  const Mat out = ad::mix_mask(g.constant(gen), obs, mask).value();
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      CHECK(out(i, j) == (mask(i, j) == 1.0 ? obs(i, j) : gen(i, j)));
    }
  }
}

TEST_CASE("scalar losses match hand values") {
  ad::Graph g;
  Mat pred(2, 2);
  pred << 1.0, 2.0, 3.0, 4.0;
  Mat target(2, 2);
  target << 0.0, 0.0, 0.0, 0.0;
  CHECK(ad::mse_mean(g.constant(pred), target).value()(0, 0) ==
        doctest::Approx((1.0 + 4.0 + 9.0 + 16.0) / 4.0).epsilon(1e-15));

  Mat mask = Mat::Zero(2, 2);
  mask(0, 1) = 1.0;
  mask(1, 0) = 1.0;
  CHECK(ad::mse_masked(g.constant(pred), target, mask).value()(0, 0) ==
        doctest::Approx((4.0 + 9.0) / 2.0).epsilon(1e-15));
  CHECK_THROWS_AS(ad::mse_masked(g.constant(pred), target, Mat::Zero(2, 2)), DataError);

  Mat probs(2, 2);
  probs << 0.25, 0.75, 0.9, 0.1;
  Mat onehot(2, 2);
  onehot << 0.0, 1.0, 1.0, 0.0;
  const double expected = -(std::log(0.75) + std::log(0.9)) / 2.0;
  CHECK(ad::cross_entropy_probs(g.constant(probs), onehot).value()(0, 0) ==
        doctest::Approx(expected).epsilon(1e-14));
  CHECK(ad::cross_entropy_probs(g.constant(probs), onehot).value()(0, 0) ==
        doctest::Approx(task_loss_classification(probs, onehot)).epsilon(1e-14));
  // A zero probability is clamped, not -inf.
  Mat zeros = Mat::Zero(1, 2);
  Mat pick(1, 2);
  pick << 1.0, 0.0;
  const double clamped = ad::cross_entropy_probs(g.constant(zeros), pick).value()(0, 0);
  CHECK(std::isfinite(clamped));
  CHECK(clamped == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar roots and roots from other graphs") {
  ad::Graph g;
  ad::Var wide = g.param(Mat::Zero(1, 2));
  CHECK_THROWS_AS(g.backward(wide), ShapeError);
  ad::Graph other;
  ad::Var foreign = other.param(Mat::Zero(1, 1));
  CHECK_THROWS_AS(g.backward(foreign), DomainError);
}

TEST_CASE("gradients accumulate across reuses and skip constants") {
  Mat p0(1, 1);
  p0 << 3.0;
  ad::Graph g;
  ad::Binding binding;
  ad::Var p = binding.bind(g, p0);
  ad::Var c = g.constant(Mat::Constant(1, 1, 2.0));
  // loss = p*c + p  ->  dloss/dp = c + 1 = 3.
  ad::Var loss = ad::add(ad::hadamard(p, c), p);
  g.backward(loss);
  CHECK(p.grad()(0, 0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(c.grad().size() == 0);

  const double before = p0(0, 0);
  binding.sgd_step(0.1);
  CHECK(p0(0, 0) == doctest::Approx(before - 0.1 * 3.0).epsilon(1e-15));
}

TEST_CASE("sgd_step leaves parameters without gradient untouched") {
  Mat used(1, 1), unused(2, 2);
  used << 1.0;
  unused << 5.0, 6.0, 7.0, 8.0;
  const Mat unused_before = unused;
  ad::Graph g;
  ad::Binding binding;
  ad::Var p = binding.bind(g, used);
  binding.bind(g, unused);  // bound but never part of the loss
  g.backward(ad::hadamard(p, p));
  binding.sgd_step(0.5);
  CHECK(used(0, 0) == doctest::Approx(1.0 - 0.5 * 2.0).epsilon(1e-15));
  CHECK((unused - unused_before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("finite differences confirm every smooth op gradient") {
  Rng rng(7);
  Mat p = random_mat(3, 4, rng, 0.7);
  Mat q = random_mat(4, 3, rng, 0.7);
  Mat row = random_mat(1, 3, rng, 0.7);
  const Mat w34 = random_mat(3, 4, rng);
  const Mat w33 = random_mat(3, 3, rng);
  const Mat w43 = random_mat(4, 3, rng);

  auto check_unary = [&](const char* name, auto make) {
    LossBuilder build = [&](ad::Graph& g, ad::Binding& b) {
      return weighted_sum(g, make(g, b.bind(g, p)), w34);
    };
    INFO(name);
    CHECK(gradient_check(build) < 1e-6);
  };
  check_unary("sigmoid", [](ad::Graph&, ad::Var v) { return ad::sigmoid(v); });
  check_unary("tanh", [](ad::Graph&, ad::Var v) { return ad::tanh_v(v); });
  check_unary("softmax", [](ad::Graph&, ad::Var v) { return ad::softmax_rows_v(v); });
  check_unary("layer_norm",
              [](ad::Graph&, ad::Var v) { return ad::layer_norm_rows_v(v, 1e-5); });
  check_unary("scale", [](ad::Graph&, ad::Var v) { return ad::scale(v, -1.75); });

  LossBuilder matmul_build = [&](ad::Graph& g, ad::Binding& b) {
    return weighted_sum(g, ad::matmul(b.bind(g, p), b.bind(g, q)), w33);
  };
  CHECK(gradient_check(matmul_build) < 1e-7);

  LossBuilder affine_build = [&](ad::Graph& g, ad::Binding& b) {
    return weighted_sum(g, ad::affine(b.bind(g, p), b.bind(g, q), b.bind(g, row)), w33);
  };
  CHECK(gradient_check(affine_build) < 1e-7);

  LossBuilder transpose_build = [&](ad::Graph& g, ad::Binding& b) {
    return weighted_sum(g, ad::transpose(b.bind(g, p)), w43);
  };
  CHECK(gradient_check(transpose_build) < 1e-7);

  LossBuilder hadamard_build = [&](ad::Graph& g, ad::Binding& b) {
    ad::Var v = b.bind(g, p);
    return weighted_sum(g, ad::hadamard(v, ad::add(v, v)), w34);
  };
  CHECK(gradient_check(hadamard_build) < 1e-7);

  LossBuilder concat_slice_build = [&](ad::Graph& g, ad::Binding& b) {
    ad::Var v = b.bind(g, p);
    ad::Var joined = ad::concat_cols({v, ad::scale(v, 2.0)});
    ad::Var stacked = ad::concat_rows({joined, joined});
    return weighted_sum(g, ad::slice_cols(ad::slice_rows(stacked, 1, 3), 2, 4), w34);
  };
  CHECK(gradient_check(concat_slice_build) < 1e-7);

  LossBuilder mse_build = [&](ad::Graph& g, ad::Binding& b) {
    return ad::mse_mean(ad::tanh_v(b.bind(g, p)), w34);
  };
  CHECK(gradient_check(mse_build) < 1e-6);

  Mat mask = Mat::Zero(3, 4);
  mask(0, 0) = 1.0;
  mask(1, 2) = 1.0;
  mask(2, 3) = 1.0;
  LossBuilder mse_masked_build = [&](ad::Graph& g, ad::Binding& b) {
    return ad::mse_masked(ad::sigmoid(b.bind(g, p)), w34, mask);
  };
  CHECK(gradient_check(mse_masked_build) < 1e-6);

  LossBuilder mix_build = [&](ad::Graph& g, ad::Binding& b) {
    return ad::mse_mean(ad::mix_mask(b.bind(g, p), w34, mask), Mat::Zero(3, 4));
  };
  CHECK(gradient_check(mix_build) < 1e-6);

  Mat onehot = Mat::Zero(3, 4);
  onehot(0, 1) = 1.0;
  onehot(1, 0) = 1.0;
  onehot(2, 3) = 1.0;
  LossBuilder ce_build = [&](ad::Graph& g, ad::Binding& b) {
    return ad::cross_entropy_probs(ad::softmax_rows_v(b.bind(g, p)), onehot);
  };
  CHECK(gradient_check(ce_build) < 1e-6);
}

TEST_CASE("relu gradient checks out away from the kink") {
  Rng rng(8);
  Mat p(3, 4);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double g = rng.next_gaussian();
      p(i, j) = g + (g >= 0.0 ? 0.5 : -0.5);  // keep |p| >= 0.5 so +-h never crosses 0
    }
  }
  const Mat w = [&] {
    Rng r2(9);
    Mat m(3, 4);
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) m(i, j) = r2.next_gaussian();
    return m;
  }();
  LossBuilder build = [&](ad::Graph& g, ad::Binding& b) {
    return weighted_sum(g, ad::relu(b.bind(g, p)), w);
  };
  CHECK(gradient_check(build) < 1e-7);
}

TEST_CASE("a deep composite chain still passes the finite-difference audit") {
  Rng rng(11);
  Mat w1 = random_mat(4, 6, rng, 0.5);
  Mat b1 = random_mat(1, 6, rng, 0.1);
  Mat w2 = random_mat(6, 3, rng, 0.5);
  Mat b2 = random_mat(1, 3, rng, 0.1);
  const Mat input = random_mat(5, 4, rng);
  Mat onehot = Mat::Zero(5, 3);
  for (Eigen::Index i = 0; i < 5; ++i) onehot(i, i % 3) = 1.0;

  LossBuilder build = [&](ad::Graph& g, ad::Binding& b) {
    ad::Var x = g.constant(input);
    ad::Var h = ad::tanh_v(ad::affine(x, b.bind(g, w1), b.bind(g, b1)));
    ad::Var normed = ad::layer_norm_rows_v(h, 1e-5);
    ad::Var logits = ad::affine(normed, b.bind(g, w2), b.bind(g, b2));
    return ad::cross_entropy_probs(ad::softmax_rows_v(logits), onehot);
  };
  CHECK(gradient_check(build) < 1e-5);
}
