#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mcdbn/rbm.hpp"

using namespace mcdbn;

namespace {

RbmParams zero_rbm(Eigen::Index n_v, Eigen::Index n_h,
                   VisibleKind kind = VisibleKind::kBernoulliProb) {
  RbmParams p;
  p.W = Mat::Zero(n_v, n_h);
  p.b_v = Mat::Zero(1, n_v);
  p.b_h = Mat::Zero(1, n_h);
  p.visible_kind = kind;
  return p;
}

}  // namespace

TEST_CASE("make_rbm draws weights row-major at 0.01 sigma with zero biases") {
  Rng rng(3);
  const RbmParams p = make_rbm(3, 2, VisibleKind::kGaussianStandardized, rng);
  Rng mirror(3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      CHECK(p.W(i, j) == 0.01 * mirror.next_gaussian());
    }
  }
  CHECK(p.b_v.isZero());
  CHECK(p.b_h.isZero());
  CHECK(p.visible_kind == VisibleKind::kGaussianStandardized);
  CHECK(p.n_visible() == 3);
  CHECK(p.n_hidden() == 2);
  CHECK_THROWS_AS(make_rbm(0, 2, VisibleKind::kBernoulliProb, rng), ConfigError);
}

TEST_CASE("prop_up with zero parameters is exactly one half") {
  const RbmParams p = zero_rbm(3, 4);
  const Mat out = prop_up(p, Mat::Random(5, 3).cwiseAbs());
  CHECK(out.rows() == 5);
  CHECK(out.cols() == 4);
  CHECK((out.array() == 0.5).all());
}

TEST_CASE("prop_up saturates at extreme hidden bias") {
  RbmParams p = zero_rbm(2, 3);
  p.b_h.setConstant(50.0);
  const Mat high = prop_up(p, Mat::Zero(1, 2));
  CHECK((high.array() > 1.0 - 1e-12).all());
  p.b_h.setConstant(-50.0);
  const Mat low = prop_up(p, Mat::Zero(1, 2));
  CHECK((low.array() < 1e-12).all());
}

TEST_CASE("prop_up matches the closed-form sigmoid on a hand example") {
  RbmParams p = zero_rbm(1, 1);
  p.W(0, 0) = 2.0;
  const Mat out = prop_up(p, Mat::Ones(1, 1));
  CHECK(out(0, 0) == doctest::Approx(0.8807970779778823).epsilon(1e-14));
}

TEST_CASE("prop_down respects the visible family") {
  RbmParams bern = zero_rbm(1, 1);
  bern.W(0, 0) = -1.0;
  bern.b_v(0, 0) = 1.0;
  // pre-activation: 1*(-1) + 1 = 0 -> sigma(0) = 0.5
  CHECK(prop_down(bern, Mat::Ones(1, 1))(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  RbmParams gauss = zero_rbm(2, 1, VisibleKind::kGaussianStandardized);
  gauss.b_v << 3.5, -1.25;
  const Mat mean = prop_down(gauss, Mat::Zero(4, 1));
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(mean(i, 0) == 3.5);
    CHECK(mean(i, 1) == -1.25);
  }
}

TEST_CASE("prop shape mismatches name the offending input") {
  const RbmParams p = zero_rbm(3, 2);
  CHECK_THROWS_AS(prop_up(p, Mat::Zero(1, 4)), ShapeError);
  CHECK_THROWS_AS(prop_down(p, Mat::Zero(1, 3)), ShapeError);
  CHECK_THROWS_AS(free_energy(p, Mat::Zero(1, 2)), ShapeError);
}

TEST_CASE("free energy of the zero model is -n_hidden * ln 2") {
  const RbmParams p = zero_rbm(3, 4);
  const Mat fe = free_energy(p, Mat::Zero(2, 3));
  for (Eigen::Index i = 0; i < 2; ++i) {
    CHECK(fe(i, 0) == doctest::Approx(-4.0 * std::log(2.0)).epsilon(1e-14));
  }
}

TEST_CASE("free energy matches the 1x1 closed form") {
  RbmParams p = zero_rbm(1, 1);
  p.W(0, 0) = 1.0;
  const Mat fe = free_energy(p, Mat::Ones(1, 1));
  CHECK(fe(0, 0) == doctest::Approx(-std::log(1.0 + std::exp(1.0))).epsilon(1e-14));
}

TEST_CASE("a visible bias shift moves free energy linearly") {
  Rng rng(5);
  RbmParams p = make_rbm(4, 3, VisibleKind::kBernoulliProb, rng);
  Mat v(1, 4);
  v << 0.2, 0.8, 0.0, 1.0;
  const double before = free_energy(p, v)(0, 0);
  p.b_v(0, 1) += 2.0;
  const double after = free_energy(p, v)(0, 0);
  CHECK(after - before == doctest::Approx(-2.0 * v(0, 1)).epsilon(1e-12));
}

TEST_CASE("free energy rejects gaussian visible units") {
  const RbmParams p = zero_rbm(2, 2, VisibleKind::kGaussianStandardized);
  CHECK_THROWS_AS(free_energy(p, Mat::Zero(1, 2)), DomainError);
}

TEST_CASE("reconstruction error of the zero model on all-ones is one quarter") {
  const RbmParams p = zero_rbm(3, 2);
  CHECK(reconstruction_error(p, Mat::Ones(4, 3)) ==
        doctest::Approx(0.25).epsilon(1e-15));
  CHECK(reconstruction_error(p, Mat::Constant(4, 3, 0.5)) == 0.0);
}

TEST_CASE("reconstruction error ignores row order") {
  Rng rng(6);
  const RbmParams p = make_rbm(3, 4, VisibleKind::kBernoulliProb, rng);
  Mat batch(3, 3);
  batch << 0.1, 0.9, 0.3, 0.7, 0.2, 0.5, 0.0, 1.0, 0.6;
  Mat reversed(3, 3);
  reversed << batch.row(2), batch.row(1), batch.row(0);
  CHECK(reconstruction_error(p, batch) ==
        doctest::Approx(reconstruction_error(p, reversed)).epsilon(1e-15));
}

TEST_CASE("cd_k_update mirrors the documented chain exactly") {
  Rng init(9);
  const RbmParams p = make_rbm(3, 2, VisibleKind::kBernoulliProb, init);
  Mat batch(4, 3);
  batch << 1, 0, 1, 0, 1, 0, 1, 1, 0, 0, 0, 1;
  const int k = 2;
  const double lr = 0.1;

  Rng rng(21);
  const CdUpdate got = cd_k_update(p, batch, k, lr, rng);

  // Independent replay of the same chain with a twin stream.
  Rng mirror(21);
  const double rows = 4.0;
  Mat h_data = prop_up(p, batch);
  Mat h_state = bernoulli_sample(h_data, mirror);
  Mat v_model, h_model;
  double recon = 0.0;
  for (int step = 1; step <= k; ++step) {
    v_model = prop_down(p, h_state);
    if (step == 1) recon = (batch - v_model).array().square().mean();
    h_model = prop_up(p, v_model);
    if (step < k) h_state = bernoulli_sample(h_model, mirror);
  }
  Mat w_want = p.W + (lr / rows) * (batch.transpose() * h_data -
                                    v_model.transpose() * h_model);
  Mat bv_want = p.b_v + (lr / rows) * (batch - v_model).colwise().sum();
  Mat bh_want = p.b_h + (lr / rows) * (h_data - h_model).colwise().sum();

  CHECK((got.params.W - w_want).cwiseAbs().maxCoeff() == 0.0);
  CHECK((got.params.b_v - bv_want).cwiseAbs().maxCoeff() == 0.0);
  CHECK((got.params.b_h - bh_want).cwiseAbs().maxCoeff() == 0.0);
  CHECK(got.recon_error == recon);
}

TEST_CASE("cd update with zero learning rate is a bit-identical no-op") {
  Rng init(10);
  const RbmParams p = make_rbm(4, 3, VisibleKind::kBernoulliProb, init);
  Mat batch(2, 4);
  batch << 1, 0, 0, 1, 0, 1, 1, 0;
  Rng rng(2);
  const CdUpdate got = cd_k_update(p, batch, 1, 0.0, rng);
  CHECK((got.params.W - p.W).cwiseAbs().maxCoeff() == 0.0);
  CHECK((got.params.b_v - p.b_v).cwiseAbs().maxCoeff() == 0.0);
  CHECK((got.params.b_h - p.b_h).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cd update validates its arguments") {
  const RbmParams p = zero_rbm(2, 2);
  Rng rng(1);
  Mat batch = Mat::Ones(1, 2);
  CHECK_THROWS_AS(cd_k_update(p, batch, 0, 0.1, rng), ConfigError);
  CHECK_THROWS_AS(cd_k_update(p, batch, 1, -0.1, rng), ConfigError);
  CHECK_THROWS_AS(cd_k_update(p, Mat(0, 2), 1, 0.1, rng), ShapeError);
}

TEST_CASE("repeated CD-1 lowers reconstruction error on a tiny pattern set") {
  Rng init(1);
  RbmParams p = make_rbm(4, 6, VisibleKind::kBernoulliProb, init);
  Mat patterns(4, 4);
  patterns << 1, 1, 0, 0, 0, 0, 1, 1, 1, 0, 1, 0, 0, 1, 0, 1;
  const double before = reconstruction_error(p, patterns);
  Rng rng(2);
  for (int step = 0; step < 600; ++step) {
    p = cd_k_update(p, patterns, 1, 0.2, rng).params;
  }
  const double after = reconstruction_error(p, patterns);
  CHECK(after < 0.5 * before);
}
