#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <vector>

#include "doctest.h"
#include "mcdbn/dbn.hpp"

using namespace mcdbn;

namespace {

Mat binary_batch(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = rng.next_uniform() < 0.5 ? 0.0 : 1.0;
    }
  }
  return m;
}

}  // namespace

TEST_CASE("make_dbn wires layer sizes and forces bernoulli above the bottom") {
  Rng rng(1);
  const DbnStack stack =
      make_dbn({5, 4, 3, 2}, VisibleKind::kGaussianStandardized, rng);
  REQUIRE(stack.layers.size() == 3);
  CHECK(stack.input_dim() == 5);
  CHECK(stack.top_dim() == 2);
  CHECK(stack.layers[0].visible_kind == VisibleKind::kGaussianStandardized);
  CHECK(stack.layers[1].visible_kind == VisibleKind::kBernoulliProb);
  CHECK(stack.layers[2].visible_kind == VisibleKind::kBernoulliProb);
  CHECK(stack.layers[0].n_visible() == 5);
  CHECK(stack.layers[0].n_hidden() == 4);
  CHECK(stack.layers[2].n_visible() == 3);
  CHECK(stack.layers[2].n_hidden() == 2);
  CHECK_THROWS_AS(make_dbn({5}, VisibleKind::kBernoulliProb, rng), ConfigError);
}

TEST_CASE("make_dbn consumes the stream exactly like sequential make_rbm calls") {
  Rng rng(7);
  const DbnStack stack = make_dbn({3, 2, 4}, VisibleKind::kBernoulliProb, rng);
  Rng mirror(7);
  const RbmParams first = make_rbm(3, 2, VisibleKind::kBernoulliProb, mirror);
  const RbmParams second = make_rbm(2, 4, VisibleKind::kBernoulliProb, mirror);
  CHECK((stack.layers[0].W - first.W).cwiseAbs().maxCoeff() == 0.0);
  CHECK((stack.layers[1].W - second.W).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transform_up composes prop_up through every layer") {
  Rng rng(2);
  const DbnStack stack = make_dbn({4, 3, 2}, VisibleKind::kBernoulliProb, rng);
  const Mat v = binary_batch(5, 4, 11);
  const Mat expected = prop_up(stack.layers[1], prop_up(stack.layers[0], v));
  CHECK((transform_up(stack, v) - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transform_up of the zero stack is a cascade of halves") {
  DbnStack stack;
  RbmParams l0;
  l0.W = Mat::Zero(3, 2);
  l0.b_v = Mat::Zero(1, 3);
  l0.b_h = Mat::Zero(1, 2);
  stack.layers.push_back(l0);
  const Mat out = transform_up(stack, binary_batch(4, 3, 5));
  CHECK((out.array() == 0.5).all());
}

TEST_CASE("single-layer pretrain replays the cd_k_update loop") {
  Rng init(4);
  const DbnStack stack = make_dbn({4, 3}, VisibleKind::kBernoulliProb, init);
  const Mat batch = binary_batch(6, 4, 12);
  const int epochs = 3, k = 1, batch_size = 4;
  const double lr = 0.1;

  Rng rng(9);
  const PretrainResult got = pretrain_greedy(stack, batch, epochs, lr, k, rng, batch_size);

  Rng mirror(9);
  RbmParams layer = stack.layers[0];
  std::vector<double> trace;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double err = 0.0;
    int n = 0;
    for (Eigen::Index r0 = 0; r0 < batch.rows(); r0 += batch_size) {
      const Eigen::Index rows = std::min<Eigen::Index>(batch_size, batch.rows() - r0);
      const CdUpdate upd = cd_k_update(layer, batch.middleRows(r0, rows), k, lr, mirror);
      layer = upd.params;
      err += upd.recon_error;
      ++n;
    }
    trace.push_back(err / n);
  }

  REQUIRE(got.trace.per_layer.size() == 1);
  REQUIRE(got.trace.per_layer[0].size() == static_cast<std::size_t>(epochs));
  for (int e = 0; e < epochs; ++e) CHECK(got.trace.per_layer[0][e] == trace[e]);
  CHECK((got.stack.layers[0].W - layer.W).cwiseAbs().maxCoeff() == 0.0);
  CHECK((got.stack.layers[0].b_v - layer.b_v).cwiseAbs().maxCoeff() == 0.0);
  CHECK((got.stack.layers[0].b_h - layer.b_h).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("greedy pretraining trains upper layers on lower-layer features") {
  Rng init(5);
  const DbnStack stack = make_dbn({4, 3, 2}, VisibleKind::kBernoulliProb, init);
  const Mat batch = binary_batch(8, 4, 13);

  Rng rng(14);
  const PretrainResult got = pretrain_greedy(stack, batch, 2, 0.05, 1, rng, 0);

  Rng mirror(14);
  RbmParams l0 = stack.layers[0];
  for (int epoch = 0; epoch < 2; ++epoch) l0 = cd_k_update(l0, batch, 1, 0.05, mirror).params;
  const Mat features = prop_up(l0, batch);
  RbmParams l1 = stack.layers[1];
  for (int epoch = 0; epoch < 2; ++epoch) {
    l1 = cd_k_update(l1, features, 1, 0.05, mirror).params;
  }
  CHECK((got.stack.layers[0].W - l0.W).cwiseAbs().maxCoeff() == 0.0);
  CHECK((got.stack.layers[1].W - l1.W).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(got.trace.per_layer.size() == 2);
  CHECK(got.trace.per_layer[1].size() == 2);
}

TEST_CASE("pretrain validates epochs and batch width") {
  Rng init(6);
  const DbnStack stack = make_dbn({3, 2}, VisibleKind::kBernoulliProb, init);
  Rng rng(1);
  CHECK_THROWS_AS(pretrain_greedy(stack, Mat::Ones(2, 3), 0, 0.1, 1, rng), ConfigError);
  CHECK_THROWS_AS(pretrain_greedy(stack, Mat::Ones(2, 4), 1, 0.1, 1, rng), ShapeError);
}

TEST_CASE("generate_down is deterministic in relaxed mode and reproducible in stochastic mode") {
  Rng init(8);
  const DbnStack stack = make_dbn({4, 3, 2}, VisibleKind::kBernoulliProb, init);
  Mat top(3, 2);
  top << 0.3, 0.7, 0.9, 0.1, 0.5, 0.5;

  Rng a(10), b(10), c(11);
  const Mat relaxed1 = generate_down(stack, top, a, false);
  const Mat relaxed2 = generate_down(stack, top, b, false);
  CHECK((relaxed1 - relaxed2).cwiseAbs().maxCoeff() == 0.0);

  // Relaxed mode never touches the stream: both rngs stay in lockstep.
  CHECK(a.next_u64() == b.next_u64());

  Rng s1(10), s2(10);
  const Mat stoch1 = generate_down(stack, top, s1, true);
  const Mat stoch2 = generate_down(stack, top, s2, true);
  CHECK((stoch1 - stoch2).cwiseAbs().maxCoeff() == 0.0);
  const Mat stoch3 = generate_down(stack, top, c, true);
  CHECK(stoch3.rows() == 3);

  // The final layer returns probabilities even in stochastic mode.
  CHECK((stoch1.array() >= 0.0).all());
  CHECK((stoch1.array() <= 1.0).all());
  CHECK_FALSE((stoch1.array() == stoch1.array().round()).all());

  CHECK_THROWS_AS(generate_down(stack, Mat::Zero(1, 3), c, false), ShapeError);
}

TEST_CASE("graph twins reproduce the relaxed forward passes") {
  Rng init(12);
  DbnStack stack = make_dbn({4, 3, 2}, VisibleKind::kBernoulliProb, init);
  const Mat v = binary_batch(5, 4, 20);
  Mat top(2, 2);
  top << 0.2, 0.8, 0.6, 0.4;

  ad::Graph g;
  ad::Binding binding;
  const DbnVars vars = bind_dbn(g, binding, stack);
  const Mat up = transform_up_graph(vars, g.constant(v)).value();
  CHECK((up - transform_up(stack, v)).cwiseAbs().maxCoeff() < 1e-14);

  Rng unused(1);
  const Mat down = generate_down_graph(vars, g.constant(top)).value();
  CHECK((down - generate_down(stack, top, unused, false)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("pretraining lowers reconstruction error in both layers of a 2-layer stack") {
  Rng init(1);
  const DbnStack stack = make_dbn({6, 8, 4}, VisibleKind::kBernoulliProb, init);
  Mat patterns(6, 6);
  patterns << 1, 1, 1, 0, 0, 0,  //
      0, 0, 0, 1, 1, 1,          //
      1, 1, 0, 0, 1, 1,          //
      0, 0, 1, 1, 0, 0,          //
      1, 0, 1, 0, 1, 0,          //
      0, 1, 0, 1, 0, 1;
  Rng rng(2);
  const PretrainResult got = pretrain_greedy(stack, patterns, 400, 0.1, 1, rng, 0);
  for (std::size_t li = 0; li < 2; ++li) {
    const auto& trace = got.trace.per_layer[li];
    REQUIRE(trace.size() == 400);
    CHECK(trace.back() < trace.front());
  }
}
