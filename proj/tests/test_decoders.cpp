#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mcdbn/decoders.hpp"

using namespace mcdbn;

namespace {

Mat random_seq(Eigen::Index t, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  Mat m(t, d);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.next_gaussian();
  }
  return m;
}

LstmParams zero_lstm(Eigen::Index d_in, Eigen::Index d_h) {
  Rng rng(1);
  LstmParams p = make_lstm(d_in, d_h, rng);
  p.w_xi.setZero();
  p.w_hi.setZero();
  p.w_xf.setZero();
  p.w_hf.setZero();
  p.w_xo.setZero();
  p.w_ho.setZero();
  p.w_xg.setZero();
  p.w_hg.setZero();
  return p;
}

}  // namespace

TEST_CASE("decoder kind names round-trip and reject unknowns") {
  CHECK(decoder_kind_from_string("lstm") == DecoderKind::kLstm);
  CHECK(decoder_kind_from_string("transformer") == DecoderKind::kTransformer);
  CHECK(decoder_kind_from_string("linear") == DecoderKind::kLinear);
  CHECK(to_string(DecoderKind::kLstm) == "lstm");
  CHECK(to_string(DecoderKind::kTransformer) == "transformer");
  CHECK(to_string(DecoderKind::kLinear) == "linear");
  CHECK_THROWS_AS(decoder_kind_from_string("gru"), ConfigError);
}

TEST_CASE("sinusoidal positions match the closed form") {
  const Eigen::Index t_steps = 7, dim = 6;
  const Mat pe = sinusoidal_positions(t_steps, dim);
  for (Eigen::Index t = 0; t < t_steps; ++t) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double angle = static_cast<double>(t) /
                           std::pow(10000.0, static_cast<double>(2 * (j / 2)) / dim);
      const double want = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
      CHECK(pe(t, j) == want);
    }
  }
  CHECK(pe(0, 0) == 0.0);  // sin(0)
  CHECK(pe(0, 1) == 1.0);  // cos(0)
}

TEST_CASE("zero-weight LSTM emits all-zero hidden states") {
  const LstmParams p = zero_lstm(3, 4);
  const Mat out = lstm_forward(p, random_seq(6, 3, 2));
  CHECK(out.rows() == 6);
  CHECK(out.cols() == 4);
  CHECK(out.isZero());
}

TEST_CASE("LSTM on an empty sequence returns an empty sequence") {
  Rng rng(3);
  const LstmParams p = make_lstm(3, 5, rng);
  const Mat out = lstm_forward(p, Mat(0, 3));
  CHECK(out.rows() == 0);
  CHECK(out.cols() == 5);
}

TEST_CASE("LSTM outputs are causal: a prefix of the input fixes a prefix of the output") {
  Rng rng(4);
  const LstmParams p = make_lstm(3, 4, rng);
  const Mat seq = random_seq(8, 3, 5);
  const Mat full = lstm_forward(p, seq);
  for (Eigen::Index t = 1; t < 8; ++t) {
    const Mat partial = lstm_forward(p, seq.topRows(t));
    CHECK((full.topRows(t) - partial).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("LSTM rejects a sequence of the wrong width") {
  Rng rng(5);
  const LstmParams p = make_lstm(3, 4, rng);
  CHECK_THROWS_AS(lstm_forward(p, Mat::Zero(2, 4)), ShapeError);
}

TEST_CASE("transformer with zero attention output and zero FFN is input plus positions") {
  Rng rng(6);
  TransformerBlockParams p = make_transformer(4, 4, 2, rng);
  REQUIRE_FALSE(p.in_proj.has_value());
  p.w_out.setZero();
  p.ffn_w2.setZero();
  p.ffn_b2.setZero();
  const Mat seq = random_seq(5, 4, 7);
  const Mat out = transformer_forward(p, seq);
  const Mat want = seq + sinusoidal_positions(5, 4);
  CHECK((out - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transformer without positions is permutation-equivariant") {
  Rng rng(8);
  TransformerBlockParams p = make_transformer(6, 6, 3, rng);
  p.use_positional = false;
  const Mat seq = random_seq(5, 6, 9);
  const Mat out = transformer_forward(p, seq);

  const std::vector<Eigen::Index> perm = {3, 0, 4, 1, 2};
  Mat shuffled(5, 6);
  for (Eigen::Index i = 0; i < 5; ++i) shuffled.row(i) = seq.row(perm[i]);
  const Mat out_shuffled = transformer_forward(p, shuffled);
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK((out_shuffled.row(i) - out.row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("transformer input projection appears exactly when widths differ") {
  Rng rng(10);
  const TransformerBlockParams narrow = make_transformer(3, 8, 2, rng);
  REQUIRE(narrow.in_proj.has_value());
  CHECK(narrow.in_proj->rows() == 3);
  CHECK(narrow.in_proj->cols() == 8);
  const Mat out = transformer_forward(narrow, random_seq(4, 3, 11));
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 8);

  const TransformerBlockParams square = make_transformer(8, 8, 2, rng);
  CHECK_FALSE(square.in_proj.has_value());
  CHECK_THROWS_AS(transformer_forward(square, Mat::Zero(2, 5)), ShapeError);
  CHECK_THROWS_AS(make_transformer(4, 6, 4, rng), ConfigError);
  CHECK_THROWS_AS(make_transformer(4, 6, 0, rng), ConfigError);
}

TEST_CASE("transformer FFN hidden width is four times the model width") {
  Rng rng(12);
  const TransformerBlockParams p = make_transformer(4, 4, 2, rng);
  CHECK(p.ffn_w1.rows() == 4);
  CHECK(p.ffn_w1.cols() == 16);
  CHECK(p.ffn_w2.rows() == 16);
  CHECK(p.ffn_w2.cols() == 4);
  CHECK(p.heads() == 2);
  CHECK(p.model_dim() == 4);
  CHECK(p.w_q[0].rows() == 4);
  CHECK(p.w_q[0].cols() == 2);
}

TEST_CASE("linear decoder matches the affine closed form") {
  LinearParams p;
  p.w = Mat(2, 1);
  p.w << 1.0, 1.0;
  p.b = Mat::Zero(1, 1);
  Mat seq(1, 2);
  seq << 1.0, 2.0;
  const Mat out = linear_forward(p, seq);
  CHECK(out.rows() == 1);
  CHECK(out.cols() == 1);
  CHECK(out(0, 0) == 3.0);
  CHECK_THROWS_AS(linear_forward(p, Mat::Zero(1, 3)), ShapeError);
}

TEST_CASE("graph twins with bound parameters reproduce the plain forwards") {
  Rng rng(13);
  LstmParams lstm = make_lstm(3, 4, rng);
  TransformerBlockParams tf = make_transformer(3, 6, 2, rng);
  LinearParams lin = make_linear(3, 2, rng);
  const Mat seq = random_seq(5, 3, 14);

  ad::Graph g;
  ad::Binding binding;
  const Mat lstm_graph = lstm_forward_graph(bind_lstm(g, binding, lstm),
                                            g.constant(seq)).value();
  CHECK((lstm_graph - lstm_forward(lstm, seq)).cwiseAbs().maxCoeff() == 0.0);

  const Mat tf_graph = transformer_forward_graph(bind_transformer(g, binding, tf),
                                                 g.constant(seq)).value();
  CHECK((tf_graph - transformer_forward(tf, seq)).cwiseAbs().maxCoeff() == 0.0);

  const Mat lin_graph = linear_forward_graph(bind_linear(g, binding, lin),
                                             g.constant(seq)).value();
  CHECK((lin_graph - linear_forward(lin, seq)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("decoder initializers draw row-major at 1/sqrt(fan_in)") {
  Rng rng(15);
  const LinearParams p = make_linear(4, 3, rng);
  Rng mirror(15);
  const double s = 1.0 / std::sqrt(4.0);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      CHECK(p.w(i, j) == s * mirror.next_gaussian());
    }
  }
  CHECK(p.b.isZero());
}
