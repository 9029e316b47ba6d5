#pragma once

#include <optional>
#include <string>

#include "mcdbn/autodiff.hpp"
#include "mcdbn/matrix.hpp"
#include "mcdbn/rng.hpp"

namespace mcdbn {

enum class DecoderKind { kLstm, kTransformer, kLinear };

DecoderKind decoder_kind_from_string(const std::string& name);
std::string to_string(DecoderKind kind);

// Standard LSTM cell: input/forget/output gates and cell candidate, each with
// input weights (d_in x d_h), recurrent weights (d_h x d_h) and bias (1 x d_h).
struct LstmParams {
  Mat w_xi, w_hi, b_i;
  Mat w_xf, w_hf, b_f;
  Mat w_xo, w_ho, b_o;
  Mat w_xg, w_hg, b_g;

  Eigen::Index input_dim() const { return w_xi.rows(); }
  Eigen::Index hidden_dim() const { return w_xi.cols(); }
};

LstmParams make_lstm(Eigen::Index d_in, Eigen::Index d_h, Rng& rng);

// Pre-norm transformer block with sinusoidal positional encoding:
//  x' = in_proj(x) when input width differs from d_m, else x
//  x'' = x' + PE            (when use_positional)
//  y = x'' + MHSA(LN(x''))
//  out = y + FFN(LN(y)),   FFN hidden width 4*d_m, relu
struct TransformerBlockParams {
  std::optional<Mat> in_proj;        // d_in x d_m, present iff d_in != d_m
  std::vector<Mat> w_q, w_k, w_v;    // per head, d_m x (d_m / heads)
  Mat w_out;                         // d_m x d_m
  Mat ffn_w1, ffn_b1;                // d_m x 4*d_m, 1 x 4*d_m
  Mat ffn_w2, ffn_b2;                // 4*d_m x d_m, 1 x d_m
  double ln_eps = 1e-5;
  bool use_positional = true;

  Eigen::Index model_dim() const { return w_out.rows(); }
  Eigen::Index heads() const { return static_cast<Eigen::Index>(w_q.size()); }
};

TransformerBlockParams make_transformer(Eigen::Index d_in, Eigen::Index d_m,
                                        Eigen::Index heads, Rng& rng);

// Affine map applied per time step.
struct LinearParams {
  Mat w;  // d_in x d_out
  Mat b;  // 1 x d_out
};

LinearParams make_linear(Eigen::Index d_in, Eigen::Index d_out, Rng& rng);

// PE(t, 2i) = sin(t / 10000^(2i/d)), PE(t, 2i+1) = cos(t / 10000^(2i/d)).
Mat sinusoidal_positions(Eigen::Index t_steps, Eigen::Index dim);

// Forward passes over a T x d_in sequence (zero initial LSTM state; LSTM
// returns all T hidden states).
Mat lstm_forward(const LstmParams& params, const Mat& seq);
Mat transformer_forward(const TransformerBlockParams& params, const Mat& seq);
Mat linear_forward(const LinearParams& params, const Mat& seq);

// Graph twins for training / gradient checks.
struct LstmVars {
  ad::Var w_xi, w_hi, b_i, w_xf, w_hf, b_f, w_xo, w_ho, b_o, w_xg, w_hg, b_g;
};
struct TransformerVars {
  std::optional<ad::Var> in_proj;
  std::vector<ad::Var> w_q, w_k, w_v;
  ad::Var w_out, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  double ln_eps = 1e-5;
  bool use_positional = true;
  Eigen::Index model_dim = 0;
};
struct LinearVars {
  ad::Var w, b;
};

LstmVars bind_lstm(ad::Graph& g, ad::Binding& binding, LstmParams& params);
TransformerVars bind_transformer(ad::Graph& g, ad::Binding& binding,
                                 TransformerBlockParams& params);
LinearVars bind_linear(ad::Graph& g, ad::Binding& binding, LinearParams& params);

ad::Var lstm_forward_graph(const LstmVars& vars, ad::Var seq);
ad::Var transformer_forward_graph(const TransformerVars& vars, ad::Var seq);
ad::Var linear_forward_graph(const LinearVars& vars, ad::Var seq);

}  // namespace mcdbn
