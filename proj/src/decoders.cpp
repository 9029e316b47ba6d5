#include "mcdbn/decoders.hpp"

#include <cmath>

#include "mcdbn/numerics.hpp"

namespace mcdbn {

DecoderKind decoder_kind_from_string(const std::string& name) {
  if (name == "lstm") return DecoderKind::kLstm;
  if (name == "transformer") return DecoderKind::kTransformer;
  if (name == "linear") return DecoderKind::kLinear;
  throw ConfigError("unknown decoder kind '" + name + "'");
}

std::string to_string(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::kLstm:
      return "lstm";
    case DecoderKind::kTransformer:
      return "transformer";
    case DecoderKind::kLinear:
      return "linear";
  }
  return "?";
}

namespace {

// N(0, 1/fan_in) entries drawn row-major; fan_in = rows.
Mat init_weight(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = s * rng.next_gaussian();
  }
  return m;
}

}  // namespace

LstmParams make_lstm(Eigen::Index d_in, Eigen::Index d_h, Rng& rng) {
  LstmParams p;
  p.w_xi = init_weight(d_in, d_h, rng);
  p.w_hi = init_weight(d_h, d_h, rng);
  p.b_i = Mat::Zero(1, d_h);
  p.w_xf = init_weight(d_in, d_h, rng);
  p.w_hf = init_weight(d_h, d_h, rng);
  p.b_f = Mat::Zero(1, d_h);
  p.w_xo = init_weight(d_in, d_h, rng);
  p.w_ho = init_weight(d_h, d_h, rng);
  p.b_o = Mat::Zero(1, d_h);
  p.w_xg = init_weight(d_in, d_h, rng);
  p.w_hg = init_weight(d_h, d_h, rng);
  p.b_g = Mat::Zero(1, d_h);
  return p;
}

TransformerBlockParams make_transformer(Eigen::Index d_in, Eigen::Index d_m,
                                        Eigen::Index heads, Rng& rng) {
  if (heads < 1 || d_m % heads != 0) {
    throw ConfigError("make_transformer: model dim " + std::to_string(d_m) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  TransformerBlockParams p;
  if (d_in != d_m) p.in_proj = init_weight(d_in, d_m, rng);
  const Eigen::Index d_head = d_m / heads;
  for (Eigen::Index h = 0; h < heads; ++h) {
    p.w_q.push_back(init_weight(d_m, d_head, rng));
    p.w_k.push_back(init_weight(d_m, d_head, rng));
    p.w_v.push_back(init_weight(d_m, d_head, rng));
  }
  p.w_out = init_weight(d_m, d_m, rng);
  p.ffn_w1 = init_weight(d_m, 4 * d_m, rng);
  p.ffn_b1 = Mat::Zero(1, 4 * d_m);
  p.ffn_w2 = init_weight(4 * d_m, d_m, rng);
  p.ffn_b2 = Mat::Zero(1, d_m);
  return p;
}

LinearParams make_linear(Eigen::Index d_in, Eigen::Index d_out, Rng& rng) {
  LinearParams p;
  p.w = init_weight(d_in, d_out, rng);
  p.b = Mat::Zero(1, d_out);
  return p;
}

Mat sinusoidal_positions(Eigen::Index t_steps, Eigen::Index dim) {
  Mat pe(t_steps, dim);
  for (Eigen::Index t = 0; t < t_steps; ++t) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double exponent = static_cast<double>(2 * (j / 2)) / static_cast<double>(dim);
      const double angle = static_cast<double>(t) / std::pow(10000.0, exponent);
      pe(t, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

// ---- bindings ---------------------------------------------------------------

LstmVars bind_lstm(ad::Graph& g, ad::Binding& b, LstmParams& p) {
  return LstmVars{b.bind(g, p.w_xi), b.bind(g, p.w_hi), b.bind(g, p.b_i),
                  b.bind(g, p.w_xf), b.bind(g, p.w_hf), b.bind(g, p.b_f),
                  b.bind(g, p.w_xo), b.bind(g, p.w_ho), b.bind(g, p.b_o),
                  b.bind(g, p.w_xg), b.bind(g, p.w_hg), b.bind(g, p.b_g)};
}

TransformerVars bind_transformer(ad::Graph& g, ad::Binding& b,
                                 TransformerBlockParams& p) {
  TransformerVars v;
  if (p.in_proj) v.in_proj = b.bind(g, *p.in_proj);
  for (std::size_t h = 0; h < p.w_q.size(); ++h) {
    v.w_q.push_back(b.bind(g, p.w_q[h]));
    v.w_k.push_back(b.bind(g, p.w_k[h]));
    v.w_v.push_back(b.bind(g, p.w_v[h]));
  }
  v.w_out = b.bind(g, p.w_out);
  v.ffn_w1 = b.bind(g, p.ffn_w1);
  v.ffn_b1 = b.bind(g, p.ffn_b1);
  v.ffn_w2 = b.bind(g, p.ffn_w2);
  v.ffn_b2 = b.bind(g, p.ffn_b2);
  v.ln_eps = p.ln_eps;
  v.use_positional = p.use_positional;
  v.model_dim = p.model_dim();
  return v;
}

LinearVars bind_linear(ad::Graph& g, ad::Binding& b, LinearParams& p) {
  return LinearVars{b.bind(g, p.w), b.bind(g, p.b)};
}

namespace {

// Constant-leaf vars for the evaluation-only entry points, so the plain
// forward passes share one recurrence with the training graph.
LstmVars lstm_const_vars(ad::Graph& g, const LstmParams& p) {
  return LstmVars{g.constant(p.w_xi), g.constant(p.w_hi), g.constant(p.b_i),
                  g.constant(p.w_xf), g.constant(p.w_hf), g.constant(p.b_f),
                  g.constant(p.w_xo), g.constant(p.w_ho), g.constant(p.b_o),
                  g.constant(p.w_xg), g.constant(p.w_hg), g.constant(p.b_g)};
}

TransformerVars transformer_const_vars(ad::Graph& g, const TransformerBlockParams& p) {
  TransformerVars v;
  if (p.in_proj) v.in_proj = g.constant(*p.in_proj);
  for (std::size_t h = 0; h < p.w_q.size(); ++h) {
    v.w_q.push_back(g.constant(p.w_q[h]));
    v.w_k.push_back(g.constant(p.w_k[h]));
    v.w_v.push_back(g.constant(p.w_v[h]));
  }
  v.w_out = g.constant(p.w_out);
  v.ffn_w1 = g.constant(p.ffn_w1);
  v.ffn_b1 = g.constant(p.ffn_b1);
  v.ffn_w2 = g.constant(p.ffn_w2);
  v.ffn_b2 = g.constant(p.ffn_b2);
  v.ln_eps = p.ln_eps;
  v.use_positional = p.use_positional;
  v.model_dim = p.model_dim();
  return v;
}

}  // namespace

// ---- forward passes ---------------------------------------------------------

ad::Var lstm_forward_graph(const LstmVars& vars, ad::Var seq) {
  ad::Graph& g = *seq.g;
  const Eigen::Index t_steps = seq.value().rows();
  const Eigen::Index d_h = vars.w_xi.value().cols();
  if (seq.value().cols() != vars.w_xi.value().rows()) {
    throw ShapeError("lstm_forward: sequence " + shape_str(seq.value()) +
                     " does not match input dim " +
                     std::to_string(vars.w_xi.value().rows()));
  }
  ad::Var h = g.constant(Mat::Zero(1, d_h));
  ad::Var c = g.constant(Mat::Zero(1, d_h));
  std::vector<ad::Var> outputs;
  outputs.reserve(t_steps);
  for (Eigen::Index t = 0; t < t_steps; ++t) {
    ad::Var x = ad::slice_rows(seq, t, 1);
    ad::Var i = ad::sigmoid(ad::add(ad::add(ad::matmul(x, vars.w_xi),
                                            ad::matmul(h, vars.w_hi)),
                                    vars.b_i));
    ad::Var f = ad::sigmoid(ad::add(ad::add(ad::matmul(x, vars.w_xf),
                                            ad::matmul(h, vars.w_hf)),
                                    vars.b_f));
    ad::Var o = ad::sigmoid(ad::add(ad::add(ad::matmul(x, vars.w_xo),
                                            ad::matmul(h, vars.w_ho)),
                                    vars.b_o));
    ad::Var cand = ad::tanh_v(ad::add(ad::add(ad::matmul(x, vars.w_xg),
                                              ad::matmul(h, vars.w_hg)),
                                      vars.b_g));
    c = ad::add(ad::hadamard(f, c), ad::hadamard(i, cand));
    h = ad::hadamard(o, ad::tanh_v(c));
    outputs.push_back(h);
  }
  return ad::concat_rows(outputs);
}

ad::Var transformer_forward_graph(const TransformerVars& vars, ad::Var seq) {
  const Eigen::Index d_m = vars.model_dim;
  ad::Var x = seq;
  if (vars.in_proj) {
    x = ad::matmul(x, *vars.in_proj);
  } else if (seq.value().cols() != d_m) {
    throw ShapeError("transformer_forward: sequence " + shape_str(seq.value()) +
                     " does not match model dim " + std::to_string(d_m));
  }
  const Eigen::Index t_steps = x.value().rows();
  if (vars.use_positional) {
    x = ad::add_const(x, sinusoidal_positions(t_steps, d_m));
  }

  ad::Var normed = ad::layer_norm_rows_v(x, vars.ln_eps);
  const Eigen::Index heads = static_cast<Eigen::Index>(vars.w_q.size());
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_m / heads));
  std::vector<ad::Var> head_ctx;
  for (Eigen::Index hidx = 0; hidx < heads; ++hidx) {
    ad::Var q = ad::matmul(normed, vars.w_q[hidx]);
    ad::Var k = ad::matmul(normed, vars.w_k[hidx]);
    ad::Var v = ad::matmul(normed, vars.w_v[hidx]);
    ad::Var attn = ad::softmax_rows_v(ad::scale(ad::matmul(q, ad::transpose(k)),
                                                inv_scale));
    head_ctx.push_back(ad::matmul(attn, v));
  }
  ad::Var mhsa = ad::matmul(ad::concat_cols(head_ctx), vars.w_out);
  ad::Var y = ad::add(x, mhsa);

  ad::Var ffn_in = ad::layer_norm_rows_v(y, vars.ln_eps);
  ad::Var hidden = ad::relu(ad::affine(ffn_in, vars.ffn_w1, vars.ffn_b1));
  ad::Var ffn_out = ad::affine(hidden, vars.ffn_w2, vars.ffn_b2);
  return ad::add(y, ffn_out);
}

ad::Var linear_forward_graph(const LinearVars& vars, ad::Var seq) {
  if (seq.value().cols() != vars.w.value().rows()) {
    throw ShapeError("linear_forward: sequence " + shape_str(seq.value()) +
                     " does not match weight " + shape_str(vars.w.value()));
  }
  return ad::affine(seq, vars.w, vars.b);
}

Mat lstm_forward(const LstmParams& params, const Mat& seq) {
  if (seq.cols() != params.input_dim()) {
    throw ShapeError("lstm_forward: sequence " + shape_str(seq) +
                     " does not match input dim " + std::to_string(params.input_dim()));
  }
  if (seq.rows() == 0) return Mat(0, params.hidden_dim());
  ad::Graph g;
  return lstm_forward_graph(lstm_const_vars(g, params), g.constant(seq)).value();
}

Mat transformer_forward(const TransformerBlockParams& params, const Mat& seq) {
  ad::Graph g;
  return transformer_forward_graph(transformer_const_vars(g, params), g.constant(seq))
      .value();
}

Mat linear_forward(const LinearParams& params, const Mat& seq) {
  if (seq.cols() != params.w.rows()) {
    throw ShapeError("linear_forward: sequence " + shape_str(seq) +
                     " does not match weight " + shape_str(params.w));
  }
  Mat out = seq * params.w;
  out.rowwise() += params.b.row(0);
  return out;
}

}  // namespace mcdbn
