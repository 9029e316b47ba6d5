#include "mcdbn/model.hpp"

#include <cmath>

#include "mcdbn/numerics.hpp"

namespace mcdbn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

DecoderKind kind_of(const DecoderParams& params) {
  return std::visit(
      overloaded{[](const LstmParams&) { return DecoderKind::kLstm; },
                 [](const TransformerBlockParams&) { return DecoderKind::kTransformer; },
                 [](const LinearParams&) { return DecoderKind::kLinear; }},
      params);
}

Eigen::Index decoder_output_dim(const DecoderParams& params) {
  return std::visit(
      overloaded{[](const LstmParams& p) { return p.hidden_dim(); },
                 [](const TransformerBlockParams& p) { return p.model_dim(); },
                 [](const LinearParams& p) { return p.w.cols(); }},
      params);
}

Mat decoder_forward(const DecoderParams& params, const Mat& seq) {
  return std::visit(
      overloaded{[&](const LstmParams& p) { return lstm_forward(p, seq); },
                 [&](const TransformerBlockParams& p) {
                   return transformer_forward(p, seq);
                 },
                 [&](const LinearParams& p) { return linear_forward(p, seq); }},
      params);
}

DecoderVars bind_decoder(ad::Graph& g, ad::Binding& binding, DecoderParams& params) {
  return std::visit(
      overloaded{[&](LstmParams& p) { return DecoderVars{bind_lstm(g, binding, p)}; },
                 [&](TransformerBlockParams& p) {
                   return DecoderVars{bind_transformer(g, binding, p)};
                 },
                 [&](LinearParams& p) {
                   return DecoderVars{bind_linear(g, binding, p)};
                 }},
      params);
}

ad::Var decoder_forward_graph(const DecoderVars& vars, ad::Var seq) {
  return std::visit(
      overloaded{[&](const LstmVars& v) { return lstm_forward_graph(v, seq); },
                 [&](const TransformerVars& v) {
                   return transformer_forward_graph(v, seq);
                 },
                 [&](const LinearVars& v) { return linear_forward_graph(v, seq); }},
      vars);
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "regression") return TaskKind::kRegression;
  if (name == "classification") return TaskKind::kClassification;
  throw ConfigError("unknown task kind '" + name + "'");
}

std::string to_string(TaskKind kind) {
  return kind == TaskKind::kRegression ? "regression" : "classification";
}

TaskHead make_task_head(Eigen::Index d_fusion, TaskKind kind, Eigen::Index classes,
                        Rng& rng) {
  if (kind == TaskKind::kClassification && classes < 2) {
    throw ConfigError("make_task_head: classification needs >= 2 classes, got " +
                      std::to_string(classes));
  }
  const Eigen::Index out = kind == TaskKind::kRegression ? 1 : classes;
  const double s = 1.0 / std::sqrt(static_cast<double>(d_fusion));
  TaskHead h;
  h.kind = kind;
  h.w.resize(d_fusion, out);
  for (Eigen::Index i = 0; i < d_fusion; ++i) {
    for (Eigen::Index j = 0; j < out; ++j) h.w(i, j) = s * rng.next_gaussian();
  }
  h.b = Mat::Zero(1, out);
  return h;
}

namespace {

DecoderParams make_decoder(DecoderKind kind, Eigen::Index d_in, Eigen::Index d_out,
                           Eigen::Index heads, Rng& rng) {
  switch (kind) {
    case DecoderKind::kLstm:
      return make_lstm(d_in, d_out, rng);
    case DecoderKind::kTransformer:
      return make_transformer(d_in, d_out, heads, rng);
    case DecoderKind::kLinear:
      return make_linear(d_in, d_out, rng);
  }
  throw ConfigError("make_decoder: bad kind");
}

void validate_shape(const ModelShape& s) {
  if (s.d_x < 1 || s.d_y < 1) throw ConfigError("model shape: modality dims must be >= 1");
  if (s.encoder_hidden.empty()) {
    throw ConfigError("model shape: encoder_hidden must not be empty");
  }
  for (Eigen::Index w : s.encoder_hidden) {
    if (w < 1) throw ConfigError("model shape: encoder widths must be >= 1");
  }
  if (s.decoder_dim < 1 || s.heads < 1 || s.d_k < 1 || s.d_fusion < 1) {
    throw ConfigError("model shape: decoder_dim, heads, d_k, d_fusion must be >= 1");
  }
  if (s.decoder_heads < 1) throw ConfigError("model shape: decoder_heads must be >= 1");
}

}  // namespace

McdbnModel build_model(const ModelShape& shape, Rng& rng) {
  validate_shape(shape);
  McdbnModel m;
  m.shape = shape;
  m.completion = make_completion_model(shape.d_x, shape.d_y, shape.encoder_hidden,
                                       shape.visible_kind, rng);
  m.decoder_x = make_decoder(shape.decoder_x, shape.d_x, shape.decoder_dim,
                             shape.decoder_heads, rng);
  m.decoder_y = make_decoder(shape.decoder_y, shape.d_y, shape.decoder_dim,
                             shape.decoder_heads, rng);
  m.fusion = make_fusion(shape.decoder_dim, shape.decoder_dim, shape.heads, shape.d_k,
                         shape.decoder_dim, shape.decoder_dim, shape.d_fusion, rng);
  m.head = make_task_head(shape.d_fusion, shape.task, shape.classes, rng);
  // The pipeline's readout starts at zero so the first task gradients are
  // bounded by the target scale; a random head multiplied by fresh fusion
  // features produces step-one spikes that destabilize plain SGD at useful
  // learning rates. Standalone heads (e.g. the downstream scorer) keep the
  // random start because their feature scales are settled before training.
  m.head.w.setZero();
  m.scaling.x_min = Mat::Zero(1, shape.d_x);
  m.scaling.x_max = Mat::Ones(1, shape.d_x);
  m.scaling.y_min = Mat::Zero(1, shape.d_y);
  m.scaling.y_max = Mat::Ones(1, shape.d_y);
  return m;
}

namespace {

void visit_dbn(DbnStack& stack, const std::string& prefix,
               const TensorVisitor& visit) {
  for (std::size_t i = 0; i < stack.layers.size(); ++i) {
    const std::string base = prefix + ".L" + std::to_string(i);
    visit(base + ".W", stack.layers[i].W);
    visit(base + ".b_v", stack.layers[i].b_v);
    visit(base + ".b_h", stack.layers[i].b_h);
  }
}

void visit_decoder(DecoderParams& params, const std::string& prefix,
                   const TensorVisitor& visit) {
  std::visit(
      overloaded{
          [&](LstmParams& p) {
            visit(prefix + ".w_xi", p.w_xi);
            visit(prefix + ".w_hi", p.w_hi);
            visit(prefix + ".b_i", p.b_i);
            visit(prefix + ".w_xf", p.w_xf);
            visit(prefix + ".w_hf", p.w_hf);
            visit(prefix + ".b_f", p.b_f);
            visit(prefix + ".w_xo", p.w_xo);
            visit(prefix + ".w_ho", p.w_ho);
            visit(prefix + ".b_o", p.b_o);
            visit(prefix + ".w_xg", p.w_xg);
            visit(prefix + ".w_hg", p.w_hg);
            visit(prefix + ".b_g", p.b_g);
          },
          [&](TransformerBlockParams& p) {
            if (p.in_proj) visit(prefix + ".in_proj", *p.in_proj);
            for (std::size_t h = 0; h < p.w_q.size(); ++h) {
              const std::string hb = prefix + ".H" + std::to_string(h);
              visit(hb + ".w_q", p.w_q[h]);
              visit(hb + ".w_k", p.w_k[h]);
              visit(hb + ".w_v", p.w_v[h]);
            }
            visit(prefix + ".w_out", p.w_out);
            visit(prefix + ".ffn_w1", p.ffn_w1);
            visit(prefix + ".ffn_b1", p.ffn_b1);
            visit(prefix + ".ffn_w2", p.ffn_w2);
            visit(prefix + ".ffn_b2", p.ffn_b2);
          },
          [&](LinearParams& p) {
            visit(prefix + ".w", p.w);
            visit(prefix + ".b", p.b);
          }},
      params);
}

}  // namespace

void visit_params(McdbnModel& model, const TensorVisitor& visit) {
  visit("completion.attn_x.p_q", model.completion.attn_x.p_q);
  visit("completion.attn_x.p_k", model.completion.attn_x.p_k);
  visit("completion.attn_x.p_v", model.completion.attn_x.p_v);
  visit("completion.attn_y.p_q", model.completion.attn_y.p_q);
  visit("completion.attn_y.p_k", model.completion.attn_y.p_k);
  visit("completion.attn_y.p_v", model.completion.attn_y.p_v);
  visit_dbn(model.completion.encoder_x, "completion.encoder_x", visit);
  visit_dbn(model.completion.encoder_y, "completion.encoder_y", visit);
  visit_dbn(model.completion.gen_x, "completion.gen_x", visit);
  visit_dbn(model.completion.gen_y, "completion.gen_y", visit);
  visit_decoder(model.decoder_x, "decoder_x", visit);
  visit_decoder(model.decoder_y, "decoder_y", visit);
  for (std::size_t h = 0; h < model.fusion.w_q.size(); ++h) {
    const std::string hb = "fusion.H" + std::to_string(h);
    visit(hb + ".w_q", model.fusion.w_q[h]);
    visit(hb + ".w_k", model.fusion.w_k[h]);
    visit(hb + ".w_v", model.fusion.w_v[h]);
  }
  visit("fusion.w_out", model.fusion.w_out);
  visit("fusion.map_w", model.fusion.map_w);
  visit("fusion.map_b", model.fusion.map_b);
  visit("fusion.proj_w", model.fusion.proj_w);
  visit("fusion.proj_b", model.fusion.proj_b);
  visit("head.w", model.head.w);
  visit("head.b", model.head.b);
  visit("scaling.x_min", model.scaling.x_min);
  visit("scaling.x_max", model.scaling.x_max);
  visit("scaling.y_min", model.scaling.y_min);
  visit("scaling.y_max", model.scaling.y_max);
}

bool x_is_complete_side(const ModalityBatch& batch_x, const ModalityBatch& batch_y) {
  const double missing_x = static_cast<double>(batch_x.mask.size()) - batch_x.mask.sum();
  const double missing_y = static_cast<double>(batch_y.mask.size()) - batch_y.mask.sum();
  return missing_x <= missing_y;
}

PipelineOutput forward_pipeline(const McdbnModel& model, const ModalityBatch& batch_x,
                                const ModalityBatch& batch_y, Rng& rng) {
  PipelineOutput out;
  out.completion = run_completion(batch_x, batch_y, model.completion, rng);
  out.mc_x = decoder_forward(model.decoder_x, out.completion.completed_x);
  out.mc_y = decoder_forward(model.decoder_y, out.completion.completed_y);
  const bool x_complete = x_is_complete_side(batch_x, batch_y);
  const Mat& complete_feats = x_complete ? out.mc_x : out.mc_y;
  const Mat& missing_feats = x_complete ? out.mc_y : out.mc_x;
  const Mat multi_attn = multi_head(complete_feats, missing_feats, model.fusion);
  out.fused = fuse(multi_attn, out.mc_x, out.mc_y, model.fusion);
  Mat readout = out.fused * model.head.w;
  readout.rowwise() += model.head.b.row(0);
  out.task_out = model.head.kind == TaskKind::kClassification ? softmax_rows(readout)
                                                              : readout;
  return out;
}

ModelVars bind_model(ad::Graph& g, ad::Binding& binding, McdbnModel& model) {
  ModelVars v{bind_completion(g, binding, model.completion),
              bind_decoder(g, binding, model.decoder_x),
              bind_decoder(g, binding, model.decoder_y),
              bind_fusion(g, binding, model.fusion),
              binding.bind(g, model.head.w),
              binding.bind(g, model.head.b)};
  return v;
}

PipelineGraph forward_pipeline_graph(const ModelVars& vars, TaskKind task,
                                     const ModalityBatch& batch_x,
                                     const ModalityBatch& batch_y) {
  PipelineGraph out;
  out.completion = run_completion_graph(vars.completion, batch_x, batch_y);
  out.mc_x = decoder_forward_graph(vars.decoder_x, out.completion.completed_x);
  out.mc_y = decoder_forward_graph(vars.decoder_y, out.completion.completed_y);
  const bool x_complete = x_is_complete_side(batch_x, batch_y);
  ad::Var complete_feats = x_complete ? out.mc_x : out.mc_y;
  ad::Var missing_feats = x_complete ? out.mc_y : out.mc_x;
  ad::Var multi_attn = multi_head_graph(vars.fusion, complete_feats, missing_feats);
  out.fused = fuse_graph(vars.fusion, multi_attn, out.mc_x, out.mc_y);
  ad::Var readout = ad::affine(out.fused, vars.head_w, vars.head_b);
  out.task_out = task == TaskKind::kClassification ? ad::softmax_rows_v(readout)
                                                   : readout;
  return out;
}

}  // namespace mcdbn
