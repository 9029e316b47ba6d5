#include "mcdbn/completion.hpp"

#include <cmath>

#include "mcdbn/numerics.hpp"

namespace mcdbn {

void validate_batch(const ModalityBatch& batch) {
  require_same_shape(batch.values, batch.mask, "ModalityBatch values/mask");
  require_finite(batch.values, "ModalityBatch values");
  for (Eigen::Index i = 0; i < batch.mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < batch.mask.cols(); ++j) {
      const double m = batch.mask(i, j);
      if (m != 0.0 && m != 1.0) {
        throw DataError("ModalityBatch mask entry (" + std::to_string(i) + "," +
                        std::to_string(j) + ") is " + std::to_string(m) +
                        ", expected 0 or 1");
      }
    }
  }
}

SelfAttentionProj make_self_attention(Eigen::Index d, Rng& rng) {
  auto init = [&](Mat& m, double s) {
    m.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) m(i, j) = s * rng.next_gaussian();
    }
  };
  SelfAttentionProj p;
  const double unit = 1.0 / std::sqrt(static_cast<double>(d));
  // The attended input downstream is a feature-axis softmax of I (x) W_attn
  // with I in [0, 1]. A 1/sqrt(d)-scale value projection leaves that product
  // within a fraction of the softmax's linear range, so every attended row
  // hugs the uniform simplex point and the encoders see almost no variation.
  // The value projection is therefore initialized an order of magnitude
  // larger, which spreads the gate across the softmax's dynamic range;
  // queries and keys stay at unit scale to keep the scores themselves tame.
  init(p.p_q, unit);
  init(p.p_k, unit);
  init(p.p_v, 12.0 * unit);
  return p;
}

CompletionModel make_completion_model(Eigen::Index d_x, Eigen::Index d_y,
                                      const std::vector<Eigen::Index>& encoder_hidden,
                                      VisibleKind visible_kind, Rng& rng) {
  if (encoder_hidden.empty()) {
    throw ConfigError("make_completion_model: need at least one hidden width");
  }
  auto sizes_for = [&](Eigen::Index d) {
    std::vector<Eigen::Index> sizes{d};
    sizes.insert(sizes.end(), encoder_hidden.begin(), encoder_hidden.end());
    return sizes;
  };
  CompletionModel m;
  m.attn_x = make_self_attention(d_x, rng);
  m.attn_y = make_self_attention(d_y, rng);
  m.encoder_x = make_dbn(sizes_for(d_x), visible_kind, rng);
  m.encoder_y = make_dbn(sizes_for(d_y), visible_kind, rng);
  m.gen_x = make_dbn(sizes_for(d_x), visible_kind, rng);
  m.gen_y = make_dbn(sizes_for(d_y), visible_kind, rng);
  return m;
}

namespace {

const SelfAttentionProj& proj_for(const ModalityBatch& batch,
                                  const CompletionModel& model) {
  if (batch.modality_id == "x") return model.attn_x;
  if (batch.modality_id == "y") return model.attn_y;
  throw DataError("unknown modality_id '" + batch.modality_id + "'");
}

}  // namespace

Mat self_attention_weights(const ModalityBatch& batch, const CompletionModel& model) {
  const SelfAttentionProj& p = proj_for(batch, model);
  if (batch.values.cols() != p.p_q.rows()) {
    throw ShapeError("self_attention_weights: batch " + shape_str(batch.values) +
                     " does not match projection " + shape_str(p.p_q));
  }
  const Mat q = batch.values * p.p_q;
  const Mat k = batch.values * p.p_k;
  const Mat v = batch.values * p.p_v;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(p.p_q.cols()));
  const Mat scores = softmax_rows(q * k.transpose() * inv_scale);
  return scores * v;
}

Mat attended_input(const ModalityBatch& batch, const Mat& w_attn) {
  require_same_shape(batch.values, w_attn, "attended_input values/weights");
  return softmax_rows(batch.values.cwiseProduct(w_attn));
}

Mat encode_hidden(const Mat& attn, const DbnStack& encoder, Rng& rng) {
  return bernoulli_sample(transform_up(encoder, attn), rng);
}

Mat complete_modality(const Mat& h_other, const DbnStack& generator, Rng& rng,
                      bool stochastic) {
  return generate_down(generator, h_other, rng, stochastic);
}

double modal_loss(const Mat& generated, const ModalityBatch& batch) {
  require_same_shape(generated, batch.values, "modal_loss generated/batch");
  const double observed = batch.mask.sum();
  if (observed == 0.0) {
    throw DataError("modal_loss: batch has no observed entries");
  }
  const Mat diff = (generated - batch.values).cwiseProduct(batch.mask);
  return diff.squaredNorm() / observed;
}

CompletionResult run_completion(const ModalityBatch& batch_x,
                                const ModalityBatch& batch_y,
                                const CompletionModel& model, Rng& rng) {
  validate_batch(batch_x);
  validate_batch(batch_y);
  const Mat attn_x = attended_input(batch_x, self_attention_weights(batch_x, model));
  const Mat attn_y = attended_input(batch_y, self_attention_weights(batch_y, model));
  const Mat h_x = encode_hidden(attn_x, model.encoder_x, rng);
  const Mat h_y = encode_hidden(attn_y, model.encoder_y, rng);

  CompletionResult r;
  r.g_x = complete_modality(h_y, model.gen_x, rng, /*stochastic=*/false);
  r.g_y = complete_modality(h_x, model.gen_y, rng, /*stochastic=*/false);
  r.loss_x = modal_loss(r.g_x, batch_x);
  r.loss_y = modal_loss(r.g_y, batch_y);
  r.completed_x = batch_x.mask.cwiseProduct(batch_x.values) +
                  (Mat::Ones(batch_x.mask.rows(), batch_x.mask.cols()) - batch_x.mask)
                      .cwiseProduct(r.g_x);
  r.completed_y = batch_y.mask.cwiseProduct(batch_y.values) +
                  (Mat::Ones(batch_y.mask.rows(), batch_y.mask.cols()) - batch_y.mask)
                      .cwiseProduct(r.g_y);
  return r;
}

// ---- graph twins ------------------------------------------------------------

CompletionVars bind_completion(ad::Graph& g, ad::Binding& binding,
                               CompletionModel& model) {
  CompletionVars v;
  v.attn_x = SelfAttentionVars{binding.bind(g, model.attn_x.p_q),
                               binding.bind(g, model.attn_x.p_k),
                               binding.bind(g, model.attn_x.p_v)};
  v.attn_y = SelfAttentionVars{binding.bind(g, model.attn_y.p_q),
                               binding.bind(g, model.attn_y.p_k),
                               binding.bind(g, model.attn_y.p_v)};
  v.encoder_x = bind_dbn(g, binding, model.encoder_x);
  v.encoder_y = bind_dbn(g, binding, model.encoder_y);
  v.gen_x = bind_dbn(g, binding, model.gen_x);
  v.gen_y = bind_dbn(g, binding, model.gen_y);
  return v;
}

ad::Var self_attention_weights_graph(const SelfAttentionVars& vars, const Mat& values) {
  ad::Graph& g = *vars.p_q.g;
  ad::Var input = g.constant(values);
  ad::Var q = ad::matmul(input, vars.p_q);
  ad::Var k = ad::matmul(input, vars.p_k);
  ad::Var v = ad::matmul(input, vars.p_v);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(vars.p_q.value().cols()));
  ad::Var scores = ad::softmax_rows_v(ad::scale(ad::matmul(q, ad::transpose(k)),
                                                inv_scale));
  return ad::matmul(scores, v);
}

ad::Var attended_input_graph(ad::Var w_attn, const Mat& values) {
  return ad::softmax_rows_v(ad::hadamard_const(w_attn, values));
}

CompletionGraph run_completion_graph(const CompletionVars& vars,
                                     const ModalityBatch& batch_x,
                                     const ModalityBatch& batch_y) {
  validate_batch(batch_x);
  validate_batch(batch_y);
  ad::Var attn_x = attended_input_graph(
      self_attention_weights_graph(vars.attn_x, batch_x.values), batch_x.values);
  ad::Var attn_y = attended_input_graph(
      self_attention_weights_graph(vars.attn_y, batch_y.values), batch_y.values);
  ad::Var h_x = transform_up_graph(vars.encoder_x, attn_x);
  ad::Var h_y = transform_up_graph(vars.encoder_y, attn_y);

  CompletionGraph r;
  r.g_x = generate_down_graph(vars.gen_x, h_y);
  r.g_y = generate_down_graph(vars.gen_y, h_x);
  r.loss_x = ad::mse_masked(r.g_x, batch_x.values, batch_x.mask);
  r.loss_y = ad::mse_masked(r.g_y, batch_y.values, batch_y.mask);
  r.completed_x = ad::mix_mask(r.g_x, batch_x.values, batch_x.mask);
  r.completed_y = ad::mix_mask(r.g_y, batch_y.values, batch_y.mask);
  return r;
}

}  // namespace mcdbn
