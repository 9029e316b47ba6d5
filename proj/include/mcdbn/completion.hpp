#pragma once

#include <string>

#include "mcdbn/dbn.hpp"

namespace mcdbn {

// One modality's time-aligned slice. mask(t, j) = 1 means values(t, j) was
// observed; unobserved entries hold 0 after load.
struct ModalityBatch {
  Mat values;  // T x d
  Mat mask;    // T x d, entries in {0, 1}
  std::string modality_id;  // "x" or "y"
};

// Throws unless values/mask shapes agree and mask is 0/1.
void validate_batch(const ModalityBatch& batch);

// Single-head scaled dot-product self-attention over time steps.
struct SelfAttentionProj {
  Mat p_q, p_k, p_v;  // each d x d
};

SelfAttentionProj make_self_attention(Eigen::Index d, Rng& rng);

// Two encoders into a shared-width latent code plus two cross-modal
// generators; gen_x reconstructs modality x from the other modality's code.
struct CompletionModel {
  SelfAttentionProj attn_x, attn_y;
  DbnStack encoder_x, encoder_y;
  DbnStack gen_x, gen_y;  // input_dim = d_x / d_y, top_dim = latent width
};

// encoder_hidden = hidden widths above the visible layer, last entry is the
// shared latent width; generators mirror the same widths over their own
// modality's visible dim. visible_kind sets every stack's bottom layer.
CompletionModel make_completion_model(Eigen::Index d_x, Eigen::Index d_y,
                                      const std::vector<Eigen::Index>& encoder_hidden,
                                      VisibleKind visible_kind, Rng& rng);

// W_attn = softmax((I P_q)(I P_k)^T / sqrt(d)) (I P_v); T x d.
Mat self_attention_weights(const ModalityBatch& batch, const CompletionModel& model);

// Row-wise softmax over the feature axis of I ⊙ W_attn.
Mat attended_input(const ModalityBatch& batch, const Mat& w_attn);

// Binary latent code: bernoulli draws from transform_up probabilities.
Mat encode_hidden(const Mat& attn, const DbnStack& encoder, Rng& rng);

// Generated modality values in [0, 1]; stochastic mode samples between
// generator layers, deterministic mode never consumes the rng.
Mat complete_modality(const Mat& h_other, const DbnStack& generator, Rng& rng,
                      bool stochastic);

// Mean squared error over observed entries only; throws on an empty mask.
double modal_loss(const Mat& generated, const ModalityBatch& batch);

struct CompletionResult {
  Mat g_x, g_y;                  // raw generator outputs
  Mat completed_x, completed_y;  // observed values kept, gaps filled from g
  double loss_x = 0.0;
  double loss_y = 0.0;
};

// Full pass: attend both modalities, encode both, generate each modality
// from the other's code (deterministically), substitute at unobserved
// entries, and score both generations on observed support.
CompletionResult run_completion(const ModalityBatch& batch_x,
                                const ModalityBatch& batch_y,
                                const CompletionModel& model, Rng& rng);

// ---- graph twins for fine-tuning -------------------------------------------

struct SelfAttentionVars {
  ad::Var p_q, p_k, p_v;
};

struct CompletionVars {
  SelfAttentionVars attn_x, attn_y;
  DbnVars encoder_x, encoder_y;
  DbnVars gen_x, gen_y;
};

CompletionVars bind_completion(ad::Graph& g, ad::Binding& binding,
                               CompletionModel& model);

ad::Var self_attention_weights_graph(const SelfAttentionVars& vars, const Mat& values);
ad::Var attended_input_graph(ad::Var w_attn, const Mat& values);

struct CompletionGraph {
  ad::Var g_x, g_y;
  ad::Var completed_x, completed_y;
  ad::Var loss_x, loss_y;
};

// Differentiable pass: bernoulli draws are relaxed to their probabilities.
CompletionGraph run_completion_graph(const CompletionVars& vars,
                                     const ModalityBatch& batch_x,
                                     const ModalityBatch& batch_y);

}  // namespace mcdbn
