#pragma once

#include <functional>
#include <string>
#include <variant>

#include "mcdbn/completion.hpp"
#include "mcdbn/decoders.hpp"
#include "mcdbn/fusion.hpp"

namespace mcdbn {

using DecoderParams = std::variant<LstmParams, TransformerBlockParams, LinearParams>;
using DecoderVars = std::variant<LstmVars, TransformerVars, LinearVars>;

DecoderKind kind_of(const DecoderParams& params);
Eigen::Index decoder_output_dim(const DecoderParams& params);
Mat decoder_forward(const DecoderParams& params, const Mat& seq);
DecoderVars bind_decoder(ad::Graph& g, ad::Binding& binding, DecoderParams& params);
ad::Var decoder_forward_graph(const DecoderVars& vars, ad::Var seq);

enum class TaskKind { kRegression, kClassification };

TaskKind task_kind_from_string(const std::string& name);
std::string to_string(TaskKind kind);

// Affine readout over fusion features; classification adds a row softmax.
struct TaskHead {
  TaskKind kind = TaskKind::kRegression;
  Mat w;  // d_fusion x out (out = 1 for regression, class count otherwise)
  Mat b;  // 1 x out

  Eigen::Index classes() const { return w.cols(); }
};

TaskHead make_task_head(Eigen::Index d_fusion, TaskKind kind, Eigen::Index classes,
                        Rng& rng);

// Per-column min/max of the training split, used to map raw data into the
// [0, 1] visible domain and back.
struct ScalingParams {
  Mat x_min, x_max;  // 1 x d_x
  Mat y_min, y_max;  // 1 x d_y
};

struct ModelShape {
  Eigen::Index d_x = 0, d_y = 0;
  std::vector<Eigen::Index> encoder_hidden;  // last entry = shared latent width
  DecoderKind decoder_x = DecoderKind::kTransformer;
  DecoderKind decoder_y = DecoderKind::kLstm;
  Eigen::Index decoder_dim = 32;   // width of every decoder's output
  Eigen::Index decoder_heads = 4;  // transformer decoders only
  Eigen::Index heads = 4;
  Eigen::Index d_k = 8;
  Eigen::Index d_fusion = 16;
  TaskKind task = TaskKind::kRegression;
  Eigen::Index classes = 2;  // classification only
  VisibleKind visible_kind = VisibleKind::kBernoulliProb;
};

struct McdbnModel {
  ModelShape shape;
  CompletionModel completion;
  DecoderParams decoder_x, decoder_y;
  FusionParams fusion;
  TaskHead head;
  ScalingParams scaling;  // identity (min 0, max 1) until fitted
};

McdbnModel build_model(const ModelShape& shape, Rng& rng);

// Visits every parameter tensor under a stable dotted name (sorted order is
// the checkpoint contract's job, not the visitor's).
using TensorVisitor = std::function<void(const std::string&, Mat&)>;
void visit_params(McdbnModel& model, const TensorVisitor& visit);

struct PipelineOutput {
  CompletionResult completion;
  Mat mc_x, mc_y;  // decoder outputs, T x decoder_dim
  Mat fused;       // T x d_fusion
  Mat task_out;    // regression: T x 1; classification: T x classes (softmax)
};

// Complete modality rule: the side whose mask has fewer missing entries wins
// queries and keys; ties go to x.
bool x_is_complete_side(const ModalityBatch& batch_x, const ModalityBatch& batch_y);

// Full pass: completion, per-modality decoding of the completed sequences,
// cross-modal multi-head attention, fusion, task readout.
PipelineOutput forward_pipeline(const McdbnModel& model, const ModalityBatch& batch_x,
                                const ModalityBatch& batch_y, Rng& rng);

struct ModelVars {
  CompletionVars completion;
  DecoderVars decoder_x, decoder_y;
  FusionVars fusion;
  ad::Var head_w, head_b;
};

ModelVars bind_model(ad::Graph& g, ad::Binding& binding, McdbnModel& model);

struct PipelineGraph {
  CompletionGraph completion;
  ad::Var mc_x, mc_y;
  ad::Var fused;
  ad::Var task_out;
};

// Differentiable twin of forward_pipeline (bernoulli encoding relaxed to
// probabilities).
PipelineGraph forward_pipeline_graph(const ModelVars& vars, TaskKind task,
                                     const ModalityBatch& batch_x,
                                     const ModalityBatch& batch_y);

}  // namespace mcdbn
