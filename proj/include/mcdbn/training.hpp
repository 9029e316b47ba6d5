#pragma once

#include "mcdbn/data.hpp"
#include "mcdbn/model.hpp"

namespace mcdbn {

// Mean cross-entropy with probabilities clamped to >= 1e-12 before the log.
// Label rows must be one-hot.
double task_loss_classification(const Mat& probs, const Mat& onehot);

// Mean squared error over all entries.
double task_loss_regression(const Mat& pred, const Mat& actual);

struct LossSwitches {
  bool use_modal_x = true;
  bool use_modal_y = true;
};

// Sum of the task loss and the enabled modal losses.
double total_loss(double modal_x, double modal_y, double task,
                  const LossSwitches& switches);

struct TrainConfig {
  std::uint64_t seed = 1;
  double lr = 0.01;
  int epochs = 20;
  int batch_size = 64;  // 0 = full batch
  int cd_k = 1;
  int pretrain_epochs = 15;
  double pretrain_lr = 0.05;
  LossSwitches switches;
  ModelShape shape;
};

void validate_config(const TrainConfig& cfg);

// Per-row task targets. Regression: the next value of the x target column
// (ground truth when present, observed values otherwise); rows without a
// usable target are masked out. Classification: the dataset's one-hot labels.
struct TaskTargets {
  Mat values;    // T x 1 or T x C
  Mat row_mask;  // T x 1
};

TaskTargets make_task_targets(const AlignedDataset& data, TaskKind task);

struct TraceRow {
  int epoch = 0;
  double total = 0.0, modal_x = 0.0, modal_y = 0.0, task = 0.0;
};

// Greedy CD pretraining of the encoder and generator stacks: encoders on
// attended inputs, generators on the observed scaled values.
void pretrain_model(McdbnModel& model, const AlignedDataset& scaled,
                    const TrainConfig& cfg);

// Mini-batch SGD on the composite loss over contiguous row slices, shuffled
// per epoch from the seed. Mutates the model, never the dataset.
std::vector<TraceRow> fine_tune(McdbnModel& model, const AlignedDataset& scaled,
                                const TrainConfig& cfg);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

// Rebuilds the loss through `build` for every +-h element perturbation and
// compares central differences against the tape gradients. Returns the max
// relative error with denominator max(|analytic|, |numeric|, 1e-8).
using LossBuilder = std::function<ad::Var(ad::Graph&, ad::Binding&)>;
double gradient_check(const LossBuilder& build, double h = 1e-5);

// Directional variant for deep composites, where per-entry differences
// drown in truncation noise on structurally tiny coordinates: perturbs all
// parameters along the normalized gradient direction and compares the slope
// against the gradient norm.
double gradient_check_directional(const LossBuilder& build, double h = 1e-5);

struct GradientReport {
  std::string name;
  double max_rel_error = 0.0;
};

// Finite-difference audit of every differentiable path on small seeded
// shapes: the three decoders, fusion, the relaxed completion pass, both task
// losses, and the end-to-end pipeline loss.
std::vector<GradientReport> gradient_suite(std::uint64_t seed);

// Fair-comparison downstream predictor: one LSTM layer plus an affine head,
// identical architecture and seed no matter which completion produced the
// features.
struct DownstreamPredictor {
  LstmParams lstm;
  TaskHead head;
};

struct DownstreamConfig {
  Eigen::Index hidden = 24;
  int epochs = 240;
  double lr = 0.05;
  std::uint64_t seed = 1;
  TaskKind task = TaskKind::kRegression;
  Eigen::Index classes = 2;
};

struct DownstreamResult {
  DownstreamPredictor predictor;
  std::vector<double> loss_trace;
};

// Full-batch gradient descent on the task loss over the given feature rows.
DownstreamResult train_downstream(const Mat& features, const TaskTargets& targets,
                                  const DownstreamConfig& cfg);

Mat predict_downstream(const DownstreamPredictor& predictor, const Mat& features);

}  // namespace mcdbn
