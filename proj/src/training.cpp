#include "mcdbn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include "mcdbn/numerics.hpp"

namespace mcdbn {

double task_loss_classification(const Mat& probs, const Mat& onehot) {
  require_same_shape(probs, onehot, "task_loss_classification probs/labels");
  if (probs.rows() == 0) throw DataError("task_loss_classification: empty input");
  for (Eigen::Index i = 0; i < onehot.rows(); ++i) {
    double ones = 0.0;
    for (Eigen::Index j = 0; j < onehot.cols(); ++j) {
      const double v = onehot(i, j);
      if (v != 0.0 && v != 1.0) {
        throw DataError("task_loss_classification: label row " + std::to_string(i) +
                        " is not one-hot");
      }
      ones += v;
    }
    if (ones != 1.0) {
      throw DataError("task_loss_classification: label row " + std::to_string(i) +
                      " is not one-hot");
    }
  }
  double loss = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      if (onehot(i, j) == 1.0) {
        loss -= std::log(std::max(probs(i, j), 1e-12));
      }
    }
  }
  return loss / static_cast<double>(probs.rows());
}

double task_loss_regression(const Mat& pred, const Mat& actual) {
  require_same_shape(pred, actual, "task_loss_regression pred/actual");
  if (pred.size() == 0) throw DataError("task_loss_regression: empty input");
  return (pred - actual).squaredNorm() / static_cast<double>(pred.size());
}

double total_loss(double modal_x, double modal_y, double task,
                  const LossSwitches& switches) {
  double sum = task;
  if (switches.use_modal_x) sum += modal_x;
  if (switches.use_modal_y) sum += modal_y;
  return sum;
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.lr < 0.0) throw ConfigError("train config: lr must be >= 0");
  if (cfg.epochs < 0) throw ConfigError("train config: epochs must be >= 0");
  if (cfg.batch_size < 0) throw ConfigError("train config: batch_size must be >= 0");
  if (cfg.cd_k < 1) throw ConfigError("train config: cd_k must be >= 1");
  if (cfg.pretrain_epochs < 0) {
    throw ConfigError("train config: pretrain_epochs must be >= 0");
  }
  if (cfg.pretrain_lr < 0.0) throw ConfigError("train config: pretrain_lr must be >= 0");
}

TaskTargets make_task_targets(const AlignedDataset& data, TaskKind task) {
  const Eigen::Index t_steps = data.x.values.rows();
  TaskTargets out;
  if (task == TaskKind::kClassification) {
    if (data.labels_onehot.size() == 0) {
      throw DataError("classification task needs labels");
    }
    if (data.labels_onehot.rows() != t_steps) {
      throw DataError("label rows " + std::to_string(data.labels_onehot.rows()) +
                      " do not match series length " + std::to_string(t_steps));
    }
    out.values = data.labels_onehot;
    out.row_mask = Mat::Ones(t_steps, 1);
    return out;
  }
  const bool have_truth = data.x_truth.size() != 0;
  const Mat& src = have_truth ? data.x_truth : data.x.values;
  if (data.target_col < 0 || data.target_col >= src.cols()) {
    throw DataError("target column " + std::to_string(data.target_col) +
                    " out of range");
  }
  out.values = Mat::Zero(t_steps, 1);
  out.row_mask = Mat::Zero(t_steps, 1);
  for (Eigen::Index i = 0; i + 1 < t_steps; ++i) {
    if (!have_truth && data.x.mask(i + 1, data.target_col) != 1.0) continue;
    out.values(i, 0) = src(i + 1, data.target_col);
    out.row_mask(i, 0) = 1.0;
  }
  return out;
}

void pretrain_model(McdbnModel& model, const AlignedDataset& scaled,
                    const TrainConfig& cfg) {
  validate_config(cfg);
  Rng rng(derive_seed(cfg.seed, rng_stream::kPretrain));
  const Mat attended_x =
      attended_input(scaled.x, self_attention_weights(scaled.x, model.completion));
  const Mat attended_y =
      attended_input(scaled.y, self_attention_weights(scaled.y, model.completion));
  auto train = [&](DbnStack& stack, const Mat& batch) {
    stack = pretrain_greedy(stack, batch, cfg.pretrain_epochs, cfg.pretrain_lr,
                            cfg.cd_k, rng, cfg.batch_size)
                .stack;
  };
  train(model.completion.encoder_x, attended_x);
  train(model.completion.encoder_y, attended_y);
  train(model.completion.gen_x, scaled.x.values);
  train(model.completion.gen_y, scaled.y.values);
}

namespace {

ModalityBatch slice_batch(const ModalityBatch& batch, Eigen::Index r0,
                          Eigen::Index n) {
  return ModalityBatch{batch.values.middleRows(r0, n), batch.mask.middleRows(r0, n),
                       batch.modality_id};
}

}  // namespace

std::vector<TraceRow> fine_tune(McdbnModel& model, const AlignedDataset& scaled,
                                const TrainConfig& cfg) {
  validate_config(cfg);
  const Eigen::Index t_steps = scaled.x.values.rows();
  if (t_steps == 0) throw DataError("fine_tune: empty dataset");
  const TaskTargets targets = make_task_targets(scaled, model.head.kind);

  Rng rng(derive_seed(cfg.seed, rng_stream::kFineTune));
  const Eigen::Index bs = cfg.batch_size <= 0
                              ? t_steps
                              : std::min<Eigen::Index>(cfg.batch_size, t_steps);
  std::vector<Eigen::Index> starts;
  for (Eigen::Index s = 0; s < t_steps; s += bs) starts.push_back(s);

  std::vector<TraceRow> trace;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<Eigen::Index> order = starts;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_u64() % i]);  // one draw per swap
    }
    TraceRow row;
    row.epoch = epoch;
    for (Eigen::Index start : order) {
      const Eigen::Index len = std::min(bs, t_steps - start);
      const ModalityBatch bx = slice_batch(scaled.x, start, len);
      const ModalityBatch by = slice_batch(scaled.y, start, len);
      const Mat tvals = targets.values.middleRows(start, len);
      const Mat tmask = targets.row_mask.middleRows(start, len);

      ad::Graph g;
      ad::Binding binding;
      ModelVars vars = bind_model(g, binding, model);
      PipelineGraph out = forward_pipeline_graph(vars, model.head.kind, bx, by);
      std::optional<ad::Var> l_task;
      if (model.head.kind == TaskKind::kClassification) {
        l_task = ad::cross_entropy_probs(out.task_out, tvals);
      } else if (tmask.sum() > 0.0) {
        l_task = ad::mse_masked(out.task_out, tvals, tmask);
      }
      ad::Var total = l_task ? *l_task : g.constant(Mat::Zero(1, 1));
      if (cfg.switches.use_modal_x) total = ad::add(total, out.completion.loss_x);
      if (cfg.switches.use_modal_y) total = ad::add(total, out.completion.loss_y);

      const double total_v = total.value()(0, 0);
      if (!std::isfinite(total_v)) {
        throw NumericError("fine_tune: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch start " +
                           std::to_string(start));
      }
      row.total += total_v;
      row.modal_x += out.completion.loss_x.value()(0, 0);
      row.modal_y += out.completion.loss_y.value()(0, 0);
      row.task += l_task ? l_task->value()(0, 0) : 0.0;

      g.backward(total);
      binding.sgd_step(cfg.lr);
    }
    const double n_batches = static_cast<double>(order.size());
    row.total /= n_batches;
    row.modal_x /= n_batches;
    row.modal_y /= n_batches;
    row.task /= n_batches;
    trace.push_back(row);
  }
  return trace;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  out << "epoch,loss_total,loss_modal_x,loss_modal_y,loss_task\n";
  for (const TraceRow& row : trace) {
    out << row.epoch << ',' << row.total << ',' << row.modal_x << ',' << row.modal_y
        << ',' << row.task << '\n';
  }
}

double gradient_check(const LossBuilder& build, double h) {
  if (h <= 0.0) throw ConfigError("gradient_check: h must be > 0");
  ad::Graph g;
  ad::Binding binding;
  ad::Var loss = build(g, binding);
  require_shape(loss.value(), 1, 1, "gradient_check loss");
  g.backward(loss);

  // Freeze analytic gradients before perturbing the shared parameter storage.
  std::vector<Mat> analytic;
  std::vector<Mat*> targets;
  for (const auto& entry : binding.entries) {
    const Mat& gr = entry.var.grad();
    analytic.push_back(gr.size() != 0
                           ? gr
                           : Mat::Zero(entry.target->rows(), entry.target->cols()));
    targets.push_back(entry.target);
  }

  auto eval = [&]() {
    ad::Graph g2;
    ad::Binding b2;
    return build(g2, b2).value()(0, 0);
  };

  double max_rel = 0.0;
  for (std::size_t p = 0; p < targets.size(); ++p) {
    Mat& param = *targets[p];
    for (Eigen::Index i = 0; i < param.rows(); ++i) {
      for (Eigen::Index j = 0; j < param.cols(); ++j) {
        const double orig = param(i, j);
        param(i, j) = orig + h;
        const double f_plus = eval();
        param(i, j) = orig - h;
        const double f_minus = eval();
        param(i, j) = orig;
        const double numeric = (f_plus - f_minus) / (2.0 * h);
        const double a = analytic[p](i, j);
        const double rel =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  return max_rel;
}

double gradient_check_directional(const LossBuilder& build, double h) {
  if (h <= 0.0) throw ConfigError("gradient_check_directional: h must be > 0");
  ad::Graph g;
  ad::Binding binding;
  ad::Var loss = build(g, binding);
  require_shape(loss.value(), 1, 1, "gradient_check loss");
  g.backward(loss);

  std::vector<Mat> grads, originals;
  std::vector<Mat*> targets;
  double norm_sq = 0.0;
  for (const auto& entry : binding.entries) {
    const Mat& gr = entry.var.grad();
    grads.push_back(gr.size() != 0 ? gr
                                   : Mat::Zero(entry.target->rows(), entry.target->cols()));
    norm_sq += grads.back().squaredNorm();
    originals.push_back(*entry.target);
    targets.push_back(entry.target);
  }
  if (norm_sq == 0.0) return 0.0;
  const double norm = std::sqrt(norm_sq);

  auto eval_at = [&](double offset) {
    for (std::size_t p = 0; p < targets.size(); ++p)
      *targets[p] = originals[p] + (offset / norm) * grads[p];
    ad::Graph g2;
    ad::Binding b2;
    return build(g2, b2).value()(0, 0);
  };
  const double f_plus = eval_at(h);
  const double f_minus = eval_at(-h);
  for (std::size_t p = 0; p < targets.size(); ++p) *targets[p] = originals[p];

  const double numeric = (f_plus - f_minus) / (2.0 * h);
  return std::abs(norm - numeric) / std::max({norm, std::abs(numeric), 1e-8});
}

namespace {

Mat suite_randn(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 0.5) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.next_gaussian();
  return m;
}

ModalityBatch suite_batch(const std::string& id, Eigen::Index rows, Eigen::Index cols,
                          Rng& rng) {
  ModalityBatch batch;
  batch.modality_id = id;
  batch.mask = Mat(rows, cols);
  batch.values = Mat(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      batch.mask(i, j) = rng.next_uniform() < 0.75 ? 1.0 : 0.0;
      batch.values(i, j) = batch.mask(i, j) * rng.next_uniform();
    }
  }
  batch.mask(0, 0) = 1.0;  // the modal loss needs non-empty observed support
  return batch;
}

// Fresh stacks start near zero, which drives their true gradients below the
// finite-difference noise floor; audit them at trained-scale magnitudes.
void randomize_stacks(CompletionModel& model, Rng& rng) {
  for (DbnStack* stack :
       {&model.encoder_x, &model.encoder_y, &model.gen_x, &model.gen_y}) {
    for (RbmParams& layer : stack->layers) {
      layer.W = suite_randn(layer.W.rows(), layer.W.cols(), rng, 0.8);
      layer.b_v = suite_randn(1, layer.b_v.cols(), rng, 0.3);
      layer.b_h = suite_randn(1, layer.b_h.cols(), rng, 0.3);
    }
  }
}

}  // namespace

std::vector<GradientReport> gradient_suite(std::uint64_t seed) {
  std::vector<GradientReport> reports;
  auto run = [&](const std::string& name, const LossBuilder& build) {
    reports.push_back(GradientReport{name, gradient_check(build)});
  };

  {
    Rng rng(derive_seed(seed, 11));
    LinearParams params = make_linear(3, 4, rng);
    const Mat seq = suite_randn(5, 3, rng);
    const Mat target = suite_randn(5, 4, rng);
    run("decoder_linear", [&](ad::Graph& g, ad::Binding& b) {
      LinearVars vars = bind_linear(g, b, params);
      return ad::mse_mean(linear_forward_graph(vars, g.constant(seq)), target);
    });
  }
  {
    Rng rng(derive_seed(seed, 12));
    LstmParams params = make_lstm(3, 4, rng);
    const Mat seq = suite_randn(6, 3, rng);
    const Mat target = suite_randn(6, 4, rng);
    run("decoder_lstm", [&](ad::Graph& g, ad::Binding& b) {
      LstmVars vars = bind_lstm(g, b, params);
      return ad::mse_mean(lstm_forward_graph(vars, g.constant(seq)), target);
    });
  }
  {
    Rng rng(derive_seed(seed, 13));
    TransformerBlockParams params = make_transformer(3, 8, 2, rng);
    const Mat seq = suite_randn(5, 3, rng);
    const Mat target = suite_randn(5, 8, rng);
    run("decoder_transformer", [&](ad::Graph& g, ad::Binding& b) {
      TransformerVars vars = bind_transformer(g, b, params);
      return ad::mse_mean(transformer_forward_graph(vars, g.constant(seq)), target);
    });
  }
  {
    Rng rng(derive_seed(seed, 14));
    FusionParams params = make_fusion(4, 3, 2, 3, 4, 3, 5, rng);
    const Mat complete_feats = suite_randn(5, 4, rng);
    const Mat missing_feats = suite_randn(5, 3, rng);
    const Mat target = suite_randn(5, 5, rng);
    run("fusion", [&](ad::Graph& g, ad::Binding& b) {
      FusionVars vars = bind_fusion(g, b, params);
      ad::Var attn = multi_head_graph(vars, g.constant(complete_feats),
                                      g.constant(missing_feats));
      ad::Var fused =
          fuse_graph(vars, attn, g.constant(complete_feats), g.constant(missing_feats));
      return ad::mse_mean(fused, target);
    });
  }
  {
    Rng rng(derive_seed(seed, 15));
    CompletionModel model =
        make_completion_model(3, 4, {5, 3}, VisibleKind::kBernoulliProb, rng);
    randomize_stacks(model, rng);
    const ModalityBatch batch_x = suite_batch("x", 6, 3, rng);
    const ModalityBatch batch_y = suite_batch("y", 6, 4, rng);
    run("completion", [&](ad::Graph& g, ad::Binding& b) {
      CompletionVars vars = bind_completion(g, b, model);
      CompletionGraph cg = run_completion_graph(vars, batch_x, batch_y);
      return ad::add(cg.loss_x, cg.loss_y);
    });
  }
  {
    Rng rng(derive_seed(seed, 16));
    TaskHead head = make_task_head(4, TaskKind::kRegression, 2, rng);
    const Mat features = suite_randn(6, 4, rng);
    const Mat target = suite_randn(6, 1, rng);
    Mat mask = Mat::Ones(6, 1);
    mask(2, 0) = 0.0;
    run("task_regression", [&](ad::Graph& g, ad::Binding& b) {
      ad::Var pred =
          ad::affine(g.constant(features), b.bind(g, head.w), b.bind(g, head.b));
      return ad::mse_masked(pred, target, mask);
    });
  }
  {
    Rng rng(derive_seed(seed, 17));
    TaskHead head = make_task_head(4, TaskKind::kClassification, 3, rng);
    const Mat features = suite_randn(6, 4, rng);
    Mat onehot = Mat::Zero(6, 3);
    for (Eigen::Index i = 0; i < 6; ++i)
      onehot(i, static_cast<Eigen::Index>(rng.next_u64() % 3)) = 1.0;
    run("task_classification", [&](ad::Graph& g, ad::Binding& b) {
      ad::Var logits =
          ad::affine(g.constant(features), b.bind(g, head.w), b.bind(g, head.b));
      return ad::cross_entropy_probs(ad::softmax_rows_v(logits), onehot);
    });
  }
  {
    Rng rng(derive_seed(seed, 18));
    ModelShape shape;
    shape.d_x = 3;
    shape.d_y = 4;
    shape.encoder_hidden = {4, 3};
    shape.decoder_x = DecoderKind::kTransformer;
    shape.decoder_y = DecoderKind::kLstm;
    shape.decoder_dim = 4;
    shape.decoder_heads = 2;
    shape.heads = 2;
    shape.d_k = 3;
    shape.d_fusion = 4;
    shape.task = TaskKind::kRegression;
    McdbnModel model = build_model(shape, rng);
    visit_params(model, [&](const std::string& name, Mat& m) {
      if (name.rfind("scaling.", 0) == 0) return;
      m = suite_randn(m.rows(), m.cols(), rng, 0.7);
    });
    const ModalityBatch batch_x = suite_batch("x", 5, 3, rng);
    const ModalityBatch batch_y = suite_batch("y", 5, 4, rng);
    const Mat target = suite_randn(5, 1, rng);
    Mat mask = Mat::Ones(5, 1);
    mask(4, 0) = 0.0;
    // Per-entry differences on a composite this deep sit below truncation
    // noise; the slope along the gradient direction is the checkable signal.
    const auto build = [&](ad::Graph& g, ad::Binding& b) {
      ModelVars vars = bind_model(g, b, model);
      PipelineGraph pg = forward_pipeline_graph(vars, shape.task, batch_x, batch_y);
      ad::Var task = ad::mse_masked(pg.task_out, target, mask);
      return ad::add(ad::add(pg.completion.loss_x, pg.completion.loss_y), task);
    };
    reports.push_back(GradientReport{"pipeline", gradient_check_directional(build)});
  }
  return reports;
}

DownstreamResult train_downstream(const Mat& features, const TaskTargets& targets,
                                  const DownstreamConfig& cfg) {
  if (features.rows() != targets.values.rows()) {
    throw ShapeError("train_downstream: features " + shape_str(features) +
                     " and targets " + shape_str(targets.values) +
                     " row counts differ");
  }
  if (features.rows() == 0) throw DataError("train_downstream: empty dataset");
  if (cfg.hidden < 1 || cfg.epochs < 0 || cfg.lr < 0.0) {
    throw ConfigError("downstream config: hidden >= 1, epochs >= 0, lr >= 0 required");
  }
  if (cfg.task == TaskKind::kRegression && targets.row_mask.sum() == 0.0) {
    throw DataError("train_downstream: no usable regression targets");
  }

  Rng rng(derive_seed(cfg.seed, rng_stream::kDownstream));
  DownstreamResult out{
      DownstreamPredictor{make_lstm(features.cols(), cfg.hidden, rng),
                          make_task_head(cfg.hidden, cfg.task, cfg.classes, rng)},
      {}};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Graph g;
    ad::Binding binding;
    LstmVars lv = bind_lstm(g, binding, out.predictor.lstm);
    ad::Var w = binding.bind(g, out.predictor.head.w);
    ad::Var b = binding.bind(g, out.predictor.head.b);
    ad::Var hidden = lstm_forward_graph(lv, g.constant(features));
    ad::Var readout = ad::affine(hidden, w, b);
    ad::Var loss = cfg.task == TaskKind::kClassification
                       ? ad::cross_entropy_probs(ad::softmax_rows_v(readout),
                                                 targets.values)
                       : ad::mse_masked(readout, targets.values, targets.row_mask);
    const double v = loss.value()(0, 0);
    if (!std::isfinite(v)) {
      throw NumericError("train_downstream: non-finite loss at epoch " +
                         std::to_string(epoch));
    }
    out.loss_trace.push_back(v);
    g.backward(loss);
    binding.sgd_step(cfg.lr);
  }
  return out;
}

Mat predict_downstream(const DownstreamPredictor& predictor, const Mat& features) {
  const Mat hidden = lstm_forward(predictor.lstm, features);
  Mat readout = hidden * predictor.head.w;
  readout.rowwise() += predictor.head.b.row(0);
  return predictor.head.kind == TaskKind::kClassification ? softmax_rows(readout)
                                                          : readout;
}

}  // namespace mcdbn
