#include "mcdbn/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace mcdbn {

double rmse(const std::vector<double>& pred, const std::vector<double>& actual) {
  if (pred.size() != actual.size()) {
    throw ShapeError("rmse: lengths differ (" + std::to_string(pred.size()) + " vs " +
                     std::to_string(actual.size()) + ")");
  }
  if (pred.empty()) throw DataError("rmse: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

MapeResult mape(const std::vector<double>& pred, const std::vector<double>& actual,
                double eps) {
  if (pred.size() != actual.size()) {
    throw ShapeError("mape: lengths differ (" + std::to_string(pred.size()) + " vs " +
                     std::to_string(actual.size()) + ")");
  }
  MapeResult out;
  double sum = 0.0;
  long used = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::abs(actual[i]) > eps) {
      sum += std::abs(actual[i] - pred[i]) / std::abs(actual[i]);
      ++used;
    } else {
      ++out.excluded;
    }
  }
  if (used == 0) throw DataError("mape: every entry excluded by the eps guard");
  out.value = sum / static_cast<double>(used);
  return out;
}

F1Accuracy f1_accuracy(const std::vector<int>& pred_labels,
                       const std::vector<int>& true_labels, int classes) {
  if (pred_labels.size() != true_labels.size()) {
    throw ShapeError("f1_accuracy: lengths differ (" +
                     std::to_string(pred_labels.size()) + " vs " +
                     std::to_string(true_labels.size()) + ")");
  }
  if (pred_labels.empty()) throw DataError("f1_accuracy: empty input");
  if (classes < 2) throw ConfigError("f1_accuracy: classes must be >= 2");
  std::vector<long> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  long correct = 0;
  for (std::size_t i = 0; i < pred_labels.size(); ++i) {
    const int p = pred_labels[i], t = true_labels[i];
    if (p < 0 || p >= classes || t < 0 || t >= classes) {
      throw DataError("f1_accuracy: label outside [0, " + std::to_string(classes) +
                      ") at index " + std::to_string(i));
    }
    if (p == t) {
      ++correct;
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  auto class_f1 = [&](int c) {
    const double denom_p = static_cast<double>(tp[c] + fp[c]);
    const double denom_r = static_cast<double>(tp[c] + fn[c]);
    const double precision = denom_p > 0.0 ? tp[c] / denom_p : 0.0;
    const double recall = denom_r > 0.0 ? tp[c] / denom_r : 0.0;
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall)
                                    : 0.0;
  };
  F1Accuracy out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(pred_labels.size());
  if (classes == 2) {
    out.f1 = class_f1(1);
  } else {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) sum += class_f1(c);
    out.f1 = sum / classes;
  }
  return out;
}

std::vector<int> movement_labels(const std::vector<double>& series) {
  if (series.size() < 2) throw DataError("movement_labels: need at least 2 points");
  std::vector<int> labels(series.size() - 1);
  for (std::size_t t = 0; t + 1 < series.size(); ++t) {
    labels[t] = series[t + 1] - series[t] >= 0.0 ? 1 : 0;
  }
  return labels;
}

AlignedDataset complete_with_model(const McdbnModel& model,
                                   const AlignedDataset& data, std::uint64_t seed) {
  if (data.x.values.cols() != model.shape.d_x ||
      data.y.values.cols() != model.shape.d_y) {
    throw ShapeError("complete_with_model: dataset dims (" +
                     std::to_string(data.x.values.cols()) + ", " +
                     std::to_string(data.y.values.cols()) + ") do not match model (" +
                     std::to_string(model.shape.d_x) + ", " +
                     std::to_string(model.shape.d_y) + ")");
  }
  const MinMax mmx{model.scaling.x_min, model.scaling.x_max};
  const MinMax mmy{model.scaling.y_min, model.scaling.y_max};
  const ModalityBatch sx{apply_min_max(data.x.values, mmx).cwiseProduct(data.x.mask),
                         data.x.mask, "x"};
  const ModalityBatch sy{apply_min_max(data.y.values, mmy).cwiseProduct(data.y.mask),
                         data.y.mask, "y"};
  // Filling gaps wants the expected value under the learned conditional, not
  // one stochastic draw: the latent code is pushed through every layer as
  // probabilities (the same relaxation the training objective differentiates),
  // which is deterministic and needs no random stream.
  Rng unused(derive_seed(seed, rng_stream::kCompletion));
  const Mat probs_x =
      transform_up(model.completion.encoder_x,
                   attended_input(sx, self_attention_weights(sx, model.completion)));
  const Mat probs_y =
      transform_up(model.completion.encoder_y,
                   attended_input(sy, self_attention_weights(sy, model.completion)));
  const Mat g_x = complete_modality(probs_y, model.completion.gen_x, unused,
                                    /*stochastic=*/false);
  const Mat g_y = complete_modality(probs_x, model.completion.gen_y, unused,
                                    /*stochastic=*/false);

  AlignedDataset out = data;
  const Mat ones_x = Mat::Ones(data.x.mask.rows(), data.x.mask.cols());
  const Mat ones_y = Mat::Ones(data.y.mask.rows(), data.y.mask.cols());
  out.x.values = data.x.mask.cwiseProduct(data.x.values) +
                 (ones_x - data.x.mask).cwiseProduct(invert_min_max(g_x, mmx));
  out.y.values = data.y.mask.cwiseProduct(data.y.values) +
                 (ones_y - data.y.mask).cwiseProduct(invert_min_max(g_y, mmy));
  out.x.mask = ones_x;
  out.y.mask = ones_y;
  return out;
}

namespace {

AlignedDataset slice_dataset(const AlignedDataset& d, Eigen::Index r0, Eigen::Index n) {
  AlignedDataset out = d;
  out.timestamps.assign(d.timestamps.begin() + r0, d.timestamps.begin() + r0 + n);
  out.x.values = d.x.values.middleRows(r0, n);
  out.x.mask = d.x.mask.middleRows(r0, n);
  out.y.values = d.y.values.middleRows(r0, n);
  out.y.mask = d.y.mask.middleRows(r0, n);
  if (d.x_truth.size() != 0) out.x_truth = d.x_truth.middleRows(r0, n);
  if (d.y_truth.size() != 0) out.y_truth = d.y_truth.middleRows(r0, n);
  if (d.labels_onehot.size() != 0) out.labels_onehot = d.labels_onehot.middleRows(r0, n);
  return out;
}

Eigen::Index train_split(Eigen::Index t_steps) {
  return std::max<Eigen::Index>(1, (t_steps * 3) / 4);
}

}  // namespace

McdbnModel train_on_dataset(const AlignedDataset& observed, const TrainConfig& cfg,
                            std::vector<TraceRow>* trace) {
  const Eigen::Index t_steps = observed.x.values.rows();
  const Eigen::Index train_rows = train_split(t_steps);

  ModelShape shape = cfg.shape;
  shape.d_x = observed.x.values.cols();
  shape.d_y = observed.y.values.cols();
  if (shape.task == TaskKind::kClassification && observed.labels_onehot.size() != 0) {
    shape.classes = observed.labels_onehot.cols();
  }
  Rng init_rng(derive_seed(cfg.seed, rng_stream::kModelInit));
  McdbnModel model = build_model(shape, init_rng);

  const MinMax mmx = fit_min_max(observed.x.values, observed.x.mask, train_rows);
  const MinMax mmy = fit_min_max(observed.y.values, observed.y.mask, train_rows);
  model.scaling = ScalingParams{mmx.min, mmx.max, mmy.min, mmy.max};

  AlignedDataset train = slice_dataset(observed, 0, train_rows);
  train.x.values = apply_min_max(train.x.values, mmx).cwiseProduct(train.x.mask);
  train.y.values = apply_min_max(train.y.values, mmy).cwiseProduct(train.y.mask);
  if (train.x_truth.size() != 0) train.x_truth = apply_min_max(train.x_truth, mmx);
  if (train.y_truth.size() != 0) train.y_truth = apply_min_max(train.y_truth, mmy);

  pretrain_model(model, train, cfg);
  std::vector<TraceRow> rows = fine_tune(model, train, cfg);
  if (trace) *trace = std::move(rows);
  return model;
}

Metrics score_completed_dataset(const AlignedDataset& completed,
                                const AlignedDataset& truth_ds,
                                const AlignedDataset& observed,
                                const TrainConfig& cfg, std::uint64_t config_hash) {
  const Eigen::Index t_steps = observed.x.values.rows();
  const Eigen::Index train_rows = train_split(t_steps);

  Metrics m;
  m.seed = cfg.seed;
  m.config_hash = config_hash;

  {
    std::vector<double> rec, tru;
    auto collect = [&](const ModalityBatch& t_b, const ModalityBatch& o_b,
                       const ModalityBatch& c_b) {
      for (Eigen::Index i = 0; i < t_b.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < t_b.values.cols(); ++j) {
          if (t_b.mask(i, j) == 1.0 && o_b.mask(i, j) == 0.0) {
            rec.push_back(c_b.values(i, j));
            tru.push_back(t_b.values(i, j));
          }
        }
      }
    };
    collect(truth_ds.x, observed.x, completed.x);
    collect(truth_ds.y, observed.y, completed.y);
    if (!rec.empty()) m.completion_rmse = rmse(rec, tru);
  }

  const TaskKind task = cfg.shape.task;
  const MinMax mmx = fit_min_max(completed.x.values, completed.x.mask, train_rows);
  const MinMax mmy = fit_min_max(completed.y.values, completed.y.mask, train_rows);
  Mat features(t_steps, completed.x.values.cols() + completed.y.values.cols());
  features << apply_min_max(completed.x.values, mmx),
      apply_min_max(completed.y.values, mmy);

  const Mat& truth_x = truth_ds.x_truth.size() != 0 ? truth_ds.x_truth
                                                    : truth_ds.x.values;
  AlignedDataset target_view = truth_ds;
  target_view.x_truth = apply_min_max(truth_x, mmx);
  const TaskTargets targets = make_task_targets(target_view, task);

  DownstreamConfig dcfg;
  dcfg.seed = cfg.seed;
  dcfg.task = task;
  dcfg.classes = truth_ds.labels_onehot.size() != 0 ? truth_ds.labels_onehot.cols()
                                                    : cfg.shape.classes;
  const TaskTargets train_targets{targets.values.topRows(train_rows),
                                  targets.row_mask.topRows(train_rows)};
  // A single small recurrent scorer is a noisy judge of feature quality, so
  // the score averages a fixed ensemble of independently seeded fits. Every
  // completion method is judged by the same ensemble, and the member seeds
  // are derived from the run seed, so scoring stays deterministic.
  constexpr int kScorerEnsemble = 5;
  Mat preds = Mat::Zero(t_steps, task == TaskKind::kRegression ? 1 : dcfg.classes);
  for (int member = 0; member < kScorerEnsemble; ++member) {
    dcfg.seed = cfg.seed + static_cast<std::uint64_t>(member);
    const DownstreamResult trained =
        train_downstream(features.topRows(train_rows), train_targets, dcfg);
    preds += predict_downstream(trained.predictor, features);
  }
  preds /= static_cast<double>(kScorerEnsemble);

  if (task == TaskKind::kRegression) {
    const Eigen::Index col = truth_ds.target_col;
    double width = mmx.max(0, col) - mmx.min(0, col);
    if (width < 1e-12) width = 1.0;
    std::vector<double> p, a;
    std::vector<int> pred_move, true_move;
    for (Eigen::Index i = train_rows; i + 1 < t_steps; ++i) {
      const double pred_raw = preds(i, 0) * width + mmx.min(0, col);
      p.push_back(pred_raw);
      a.push_back(truth_x(i + 1, col));
      pred_move.push_back(pred_raw >= truth_x(i, col) ? 1 : 0);
      true_move.push_back(truth_x(i + 1, col) >= truth_x(i, col) ? 1 : 0);
    }
    m.rmse = rmse(p, a);
    const MapeResult mp = mape(p, a);
    m.mape = mp.value;
    m.mape_excluded = mp.excluded;
    const F1Accuracy fa = f1_accuracy(pred_move, true_move, 2);
    m.f1 = fa.f1;
    m.accuracy = fa.accuracy;
    m.n_samples = static_cast<long>(p.size());
  } else {
    std::vector<int> pred_labels, true_labels;
    for (Eigen::Index i = train_rows; i < t_steps; ++i) {
      Eigen::Index pl = 0, tl = 0;
      preds.row(i).maxCoeff(&pl);
      truth_ds.labels_onehot.row(i).maxCoeff(&tl);
      pred_labels.push_back(static_cast<int>(pl));
      true_labels.push_back(static_cast<int>(tl));
    }
    const F1Accuracy fa =
        f1_accuracy(pred_labels, true_labels, static_cast<int>(dcfg.classes));
    m.f1 = fa.f1;
    m.accuracy = fa.accuracy;
    m.n_samples = static_cast<long>(pred_labels.size());
  }
  return m;
}

namespace {

Metrics score_method(const std::string& method, const AlignedDataset& truth_ds,
                     const AlignedDataset& observed, const TrainConfig& cfg,
                     std::uint64_t config_hash) {
  AlignedDataset completed;
  if (method == "mcdbn") {
    const McdbnModel model = train_on_dataset(observed, cfg);
    completed = complete_with_model(model, observed, cfg.seed);
  } else {
    completed = impute_baseline(observed, impute_method_from_string(method)).data;
  }
  return score_completed_dataset(completed, truth_ds, observed, cfg, config_hash);
}

Metrics mean_metrics(const std::vector<Metrics>& rows) {
  Metrics mean;
  if (rows.empty()) return mean;
  for (const Metrics& r : rows) {
    mean.rmse += r.rmse;
    mean.mape += r.mape;
    mean.mape_excluded += r.mape_excluded;
    mean.f1 += r.f1;
    mean.accuracy += r.accuracy;
    mean.completion_rmse += r.completion_rmse;
    mean.n_samples += r.n_samples;
  }
  const double n = static_cast<double>(rows.size());
  mean.rmse /= n;
  mean.mape /= n;
  mean.f1 /= n;
  mean.accuracy /= n;
  mean.completion_rmse /= n;
  mean.seed = rows.front().seed;
  mean.config_hash = rows.front().config_hash;
  return mean;
}

}  // namespace

BenchmarkTable benchmark_run(const std::vector<std::string>& methods,
                             const SyntheticSpec& spec, const TrainConfig& cfg,
                             const MissingnessSpec& missing, int threads,
                             std::uint64_t config_hash) {
  if (methods.empty()) throw ConfigError("benchmark: need at least one method");
  for (const std::string& m : methods) {
    if (m != "mcdbn") impute_method_from_string(m);  // validates the name
  }
  const std::vector<AlignedDataset> datasets = synth_generate(spec);
  const int n_inst = spec.instruments;

  std::vector<std::vector<Metrics>> per_instrument(static_cast<std::size_t>(n_inst));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(n_inst));

  auto run_instrument = [&](int i) {
    try {
      Rng miss_rng(derive_seed(missing.seed,
                               rng_stream::kMissingnessBase +
                                   static_cast<std::uint64_t>(i)));
      const AlignedDataset observed =
          apply_missingness(datasets[static_cast<std::size_t>(i)], missing, miss_rng);
      std::vector<Metrics> row;
      for (const std::string& method : methods) {
        row.push_back(score_method(method, datasets[static_cast<std::size_t>(i)],
                                   observed, cfg, config_hash));
      }
      per_instrument[static_cast<std::size_t>(i)] = std::move(row);
    } catch (...) {
      failures[static_cast<std::size_t>(i)] = std::current_exception();
    }
  };

  const int workers = std::max(1, std::min(threads, n_inst));
  if (workers == 1) {
    for (int i = 0; i < n_inst; ++i) run_instrument(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < n_inst; i = next.fetch_add(1)) {
          run_instrument(i);
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }
  for (const std::exception_ptr& e : failures) {
    if (e) std::rethrow_exception(e);
  }

  BenchmarkTable table;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MethodResult res;
    res.method = methods[mi];
    for (int i = 0; i < n_inst; ++i) {
      res.per_instrument.push_back(per_instrument[static_cast<std::size_t>(i)][mi]);
    }
    res.mean = mean_metrics(res.per_instrument);
    table.methods.push_back(std::move(res));
  }
  return table;
}

}  // namespace mcdbn
