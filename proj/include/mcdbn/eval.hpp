#pragma once

#include "mcdbn/training.hpp"

namespace mcdbn {

double rmse(const std::vector<double>& pred, const std::vector<double>& actual);

struct MapeResult {
  double value = 0.0;
  long excluded = 0;  // entries skipped because |actual| <= eps
};

MapeResult mape(const std::vector<double>& pred, const std::vector<double>& actual,
                double eps = 1e-8);

struct F1Accuracy {
  double f1 = 0.0;
  double accuracy = 0.0;
};

// Binary (classes = 2): F1 of class 1. Multiclass: macro-averaged F1.
F1Accuracy f1_accuracy(const std::vector<int>& pred_labels,
                       const std::vector<int>& true_labels, int classes);

// label_t = 1 iff series[t+1] - series[t] >= 0; length T-1.
std::vector<int> movement_labels(const std::vector<double>& series);

struct Metrics {
  double rmse = 0.0;
  double mape = 0.0;
  long mape_excluded = 0;
  double f1 = 0.0;
  double accuracy = 0.0;
  double completion_rmse = 0.0;  // masked-entry recovery error, raw units
  long n_samples = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

struct MethodResult {
  std::string method;
  std::vector<Metrics> per_instrument;
  Metrics mean;
};

struct BenchmarkTable {
  std::vector<MethodResult> methods;
};

// Fills gaps via the trained model: scale with the model's stored stats,
// complete, unscale; observed entries stay verbatim and all masks end true.
AlignedDataset complete_with_model(const McdbnModel& model,
                                   const AlignedDataset& data, std::uint64_t seed);

// Trains an MC-DBN on the first 75% of rows of one observed dataset and
// returns it (scaling stats fitted on that split).
McdbnModel train_on_dataset(const AlignedDataset& observed, const TrainConfig& cfg,
                            std::vector<TraceRow>* trace = nullptr);

// Downstream fair-comparison score of an already-completed dataset against
// the pre-drop truth: trains the shared predictor on the first 75% of rows
// and reports held-out metrics plus masked-entry recovery error.
Metrics score_completed_dataset(const AlignedDataset& completed,
                                const AlignedDataset& truth_ds,
                                const AlignedDataset& observed,
                                const TrainConfig& cfg, std::uint64_t config_hash);

// For each method x instrument: synthesize, drop entries, complete, train the
// shared downstream predictor, score on the held-out last quarter. Methods:
// zero|locf|nocb|mean|interp|rolling|mcdbn. Instruments may run on `threads`
// workers; results are independent of the worker count.
BenchmarkTable benchmark_run(const std::vector<std::string>& methods,
                             const SyntheticSpec& spec, const TrainConfig& cfg,
                             const MissingnessSpec& missing, int threads,
                             std::uint64_t config_hash);

}  // namespace mcdbn
