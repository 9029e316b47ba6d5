#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcdbn/completion.hpp"
#include "mcdbn/rng.hpp"

namespace mcdbn {

// Regular-grid modality: one row per timestamp, strictly increasing stamps.
// Timestamps are either integer indices or ISO-8601 dates (stored as days
// since 1970-01-01).
struct RawSeries {
  std::vector<std::int64_t> timestamps;
  Mat values;  // T x d, missing entries hold 0
  Mat mask;    // T x d, 1 = observed
  std::vector<std::string> names;
  bool date_stamps = false;
};

// Irregular events: sorted timestamps, duplicates allowed (several events can
// share a grid slot).
struct EventSeries {
  std::vector<std::int64_t> timestamps;
  Mat values;
  Mat mask;
  std::vector<std::string> names;
  bool date_stamps = false;
};

// "2024-01-31" -> days since epoch; plain integers pass through.
std::int64_t parse_timestamp(const std::string& text, int line);
std::string format_timestamp(std::int64_t value, bool as_date);

RawSeries load_series_csv(const std::string& path);
EventSeries load_events_csv(const std::string& path);

// Both modalities on one time grid, plus benchmark bookkeeping: pre-drop
// ground truth for masked-entry scoring and optional class labels.
struct AlignedDataset {
  std::vector<std::int64_t> timestamps;
  ModalityBatch x, y;
  std::vector<std::string> x_names, y_names;
  Mat x_truth, y_truth;  // 0x0 when unknown
  Mat labels_onehot;     // T x C, 0x0 when absent
  Eigen::Index target_col = 0;  // x column carrying the prediction target
  bool date_stamps = false;
};

// Events snap to the nearest grid stamp at or before them; grid slots with no
// event stay masked out; several events in one slot average feature-wise.
AlignedDataset align_events(const RawSeries& grid, const EventSeries& events);

enum class Mechanism { kMcar, kMar, kMnar };
enum class MissingTarget { kX, kY, kBoth };

Mechanism mechanism_from_string(const std::string& name);
std::string to_string(Mechanism mechanism);
MissingTarget missing_target_from_string(const std::string& name);
std::string to_string(MissingTarget target);

struct MissingnessSpec {
  Mechanism mechanism = Mechanism::kMcar;
  double rate = 0.0;  // in [0, 1]
  std::uint64_t seed = 1;
  MissingTarget target = MissingTarget::kY;
};

// Drops observed entries of the target modality per the mechanism; dropped
// values are zeroed and never resurrect already-missing entries. MAR scales
// drop odds with the other modality's observed row magnitude, MNAR with the
// entry's own magnitude; both calibrate a logistic intercept by bisection so
// the expected rate matches within 1e-3.
AlignedDataset apply_missingness(const AlignedDataset& data,
                                 const MissingnessSpec& spec, Rng& rng);

enum class ImputeMethod { kZero, kLocf, kNocb, kMean, kInterp, kRolling };

ImputeMethod impute_method_from_string(const std::string& name);
std::string to_string(ImputeMethod method);

struct ImputeResult {
  AlignedDataset data;  // all masks true
  std::vector<std::string> warnings;  // columns with zero observed entries
};

ImputeResult impute_baseline(const AlignedDataset& data, ImputeMethod method,
                             int rolling_window = 5);

struct SyntheticSpec {
  Eigen::Index t_steps = 400;
  Eigen::Index d_x = 4;
  Eigen::Index d_y = 6;
  int instruments = 10;
  double phi = 0.9;     // latent AR coefficient, in (-1, 1)
  double noise = 0.1;   // modality-x noise scale; y uses a fifth of it
  Eigen::Index classes = 5;
  std::uint64_t seed = 1;
};

void validate_spec(const SyntheticSpec& spec);

// Latent AR(1) with unit stationary variance drives both modalities. The y
// channels are saturating readouts tanh(b_j . z) (unit-gain directions, a
// fifth of the x noise), x columns 1.. are linear views A_j . z + noise, and
// x column 0 -- the prediction target -- is the lagged clean readout
// g(z(t-1)) + noise/2 where g(z) = mean_j tanh(b_j . z). Labels bin g(z(t))
// into equal-frequency classes. Instrument i draws from its own stream
// derived from spec.seed.
std::vector<AlignedDataset> synth_generate(const SyntheticSpec& spec);

// Per-column min/max over observed entries of the first train_rows rows.
struct MinMax {
  Mat min, max;  // 1 x d
};

MinMax fit_min_max(const Mat& values, const Mat& mask, Eigen::Index train_rows);
Mat apply_min_max(const Mat& values, const MinMax& mm);
Mat invert_min_max(const Mat& scaled, const MinMax& mm);

// CSV round-trip for datasets (timestamp column plus one column per feature;
// empty cell = missing).
void save_modalities_csv(const std::string& x_path, const std::string& y_path,
                         const AlignedDataset& data);
void save_labels_csv(const std::string& path, const AlignedDataset& data);
AlignedDataset load_dataset(const std::string& x_path, const std::string& y_path);
Mat load_labels_csv(const std::string& path, Eigen::Index classes);

}  // namespace mcdbn
