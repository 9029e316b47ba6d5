#include "mcdbn/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mcdbn {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

bool is_integer(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

bool looks_like_date(const std::string& s) {
  return s.size() == 10 && s[4] == '-' && s[7] == '-';
}

double parse_number(const std::string& cell, int line, std::size_t col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw DataError("line " + std::to_string(line) + ", column " +
                    std::to_string(col + 1) + ": non-numeric cell '" + cell + "'");
  }
  return v;
}

struct CsvTable {
  std::vector<std::int64_t> timestamps;
  Mat values;
  Mat mask;
  std::vector<std::string> names;
  bool date_stamps = false;
};

CsvTable load_csv(const std::string& path, bool strictly_increasing) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "': empty file");
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "timestamp") {
    throw DataError("'" + path + "': header must start with 'timestamp'");
  }
  if (header.size() < 2) {
    throw DataError("'" + path + "': need at least one feature column");
  }
  CsvTable t;
  t.names.assign(header.begin() + 1, header.end());
  const std::size_t d = t.names.size();

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> masks;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != d + 1) {
      throw DataError("'" + path + "' line " + std::to_string(line_no) + ": expected " +
                      std::to_string(d + 1) + " cells, got " +
                      std::to_string(cells.size()));
    }
    const std::int64_t ts = parse_timestamp(cells[0], line_no);
    if (!t.timestamps.empty()) {
      if (strictly_increasing && ts <= t.timestamps.back()) {
        throw DataError("'" + path + "' line " + std::to_string(line_no) +
                        ": timestamp not strictly increasing");
      }
      if (!strictly_increasing && ts < t.timestamps.back()) {
        throw DataError("'" + path + "' line " + std::to_string(line_no) +
                        ": timestamps not sorted");
      }
    }
    if (t.timestamps.empty()) t.date_stamps = looks_like_date(cells[0]);
    t.timestamps.push_back(ts);
    std::vector<double> vals(d, 0.0), msk(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      if (cells[j + 1].empty()) continue;
      vals[j] = parse_number(cells[j + 1], line_no, j + 1);
      msk[j] = 1.0;
    }
    rows.push_back(std::move(vals));
    masks.push_back(std::move(msk));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  t.values = Mat::Zero(n, static_cast<Eigen::Index>(d));
  t.mask = Mat::Zero(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
      t.values(i, j) = rows[i][j];
      t.mask(i, j) = masks[i][j];
    }
  }
  return t;
}

}  // namespace

std::int64_t parse_timestamp(const std::string& text, int line) {
  const std::string s = trim(text);
  if (is_integer(s)) return std::strtoll(s.c_str(), nullptr, 10);
  if (looks_like_date(s)) {
    const std::string ys = s.substr(0, 4), ms = s.substr(5, 2), ds = s.substr(8, 2);
    if (is_integer(ys) && is_integer(ms) && is_integer(ds)) {
      const long y = std::strtol(ys.c_str(), nullptr, 10);
      const long m = std::strtol(ms.c_str(), nullptr, 10);
      const long d = std::strtol(ds.c_str(), nullptr, 10);
      if (m >= 1 && m <= 12 && d >= 1 && d <= 31) {
        return days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
      }
    }
  }
  throw DataError("line " + std::to_string(line) + ": bad timestamp '" + text + "'");
}

std::string format_timestamp(std::int64_t value, bool as_date) {
  if (!as_date) return std::to_string(value);
  std::int64_t y;
  unsigned m, d;
  civil_from_days(value, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u", static_cast<long long>(y), m, d);
  return buf;
}

RawSeries load_series_csv(const std::string& path) {
  CsvTable t = load_csv(path, /*strictly_increasing=*/true);
  return RawSeries{std::move(t.timestamps), std::move(t.values), std::move(t.mask),
                   std::move(t.names), t.date_stamps};
}

EventSeries load_events_csv(const std::string& path) {
  CsvTable t = load_csv(path, /*strictly_increasing=*/false);
  return EventSeries{std::move(t.timestamps), std::move(t.values), std::move(t.mask),
                     std::move(t.names), t.date_stamps};
}

AlignedDataset align_events(const RawSeries& grid, const EventSeries& events) {
  const Eigen::Index t_steps = static_cast<Eigen::Index>(grid.timestamps.size());
  const Eigen::Index d_y = static_cast<Eigen::Index>(events.names.size());
  Mat sums = Mat::Zero(t_steps, d_y);
  Mat counts = Mat::Zero(t_steps, d_y);

  std::size_t aligned = 0;
  for (std::size_t k = 0; k < events.timestamps.size(); ++k) {
    auto it = std::upper_bound(grid.timestamps.begin(), grid.timestamps.end(),
                               events.timestamps[k]);
    if (it == grid.timestamps.begin()) continue;  // before the grid starts
    const Eigen::Index row =
        static_cast<Eigen::Index>(std::distance(grid.timestamps.begin(), it)) - 1;
    ++aligned;
    for (Eigen::Index j = 0; j < d_y; ++j) {
      if (events.mask(static_cast<Eigen::Index>(k), j) == 1.0) {
        sums(row, j) += events.values(static_cast<Eigen::Index>(k), j);
        counts(row, j) += 1.0;
      }
    }
  }
  if (!events.timestamps.empty() && aligned == 0) {
    throw DataError("align_events: no event overlaps the grid range");
  }

  AlignedDataset out;
  out.timestamps = grid.timestamps;
  out.date_stamps = grid.date_stamps;
  out.x = ModalityBatch{grid.values, grid.mask, "x"};
  out.x_names = grid.names;
  out.y_names = events.names;
  Mat y_values = Mat::Zero(t_steps, d_y);
  Mat y_mask = Mat::Zero(t_steps, d_y);
  for (Eigen::Index i = 0; i < t_steps; ++i) {
    for (Eigen::Index j = 0; j < d_y; ++j) {
      if (counts(i, j) > 0.0) {
        y_values(i, j) = sums(i, j) / counts(i, j);
        y_mask(i, j) = 1.0;
      }
    }
  }
  out.y = ModalityBatch{std::move(y_values), std::move(y_mask), "y"};
  return out;
}

Mechanism mechanism_from_string(const std::string& name) {
  if (name == "mcar") return Mechanism::kMcar;
  if (name == "mar") return Mechanism::kMar;
  if (name == "mnar") return Mechanism::kMnar;
  throw ConfigError("unknown missingness mechanism '" + name + "'");
}

std::string to_string(Mechanism mechanism) {
  switch (mechanism) {
    case Mechanism::kMcar:
      return "mcar";
    case Mechanism::kMar:
      return "mar";
    case Mechanism::kMnar:
      return "mnar";
  }
  return "?";
}

MissingTarget missing_target_from_string(const std::string& name) {
  if (name == "x") return MissingTarget::kX;
  if (name == "y") return MissingTarget::kY;
  if (name == "both") return MissingTarget::kBoth;
  throw ConfigError("unknown missingness target '" + name + "'");
}

std::string to_string(MissingTarget target) {
  switch (target) {
    case MissingTarget::kX:
      return "x";
    case MissingTarget::kY:
      return "y";
    case MissingTarget::kBoth:
      return "both";
  }
  return "?";
}

namespace {

// Per-column mean and population std over observed entries.
void observed_stats(const Mat& values, const Mat& mask, Mat& mean, Mat& std_dev) {
  const Eigen::Index d = values.cols();
  mean = Mat::Zero(1, d);
  std_dev = Mat::Ones(1, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double sum = 0.0, count = 0.0;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (mask(i, j) == 1.0) {
        sum += values(i, j);
        count += 1.0;
      }
    }
    if (count == 0.0) continue;
    const double mu = sum / count;
    double var = 0.0;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (mask(i, j) == 1.0) var += (values(i, j) - mu) * (values(i, j) - mu);
    }
    mean(0, j) = mu;
    std_dev(0, j) = std::sqrt(var / count);
  }
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Finds a with mean(logistic(a + s)) = rate over the candidate scores.
double calibrate_intercept(const std::vector<double>& scores, double rate) {
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 200; ++it) {
    const double a = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double s : scores) mean += logistic(a + s);
    mean /= static_cast<double>(scores.size());
    if (std::abs(mean - rate) < 1e-9) return a;
    (mean < rate ? lo : hi) = a;
  }
  return 0.5 * (lo + hi);
}

// Drop probability per entry of the target modality. Rows beyond the score
// vector reuse score 0.
void drop_entries(ModalityBatch& target, const std::vector<double>& entry_probs,
                  Rng& rng) {
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < target.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < target.values.cols(); ++j, ++idx) {
      const double u = rng.next_uniform();  // consumed for every entry
      if (target.mask(i, j) == 1.0 && u < entry_probs[static_cast<std::size_t>(idx)]) {
        target.mask(i, j) = 0.0;
        target.values(i, j) = 0.0;
      }
    }
  }
}

void apply_to_modality(ModalityBatch& target, const ModalityBatch& driver,
                       const MissingnessSpec& spec, Rng& rng) {
  const Eigen::Index rows = target.values.rows();
  const Eigen::Index cols = target.values.cols();
  const std::size_t n = static_cast<std::size_t>(rows * cols);
  std::vector<double> probs(n, 0.0);

  if (spec.rate == 0.0) return;

  if (spec.mechanism == Mechanism::kMcar) {
    std::fill(probs.begin(), probs.end(), spec.rate);
    drop_entries(target, probs, rng);
    return;
  }
  if (spec.rate >= 1.0) {
    std::fill(probs.begin(), probs.end(), 1.0);
    drop_entries(target, probs, rng);
    return;
  }

  std::vector<double> scores(n, 0.0);
  if (spec.mechanism == Mechanism::kMar) {
    Mat mean, std_dev;
    observed_stats(driver.values, driver.mask, mean, std_dev);
    for (Eigen::Index i = 0; i < rows; ++i) {
      double row_score = 0.0, count = 0.0;
      for (Eigen::Index j = 0; j < driver.values.cols(); ++j) {
        if (driver.mask(i, j) == 1.0 && std_dev(0, j) > 1e-12) {
          row_score += std::abs((driver.values(i, j) - mean(0, j)) / std_dev(0, j));
          count += 1.0;
        }
      }
      const double s = count > 0.0 ? row_score / count : 0.0;
      for (Eigen::Index j = 0; j < cols; ++j) {
        scores[static_cast<std::size_t>(i * cols + j)] = s;
      }
    }
  } else {  // MNAR: the entry's own magnitude
    Mat mean, std_dev;
    observed_stats(target.values, target.mask, mean, std_dev);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        const double s = std_dev(0, j) > 1e-12
                             ? std::abs((target.values(i, j) - mean(0, j)) / std_dev(0, j))
                             : 0.0;
        scores[static_cast<std::size_t>(i * cols + j)] = s;
      }
    }
  }

  // Calibrate over observed entries only (the ones that can actually drop).
  std::vector<double> candidate_scores;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (target.mask(i, j) == 1.0) {
        candidate_scores.push_back(scores[static_cast<std::size_t>(i * cols + j)]);
      }
    }
  }
  if (candidate_scores.empty()) return;
  const double a = calibrate_intercept(candidate_scores, spec.rate);
  for (std::size_t k = 0; k < n; ++k) probs[k] = logistic(a + scores[k]);
  drop_entries(target, probs, rng);
}

}  // namespace

AlignedDataset apply_missingness(const AlignedDataset& data,
                                 const MissingnessSpec& spec, Rng& rng) {
  if (spec.rate < 0.0 || spec.rate > 1.0) {
    throw ConfigError("missingness rate " + std::to_string(spec.rate) +
                      " outside [0, 1]");
  }
  AlignedDataset out = data;
  // x first, then y; drivers are the untouched input modalities.
  if (spec.target == MissingTarget::kX || spec.target == MissingTarget::kBoth) {
    apply_to_modality(out.x, data.y, spec, rng);
  }
  if (spec.target == MissingTarget::kY || spec.target == MissingTarget::kBoth) {
    apply_to_modality(out.y, data.x, spec, rng);
  }
  return out;
}

ImputeMethod impute_method_from_string(const std::string& name) {
  if (name == "zero") return ImputeMethod::kZero;
  if (name == "locf") return ImputeMethod::kLocf;
  if (name == "nocb") return ImputeMethod::kNocb;
  if (name == "mean") return ImputeMethod::kMean;
  if (name == "interp") return ImputeMethod::kInterp;
  if (name == "rolling") return ImputeMethod::kRolling;
  throw ConfigError("unknown imputation method '" + name + "'");
}

std::string to_string(ImputeMethod method) {
  switch (method) {
    case ImputeMethod::kZero:
      return "zero";
    case ImputeMethod::kLocf:
      return "locf";
    case ImputeMethod::kNocb:
      return "nocb";
    case ImputeMethod::kMean:
      return "mean";
    case ImputeMethod::kInterp:
      return "interp";
    case ImputeMethod::kRolling:
      return "rolling";
  }
  return "?";
}

namespace {

void fill_column(Mat& values, Mat& mask, Eigen::Index j, ImputeMethod method,
                 int window, const std::string& name,
                 std::vector<std::string>& warnings) {
  const Eigen::Index t_steps = values.rows();
  std::vector<Eigen::Index> observed;
  for (Eigen::Index i = 0; i < t_steps; ++i) {
    if (mask(i, j) == 1.0) observed.push_back(i);
  }
  if (observed.empty()) {
    for (Eigen::Index i = 0; i < t_steps; ++i) values(i, j) = 0.0;
    warnings.push_back("column '" + name + "': no observed entries, filled with 0");
    return;
  }
  double mean = 0.0;
  for (Eigen::Index i : observed) mean += values(i, j);
  mean /= static_cast<double>(observed.size());

  for (Eigen::Index i = 0; i < t_steps; ++i) {
    if (mask(i, j) == 1.0) continue;
    switch (method) {
      case ImputeMethod::kZero:
        values(i, j) = 0.0;
        break;
      case ImputeMethod::kMean:
        values(i, j) = mean;
        break;
      case ImputeMethod::kLocf: {
        auto it = std::upper_bound(observed.begin(), observed.end(), i);
        values(i, j) = it == observed.begin() ? mean : values(*(it - 1), j);
        break;
      }
      case ImputeMethod::kNocb: {
        auto it = std::lower_bound(observed.begin(), observed.end(), i);
        values(i, j) = it == observed.end() ? mean : values(*it, j);
        break;
      }
      case ImputeMethod::kInterp: {
        auto it = std::lower_bound(observed.begin(), observed.end(), i);
        if (it == observed.begin()) {
          values(i, j) = values(observed.front(), j);
        } else if (it == observed.end()) {
          values(i, j) = values(observed.back(), j);
        } else {
          const Eigen::Index p = *(it - 1), q = *it;
          const double w = static_cast<double>(i - p) / static_cast<double>(q - p);
          values(i, j) = values(p, j) + w * (values(q, j) - values(p, j));
        }
        break;
      }
      case ImputeMethod::kRolling: {
        auto it = std::upper_bound(observed.begin(), observed.end(), i);
        if (it == observed.begin()) {
          values(i, j) = mean;
        } else {
          double sum = 0.0;
          int count = 0;
          for (auto r = it; r != observed.begin() && count < window;) {
            --r;
            sum += values(*r, j);
            ++count;
          }
          values(i, j) = sum / count;
        }
        break;
      }
    }
  }
  for (Eigen::Index i = 0; i < t_steps; ++i) mask(i, j) = 1.0;
}

void fill_modality(ModalityBatch& batch, const std::vector<std::string>& names,
                   ImputeMethod method, int window,
                   std::vector<std::string>& warnings) {
  for (Eigen::Index j = 0; j < batch.values.cols(); ++j) {
    const std::string name = j < static_cast<Eigen::Index>(names.size())
                                 ? names[static_cast<std::size_t>(j)]
                                 : batch.modality_id + std::to_string(j);
    fill_column(batch.values, batch.mask, j, method, window, name, warnings);
  }
}

}  // namespace

ImputeResult impute_baseline(const AlignedDataset& data, ImputeMethod method,
                             int rolling_window) {
  if (method == ImputeMethod::kRolling && rolling_window < 1) {
    throw ConfigError("rolling window must be >= 1, got " +
                      std::to_string(rolling_window));
  }
  ImputeResult out;
  out.data = data;
  fill_modality(out.data.x, data.x_names, method, rolling_window, out.warnings);
  fill_modality(out.data.y, data.y_names, method, rolling_window, out.warnings);
  return out;
}

void validate_spec(const SyntheticSpec& spec) {
  if (spec.t_steps < 8) throw ConfigError("synthetic spec: T must be >= 8");
  if (spec.phi <= -1.0 || spec.phi >= 1.0) {
    throw ConfigError("synthetic spec: AR coefficient must lie in (-1, 1)");
  }
  if (spec.d_x < 1 || spec.d_y < 1) {
    throw ConfigError("synthetic spec: modality dims must be >= 1");
  }
  if (spec.instruments < 1) throw ConfigError("synthetic spec: instruments must be >= 1");
  if (spec.classes < 2) throw ConfigError("synthetic spec: classes must be >= 2");
  if (spec.noise < 0.0) throw ConfigError("synthetic spec: noise must be >= 0");
}

namespace {

// Equal-frequency class labels for a series (rank order, ties broken by index).
std::vector<Eigen::Index> quantile_labels(const std::vector<double>& series,
                                          Eigen::Index classes) {
  const std::size_t n = series.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return series[a] < series[b]; });
  std::vector<Eigen::Index> labels(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    labels[order[pos]] = static_cast<Eigen::Index>(
        (pos * static_cast<std::size_t>(classes)) / n);
  }
  return labels;
}

}  // namespace

std::vector<AlignedDataset> synth_generate(const SyntheticSpec& spec) {
  validate_spec(spec);
  std::vector<AlignedDataset> out;
  out.reserve(static_cast<std::size_t>(spec.instruments));

  for (int inst = 0; inst < spec.instruments; ++inst) {
    Rng rng(derive_seed(spec.seed, rng_stream::kSynthBase +
                                       static_cast<std::uint64_t>(inst)));
    const Eigen::Index t_steps = spec.t_steps;

    // Draw order: A row-major, B row-major, then per step
    // (2 latent, d_x x-noise, d_y y-noise) draws.
    //
    // Generative design: a 2-d AR(1) latent z drives both modalities. The y
    // channels are near-noiseless saturating readouts tanh(b_j . z), and the
    // quantity every task is built on is their clean average
    //   g(z) = mean_j tanh(b_j . z),
    // a nonlinear function of z. The x channels (columns 1..) are plain linear
    // views A_j . z, so x identifies the latent but exposes g only through a
    // nonlinearity a downstream learner has to discover, while any observed y
    // row hands g over directly. The regression target column is the lagged
    // readout x_0(t) = g(z(t-1)) + noise, i.e. predicting the next target
    // value means estimating g(z(t)) from time-t information. This is what
    // makes completing y worth anything: a filled y row re-exposes g at the
    // rows where it was dropped. Row 0 of A is drawn to keep the stream layout
    // uniform but is not used by the equations.
    Mat a(spec.d_x, 2);
    for (Eigen::Index i = 0; i < spec.d_x; ++i) {
      for (Eigen::Index j = 0; j < 2; ++j) a(i, j) = rng.next_gaussian();
    }
    // Readout rows keep a random direction but a fixed gain: a raw Gaussian
    // gain occasionally leaves every tanh readout nearly flat (or fully
    // saturated), which collapses the target's signal-to-noise for that
    // instrument and makes its scores meaningless.
    Mat b(spec.d_y, 2);
    for (Eigen::Index i = 0; i < spec.d_y; ++i) {
      for (Eigen::Index j = 0; j < 2; ++j) b(i, j) = rng.next_gaussian();
      const double norm = b.row(i).norm();
      if (norm > 1e-12) b.row(i) *= std::sqrt(2.0) / norm;
    }

    const double innov = std::sqrt(1.0 - spec.phi * spec.phi);
    const double noise_x = spec.noise;
    const double noise_y = 0.2 * spec.noise;
    const auto readout = [&](double v0, double v1) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < spec.d_y; ++j) {
        s += std::tanh(b(j, 0) * v0 + b(j, 1) * v1);
      }
      return s / static_cast<double>(spec.d_y);
    };

    Mat x(t_steps, spec.d_x);
    Mat y(t_steps, spec.d_y);
    std::vector<double> g_series(static_cast<std::size_t>(t_steps));
    double z0 = 0.0, z1 = 0.0;
    for (Eigen::Index t = 0; t < t_steps; ++t) {
      const double g_prev = t == 0 ? 0.0 : g_series[static_cast<std::size_t>(t - 1)];
      if (t == 0) {
        z0 = rng.next_gaussian();
        z1 = rng.next_gaussian();
      } else {
        z0 = spec.phi * z0 + innov * rng.next_gaussian();
        z1 = spec.phi * z1 + innov * rng.next_gaussian();
      }
      g_series[static_cast<std::size_t>(t)] = readout(z0, z1);
      for (Eigen::Index j = 0; j < spec.d_x; ++j) {
        const double clean = j == 0 ? g_prev : a(j, 0) * z0 + a(j, 1) * z1;
        // The target column carries half the sensor noise of the plain views:
        // one-step moves of g are small, so full-strength noise on the target
        // itself would flip a large share of the movement labels and bury the
        // predictable part of the task in label noise.
        const double scale = j == 0 ? 0.5 * noise_x : noise_x;
        x(t, j) = clean + scale * rng.next_gaussian();
      }
      for (Eigen::Index j = 0; j < spec.d_y; ++j) {
        y(t, j) = std::tanh(b(j, 0) * z0 + b(j, 1) * z1 +
                            noise_y * rng.next_gaussian());
      }
    }

    AlignedDataset ds;
    ds.timestamps.resize(static_cast<std::size_t>(t_steps));
    std::iota(ds.timestamps.begin(), ds.timestamps.end(), 0);
    ds.x = ModalityBatch{x, Mat::Ones(t_steps, spec.d_x), "x"};
    ds.y = ModalityBatch{y, Mat::Ones(t_steps, spec.d_y), "y"};
    ds.x_truth = x;
    ds.y_truth = y;
    for (Eigen::Index j = 0; j < spec.d_x; ++j) ds.x_names.push_back("x" + std::to_string(j));
    for (Eigen::Index j = 0; j < spec.d_y; ++j) ds.y_names.push_back("y" + std::to_string(j));
    ds.target_col = 0;

    // Class labels bucket the same clean readout the regression target lags,
    // so both task flavors reward recovering g at rows where y was dropped.
    const auto labels = quantile_labels(g_series, spec.classes);
    ds.labels_onehot = Mat::Zero(t_steps, spec.classes);
    for (Eigen::Index t = 0; t < t_steps; ++t) {
      ds.labels_onehot(t, labels[static_cast<std::size_t>(t)]) = 1.0;
    }
    out.push_back(std::move(ds));
  }
  return out;
}

MinMax fit_min_max(const Mat& values, const Mat& mask, Eigen::Index train_rows) {
  if (train_rows < 1 || train_rows > values.rows()) {
    throw DataError("fit_min_max: train_rows " + std::to_string(train_rows) +
                    " outside [1, " + std::to_string(values.rows()) + "]");
  }
  MinMax mm;
  mm.min = Mat::Zero(1, values.cols());
  mm.max = Mat::Ones(1, values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    bool seen = false;
    double lo = 0.0, hi = 0.0;
    for (Eigen::Index i = 0; i < train_rows; ++i) {
      if (mask(i, j) != 1.0) continue;
      const double v = values(i, j);
      if (!seen) {
        lo = hi = v;
        seen = true;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (seen) {
      mm.min(0, j) = lo;
      mm.max(0, j) = hi;
    }
  }
  return mm;
}

Mat apply_min_max(const Mat& values, const MinMax& mm) {
  require_shape(mm.min, 1, values.cols(), "min_max stats");
  Mat out(values.rows(), values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    double width = mm.max(0, j) - mm.min(0, j);
    if (width < 1e-12) width = 1.0;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      out(i, j) = (values(i, j) - mm.min(0, j)) / width;
    }
  }
  return out;
}

Mat invert_min_max(const Mat& scaled, const MinMax& mm) {
  require_shape(mm.min, 1, scaled.cols(), "min_max stats");
  Mat out(scaled.rows(), scaled.cols());
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    double width = mm.max(0, j) - mm.min(0, j);
    if (width < 1e-12) width = 1.0;
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
      out(i, j) = scaled(i, j) * width + mm.min(0, j);
    }
  }
  return out;
}

namespace {

void write_modality_csv(const std::string& path, const AlignedDataset& data,
                        const ModalityBatch& batch,
                        const std::vector<std::string>& names) {
  std::ofstream outf(path);
  if (!outf) throw DataError("cannot write '" + path + "'");
  outf << "timestamp";
  for (const auto& n : names) outf << ',' << n;
  outf << '\n';
  outf.precision(17);
  for (Eigen::Index i = 0; i < batch.values.rows(); ++i) {
    outf << format_timestamp(data.timestamps[static_cast<std::size_t>(i)],
                             data.date_stamps);
    for (Eigen::Index j = 0; j < batch.values.cols(); ++j) {
      outf << ',';
      if (batch.mask(i, j) == 1.0) outf << batch.values(i, j);
    }
    outf << '\n';
  }
}

}  // namespace

void save_modalities_csv(const std::string& x_path, const std::string& y_path,
                         const AlignedDataset& data) {
  write_modality_csv(x_path, data, data.x, data.x_names);
  write_modality_csv(y_path, data, data.y, data.y_names);
}

void save_labels_csv(const std::string& path, const AlignedDataset& data) {
  if (data.labels_onehot.size() == 0) {
    throw DataError("save_labels_csv: dataset has no labels");
  }
  std::ofstream outf(path);
  if (!outf) throw DataError("cannot write '" + path + "'");
  outf << "timestamp,label\n";
  for (Eigen::Index i = 0; i < data.labels_onehot.rows(); ++i) {
    Eigen::Index label = 0;
    data.labels_onehot.row(i).maxCoeff(&label);
    outf << format_timestamp(data.timestamps[static_cast<std::size_t>(i)],
                             data.date_stamps)
         << ',' << label << '\n';
  }
}

AlignedDataset load_dataset(const std::string& x_path, const std::string& y_path) {
  RawSeries x = load_series_csv(x_path);
  RawSeries y = load_series_csv(y_path);
  if (x.timestamps != y.timestamps) {
    throw DataError("load_dataset: '" + x_path + "' and '" + y_path +
                    "' have different time grids");
  }
  AlignedDataset out;
  out.timestamps = x.timestamps;
  out.date_stamps = x.date_stamps;
  out.x = ModalityBatch{std::move(x.values), std::move(x.mask), "x"};
  out.y = ModalityBatch{std::move(y.values), std::move(y.mask), "y"};
  out.x_names = std::move(x.names);
  out.y_names = std::move(y.names);
  return out;
}

Mat load_labels_csv(const std::string& path, Eigen::Index classes) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"timestamp", "label"}) {
    throw DataError("'" + path + "': expected header 'timestamp,label'");
  }
  std::vector<Eigen::Index> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 2) {
      throw DataError("'" + path + "' line " + std::to_string(line_no) +
                      ": expected 2 cells");
    }
    const double raw = parse_number(cells[1], line_no, 1);
    const Eigen::Index label = static_cast<Eigen::Index>(raw);
    if (raw != static_cast<double>(label) || label < 0 || label >= classes) {
      throw DataError("'" + path + "' line " + std::to_string(line_no) + ": label " +
                      cells[1] + " outside [0, " + std::to_string(classes) + ")");
    }
    labels.push_back(label);
  }
  Mat onehot = Mat::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    onehot(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return onehot;
}

}  // namespace mcdbn
