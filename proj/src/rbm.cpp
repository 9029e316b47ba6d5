#include "mcdbn/rbm.hpp"

namespace mcdbn {

RbmParams make_rbm(Eigen::Index n_visible, Eigen::Index n_hidden, VisibleKind kind,
                   Rng& rng) {
  if (n_visible < 1 || n_hidden < 1) {
    throw ConfigError("make_rbm: layer sizes must be >= 1");
  }
  RbmParams p;
  p.W.resize(n_visible, n_hidden);
  for (Eigen::Index i = 0; i < n_visible; ++i) {
    for (Eigen::Index j = 0; j < n_hidden; ++j) {
      p.W(i, j) = 0.01 * rng.next_gaussian();
    }
  }
  p.b_v = Mat::Zero(1, n_visible);
  p.b_h = Mat::Zero(1, n_hidden);
  p.visible_kind = kind;
  return p;
}

Mat prop_up(const RbmParams& params, const Mat& v) {
  if (v.cols() != params.n_visible()) {
    throw ShapeError("prop_up: input " + shape_str(v) + " does not match " +
                     std::to_string(params.n_visible()) + " visible units");
  }
  Mat pre = v * params.W;
  pre.rowwise() += params.b_h.row(0);
  return sigmoid(pre);
}

Mat prop_down(const RbmParams& params, const Mat& h) {
  if (h.cols() != params.n_hidden()) {
    throw ShapeError("prop_down: input " + shape_str(h) + " does not match " +
                     std::to_string(params.n_hidden()) + " hidden units");
  }
  Mat pre = h * params.W.transpose();
  pre.rowwise() += params.b_v.row(0);
  if (params.visible_kind == VisibleKind::kGaussianStandardized) return pre;
  return sigmoid(pre);
}

CdUpdate cd_k_update(const RbmParams& params, const Mat& batch, int k, double lr,
                     Rng& rng) {
  if (k < 1) throw ConfigError("cd_k_update: k must be >= 1");
  if (lr < 0.0) throw ConfigError("cd_k_update: lr must be >= 0");
  const double rows = static_cast<double>(batch.rows());
  if (batch.rows() == 0) throw ShapeError("cd_k_update: empty batch");

  Mat h_data = prop_up(params, batch);  // endpoint statistic: probabilities
  Mat h_state = bernoulli_sample(h_data, rng);

  Mat v_model;
  Mat h_model;
  double recon = 0.0;
  for (int step = 1; step <= k; ++step) {
    v_model = prop_down(params, h_state);
    if (step == 1) {
      recon = (batch - v_model).array().square().mean();
    }
    h_model = prop_up(params, v_model);
    if (step < k) h_state = bernoulli_sample(h_model, rng);
  }

  CdUpdate out;
  out.params = params;
  out.params.W +=
      (lr / rows) * (batch.transpose() * h_data - v_model.transpose() * h_model);
  out.params.b_v += (lr / rows) * (batch - v_model).colwise().sum();
  out.params.b_h += (lr / rows) * (h_data - h_model).colwise().sum();
  out.recon_error = recon;
  return out;
}

double reconstruction_error(const RbmParams& params, const Mat& batch) {
  Mat recon = prop_down(params, prop_up(params, batch));
  return (batch - recon).array().square().mean();
}

Mat free_energy(const RbmParams& params, const Mat& v) {
  if (params.visible_kind != VisibleKind::kBernoulliProb) {
    throw DomainError("free_energy: unsupported for gaussian-standardized units");
  }
  if (v.cols() != params.n_visible()) {
    throw ShapeError("free_energy: input " + shape_str(v) + " does not match " +
                     std::to_string(params.n_visible()) + " visible units");
  }
  Mat pre = v * params.W;
  pre.rowwise() += params.b_h.row(0);
  Mat out(v.rows(), 1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    double hidden_term = 0.0;
    for (Eigen::Index j = 0; j < pre.cols(); ++j) hidden_term += softplus(pre(i, j));
    out(i, 0) = -v.row(i).dot(params.b_v.row(0)) - hidden_term;
  }
  return out;
}

}  // namespace mcdbn
