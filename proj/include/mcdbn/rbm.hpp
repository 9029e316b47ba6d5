#pragma once

#include <utility>

#include "mcdbn/matrix.hpp"
#include "mcdbn/numerics.hpp"
#include "mcdbn/rng.hpp"

namespace mcdbn {

// Family of the visible units. Bernoulli-prob treats visible values in [0,1]
// as probabilities (the default after min-max scaling); gaussian-standardized
// models zero-mean unit-variance inputs with a linear mean in prop_down.
enum class VisibleKind { kBernoulliProb, kGaussianStandardized };

struct RbmParams {
  Mat W;    // n_visible x n_hidden
  Mat b_v;  // 1 x n_visible
  Mat b_h;  // 1 x n_hidden
  VisibleKind visible_kind = VisibleKind::kBernoulliProb;

  Eigen::Index n_visible() const { return W.rows(); }
  Eigen::Index n_hidden() const { return W.cols(); }
};

// Gaussian(0, 0.01^2) weights drawn row-major from rng, zero biases.
RbmParams make_rbm(Eigen::Index n_visible, Eigen::Index n_hidden, VisibleKind kind,
                   Rng& rng);

// p(h_j = 1 | v) = sigma(v W + b_h), batch x n_hidden.
Mat prop_up(const RbmParams& params, const Mat& v);

// Bernoulli kind: sigma(h W^T + b_v). Gaussian kind: linear mean h W^T + b_v.
Mat prop_down(const RbmParams& params, const Mat& h);

struct CdUpdate {
  RbmParams params;
  double recon_error = 0.0;  // MSE of the chain's 1-step reconstruction
};

// One CD-k gradient step on a batch. The Gibbs chain samples hidden states
// (row-major draws from rng, one sample pass per chain step except the last)
// and uses probabilities for the endpoint statistics.
CdUpdate cd_k_update(const RbmParams& params, const Mat& batch, int k, double lr,
                     Rng& rng);

// Deterministic mean over entries of (v - prop_down(prop_up(v)))^2.
double reconstruction_error(const RbmParams& params, const Mat& batch);

// Per-row F(v) = -v b_v^T - sum_j softplus((v W + b_h)_j), batch x 1.
// Bernoulli kind only.
Mat free_energy(const RbmParams& params, const Mat& v);

}  // namespace mcdbn
