#pragma once

#include <vector>

#include "mcdbn/autodiff.hpp"
#include "mcdbn/rbm.hpp"

namespace mcdbn {

// Ordered RBM stack; layer i's hidden layer feeds layer i+1's visible layer.
struct DbnStack {
  std::vector<RbmParams> layers;

  Eigen::Index input_dim() const { return layers.front().n_visible(); }
  Eigen::Index top_dim() const { return layers.back().n_hidden(); }
};

// sizes = {n_visible, h0, h1, ...}; bottom layer gets `bottom_kind`, upper
// layers are always bernoulli (their inputs are probabilities).
DbnStack make_dbn(const std::vector<Eigen::Index>& sizes, VisibleKind bottom_kind,
                  Rng& rng);

struct PretrainTrace {
  // per_layer[i] holds one mean reconstruction error per epoch for layer i.
  std::vector<std::vector<double>> per_layer;
};

struct PretrainResult {
  DbnStack stack;
  PretrainTrace trace;
};

// Greedy layer-wise CD training, lowest layer first. Layer 0 trains on the
// raw batch; layer i>0 on prop_up probabilities of the already-trained stack
// below. Each epoch is one full-batch cd_k_update per mini-batch slice of
// `batch_size` consecutive rows (batch_size <= 0 means full batch).
PretrainResult pretrain_greedy(const DbnStack& stack, const Mat& batch, int epochs,
                               double lr, int k, Rng& rng, int batch_size = 0);

// Composed prop_up probabilities through all layers; batch x top_dim.
Mat transform_up(const DbnStack& stack, const Mat& v);

// Composed prop_down from the top layer. In stochastic mode, binary states
// are sampled between layers (row-major draws); the final layer always
// returns probabilities (or means for gaussian bottoms).
Mat generate_down(const DbnStack& stack, const Mat& h_top, Rng& rng, bool stochastic);

// Graph-building twins used by fine-tuning (expectation relaxation: sampling
// between layers is replaced by probabilities, so the path is differentiable).
struct DbnVars {
  std::vector<ad::Var> W;
  std::vector<ad::Var> b_v;
  std::vector<ad::Var> b_h;
  std::vector<VisibleKind> kinds;
};

DbnVars bind_dbn(ad::Graph& g, ad::Binding& binding, DbnStack& stack);
ad::Var transform_up_graph(const DbnVars& vars, ad::Var v);
ad::Var generate_down_graph(const DbnVars& vars, ad::Var h_top);

}  // namespace mcdbn
