#include "mcdbn/dbn.hpp"

namespace mcdbn {

DbnStack make_dbn(const std::vector<Eigen::Index>& sizes, VisibleKind bottom_kind,
                  Rng& rng) {
  if (sizes.size() < 2) throw ConfigError("make_dbn: need at least one layer");
  DbnStack stack;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    VisibleKind kind = (i == 0) ? bottom_kind : VisibleKind::kBernoulliProb;
    stack.layers.push_back(make_rbm(sizes[i], sizes[i + 1], kind, rng));
  }
  return stack;
}

namespace {

void check_stack(const DbnStack& stack) {
  if (stack.layers.empty()) throw ConfigError("DbnStack: no layers");
  for (std::size_t i = 0; i + 1 < stack.layers.size(); ++i) {
    if (stack.layers[i].n_hidden() != stack.layers[i + 1].n_visible()) {
      throw ShapeError("DbnStack: layer " + std::to_string(i) + " hidden size " +
                       std::to_string(stack.layers[i].n_hidden()) +
                       " does not feed layer " + std::to_string(i + 1) +
                       " visible size " +
                       std::to_string(stack.layers[i + 1].n_visible()));
    }
  }
}

}  // namespace

PretrainResult pretrain_greedy(const DbnStack& stack, const Mat& batch, int epochs,
                               double lr, int k, Rng& rng, int batch_size) {
  check_stack(stack);
  if (epochs < 1) throw ConfigError("pretrain_greedy: epochs must be >= 1");
  if (batch.cols() != stack.input_dim()) {
    throw ShapeError("pretrain_greedy: batch " + shape_str(batch) +
                     " does not match input dim " + std::to_string(stack.input_dim()));
  }
  const Eigen::Index rows = batch.rows();
  const Eigen::Index chunk =
      (batch_size <= 0) ? rows : std::min<Eigen::Index>(batch_size, rows);

  PretrainResult out;
  out.stack = stack;
  out.trace.per_layer.resize(stack.layers.size());

  Mat input = batch;
  for (std::size_t li = 0; li < out.stack.layers.size(); ++li) {
    RbmParams& layer = out.stack.layers[li];
    for (int epoch = 0; epoch < epochs; ++epoch) {
      double err_sum = 0.0;
      int n_batches = 0;
      for (Eigen::Index r0 = 0; r0 < rows; r0 += chunk) {
        const Eigen::Index n = std::min(chunk, rows - r0);
        CdUpdate upd = cd_k_update(layer, input.middleRows(r0, n), k, lr, rng);
        layer = std::move(upd.params);
        err_sum += upd.recon_error;
        ++n_batches;
      }
      out.trace.per_layer[li].push_back(err_sum / n_batches);
    }
    if (li + 1 < out.stack.layers.size()) input = prop_up(layer, input);
  }
  return out;
}

Mat transform_up(const DbnStack& stack, const Mat& v) {
  check_stack(stack);
  Mat h = v;
  for (const RbmParams& layer : stack.layers) h = prop_up(layer, h);
  return h;
}

Mat generate_down(const DbnStack& stack, const Mat& h_top, Rng& rng, bool stochastic) {
  check_stack(stack);
  if (h_top.cols() != stack.top_dim()) {
    throw ShapeError("generate_down: input " + shape_str(h_top) +
                     " does not match top dim " + std::to_string(stack.top_dim()));
  }
  Mat h = h_top;
  for (std::size_t i = stack.layers.size(); i-- > 0;) {
    Mat p = prop_down(stack.layers[i], h);
    if (i > 0 && stochastic) {
      h = bernoulli_sample(p, rng);
    } else {
      h = std::move(p);
    }
  }
  return h;
}

DbnVars bind_dbn(ad::Graph& g, ad::Binding& binding, DbnStack& stack) {
  check_stack(stack);
  DbnVars vars;
  for (RbmParams& layer : stack.layers) {
    vars.W.push_back(binding.bind(g, layer.W));
    vars.b_v.push_back(binding.bind(g, layer.b_v));
    vars.b_h.push_back(binding.bind(g, layer.b_h));
    vars.kinds.push_back(layer.visible_kind);
  }
  return vars;
}

ad::Var transform_up_graph(const DbnVars& vars, ad::Var v) {
  ad::Var h = v;
  for (std::size_t i = 0; i < vars.W.size(); ++i) {
    h = ad::sigmoid(ad::affine(h, vars.W[i], vars.b_h[i]));
  }
  return h;
}

ad::Var generate_down_graph(const DbnVars& vars, ad::Var h_top) {
  ad::Var h = h_top;
  for (std::size_t i = vars.W.size(); i-- > 0;) {
    ad::Var pre = ad::add_row(ad::matmul(h, ad::transpose(vars.W[i])), vars.b_v[i]);
    h = (vars.kinds[i] == VisibleKind::kGaussianStandardized) ? pre : ad::sigmoid(pre);
  }
  return h;
}

}  // namespace mcdbn
