#pragma once

#include <vector>

#include "mcdbn/autodiff.hpp"
#include "mcdbn/matrix.hpp"
#include "mcdbn/rng.hpp"

namespace mcdbn {

// Cross-modal multi-head attention plus the fused output map. Queries and
// keys are projected from the complete modality's features, values from the
// missing modality's.
struct FusionParams {
  std::vector<Mat> w_q, w_k;  // per head, d_complete x d_k
  std::vector<Mat> w_v;       // per head, d_missing x d_k
  Mat w_out;                  // (heads * d_k) x model dim, square
  Mat map_w, map_b;           // model dim x d_fusion, 1 x d_fusion
  Mat proj_w, proj_b;         // (d_mc_x + d_mc_y) x d_fusion, 1 x d_fusion
  double ln_eps = 1e-5;

  Eigen::Index heads() const { return static_cast<Eigen::Index>(w_q.size()); }
  Eigen::Index head_dim() const { return w_q.front().cols(); }
  Eigen::Index model_dim() const { return w_out.cols(); }
  Eigen::Index fusion_dim() const { return map_w.cols(); }
};

FusionParams make_fusion(Eigen::Index d_complete, Eigen::Index d_missing,
                         Eigen::Index heads, Eigen::Index d_k,
                         Eigen::Index d_mc_x, Eigen::Index d_mc_y,
                         Eigen::Index d_fusion, Rng& rng);

// Row-stochastic softmax(Q K^T / sqrt(d_k)); exposed so callers can audit
// normalization.
Mat attention_matrix(const Mat& q, const Mat& k);

// attention_matrix(Q, K) * layer_norm_rows(V, eps).
Mat attention_dbn(const Mat& q, const Mat& k, const Mat& v, double eps);

// Heads concatenated along features, then output-projected; T x model dim.
Mat multi_head(const Mat& complete_feats, const Mat& missing_feats,
               const FusionParams& params);

// Map(layer_norm_rows(multi_attn)) + P([mc_x | mc_y]); T x d_fusion.
Mat fuse(const Mat& multi_attn, const Mat& mc_x, const Mat& mc_y,
         const FusionParams& params);

// ---- graph twins -------------------------------------------------------------

struct FusionVars {
  std::vector<ad::Var> w_q, w_k, w_v;
  ad::Var w_out, map_w, map_b, proj_w, proj_b;
  double ln_eps = 1e-5;
};

FusionVars bind_fusion(ad::Graph& g, ad::Binding& binding, FusionParams& params);

ad::Var attention_dbn_graph(ad::Var q, ad::Var k, ad::Var v, double eps);
ad::Var multi_head_graph(const FusionVars& vars, ad::Var complete_feats,
                         ad::Var missing_feats);
ad::Var fuse_graph(const FusionVars& vars, ad::Var multi_attn, ad::Var mc_x,
                   ad::Var mc_y);

}  // namespace mcdbn
