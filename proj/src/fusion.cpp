#include "mcdbn/fusion.hpp"

#include <cmath>

#include "mcdbn/errors.hpp"
#include "mcdbn/numerics.hpp"

namespace mcdbn {

namespace {

Mat init_weight(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = s * rng.next_gaussian();
  }
  return m;
}

void check_heads(const FusionParams& p) {
  if (p.w_q.empty() || p.w_q.size() != p.w_k.size() || p.w_q.size() != p.w_v.size()) {
    throw ConfigError("fusion: per-head projection lists are inconsistent");
  }
  const Eigen::Index concat_dim = p.heads() * p.head_dim();
  if (concat_dim != p.w_out.rows()) {
    throw ConfigError("fusion: heads * d_k = " + std::to_string(concat_dim) +
                      " does not match output projection rows " +
                      std::to_string(p.w_out.rows()));
  }
}

}  // namespace

FusionParams make_fusion(Eigen::Index d_complete, Eigen::Index d_missing,
                         Eigen::Index heads, Eigen::Index d_k,
                         Eigen::Index d_mc_x, Eigen::Index d_mc_y,
                         Eigen::Index d_fusion, Rng& rng) {
  if (heads < 1 || d_k < 1 || d_fusion < 1) {
    throw ConfigError("make_fusion: heads, d_k and d_fusion must be positive");
  }
  FusionParams p;
  for (Eigen::Index h = 0; h < heads; ++h) {
    p.w_q.push_back(init_weight(d_complete, d_k, rng));
    p.w_k.push_back(init_weight(d_complete, d_k, rng));
    p.w_v.push_back(init_weight(d_missing, d_k, rng));
  }
  const Eigen::Index d_model = heads * d_k;
  p.w_out = init_weight(d_model, d_model, rng);
  // The two output maps start at a quarter of the fan-in scale so the fused
  // features open near the target range; hot features raise the task head's
  // curvature and cap the stable learning rate for the whole composite.
  p.map_w = 0.25 * init_weight(d_model, d_fusion, rng);
  p.map_b = Mat::Zero(1, d_fusion);
  p.proj_w = 0.25 * init_weight(d_mc_x + d_mc_y, d_fusion, rng);
  p.proj_b = Mat::Zero(1, d_fusion);
  return p;
}

Mat attention_matrix(const Mat& q, const Mat& k) {
  if (q.cols() != k.cols()) {
    throw ShapeError("attention_matrix: query " + shape_str(q) + " and key " +
                     shape_str(k) + " widths differ");
  }
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  return softmax_rows(q * k.transpose() * inv_scale);
}

Mat attention_dbn(const Mat& q, const Mat& k, const Mat& v, double eps) {
  if (k.rows() != v.rows()) {
    throw ShapeError("attention_dbn: key rows " + std::to_string(k.rows()) +
                     " and value rows " + std::to_string(v.rows()) + " differ");
  }
  return attention_matrix(q, k) * layer_norm_rows(v, eps);
}

Mat multi_head(const Mat& complete_feats, const Mat& missing_feats,
               const FusionParams& params) {
  check_heads(params);
  if (complete_feats.rows() != missing_feats.rows()) {
    throw ShapeError("multi_head: modality row counts differ (" +
                     std::to_string(complete_feats.rows()) + " vs " +
                     std::to_string(missing_feats.rows()) + ")");
  }
  Mat concat(complete_feats.rows(), params.heads() * params.head_dim());
  for (Eigen::Index h = 0; h < params.heads(); ++h) {
    concat.middleCols(h * params.head_dim(), params.head_dim()) =
        attention_dbn(matmul(complete_feats, params.w_q[h]),
                      matmul(complete_feats, params.w_k[h]),
                      matmul(missing_feats, params.w_v[h]), params.ln_eps);
  }
  return concat * params.w_out;
}

Mat fuse(const Mat& multi_attn, const Mat& mc_x, const Mat& mc_y,
         const FusionParams& params) {
  if (multi_attn.rows() != mc_x.rows() || multi_attn.rows() != mc_y.rows()) {
    throw ShapeError("fuse: row counts differ (attn " +
                     std::to_string(multi_attn.rows()) + ", mc_x " +
                     std::to_string(mc_x.rows()) + ", mc_y " +
                     std::to_string(mc_y.rows()) + ")");
  }
  Mat mapped = matmul(layer_norm_rows(multi_attn, params.ln_eps), params.map_w);
  mapped.rowwise() += params.map_b.row(0);
  Mat concat(mc_x.rows(), mc_x.cols() + mc_y.cols());
  concat << mc_x, mc_y;
  Mat projected = matmul(concat, params.proj_w);
  projected.rowwise() += params.proj_b.row(0);
  return mapped + projected;
}

// ---- graph twins --------------------------------------------------------------

FusionVars bind_fusion(ad::Graph& g, ad::Binding& binding, FusionParams& params) {
  check_heads(params);
  FusionVars v;
  for (std::size_t h = 0; h < params.w_q.size(); ++h) {
    v.w_q.push_back(binding.bind(g, params.w_q[h]));
    v.w_k.push_back(binding.bind(g, params.w_k[h]));
    v.w_v.push_back(binding.bind(g, params.w_v[h]));
  }
  v.w_out = binding.bind(g, params.w_out);
  v.map_w = binding.bind(g, params.map_w);
  v.map_b = binding.bind(g, params.map_b);
  v.proj_w = binding.bind(g, params.proj_w);
  v.proj_b = binding.bind(g, params.proj_b);
  v.ln_eps = params.ln_eps;
  return v;
}

ad::Var attention_dbn_graph(ad::Var q, ad::Var k, ad::Var v, double eps) {
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.value().cols()));
  ad::Var attn = ad::softmax_rows_v(ad::scale(ad::matmul(q, ad::transpose(k)),
                                              inv_scale));
  return ad::matmul(attn, ad::layer_norm_rows_v(v, eps));
}

ad::Var multi_head_graph(const FusionVars& vars, ad::Var complete_feats,
                         ad::Var missing_feats) {
  std::vector<ad::Var> heads;
  for (std::size_t h = 0; h < vars.w_q.size(); ++h) {
    heads.push_back(attention_dbn_graph(ad::matmul(complete_feats, vars.w_q[h]),
                                        ad::matmul(complete_feats, vars.w_k[h]),
                                        ad::matmul(missing_feats, vars.w_v[h]),
                                        vars.ln_eps));
  }
  return ad::matmul(ad::concat_cols(heads), vars.w_out);
}

ad::Var fuse_graph(const FusionVars& vars, ad::Var multi_attn, ad::Var mc_x,
                   ad::Var mc_y) {
  ad::Var mapped = ad::affine(ad::layer_norm_rows_v(multi_attn, vars.ln_eps),
                              vars.map_w, vars.map_b);
  ad::Var projected = ad::affine(ad::concat_cols({mc_x, mc_y}),
                                 vars.proj_w, vars.proj_b);
  return ad::add(mapped, projected);
}

}  // namespace mcdbn
