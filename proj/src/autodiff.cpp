#include "mcdbn/autodiff.hpp"

#include <cmath>

#include "mcdbn/numerics.hpp"

namespace mcdbn::ad {

void Graph::backward(Var root) {
  if (root.g != this) throw DomainError("backward: root from a different graph");
  const Mat& rv = nodes_[root.id].value;
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ShapeError("backward: root must be 1x1, got " + shape_str(rv));
  }
  nodes_[root.id].grad = Mat::Ones(1, 1);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.back || n.grad.size() == 0) continue;
    n.back(*this, n.grad);
  }
}

namespace {

bool req2(Var a, Var b) {
  return a.g->requires_grad(a.id) || b.g->requires_grad(b.id);
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = *a.g;
  const Mat& av = a.value();
  const Mat& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions of " + shape_str(av) + " and " +
                     shape_str(bv) + " do not match");
  }
  return g.add_node(av * bv, req2(a, b), [ia = a.id, ib = b.id](Graph& g, const Mat& dy) {
    g.accumulate(ia, dy * g.value_of(ib).transpose());
    g.accumulate(ib, g.value_of(ia).transpose() * dy);
  });
}

Var transpose(Var a) {
  Graph& g = *a.g;
  return g.add_node(a.value().transpose(), g.requires_grad(a.id),
                    [ia = a.id](Graph& g, const Mat& dy) {
                      g.accumulate(ia, dy.transpose());
                    });
}

Var add(Var a, Var b) {
  Graph& g = *a.g;
  require_same_shape(a.value(), b.value(), "add");
  return g.add_node(a.value() + b.value(), req2(a, b),
                    [ia = a.id, ib = b.id](Graph& g, const Mat& dy) {
                      g.accumulate(ia, dy);
                      g.accumulate(ib, dy);
                    });
}

Var sub(Var a, Var b) {
  Graph& g = *a.g;
  require_same_shape(a.value(), b.value(), "sub");
  return g.add_node(a.value() - b.value(), req2(a, b),
                    [ia = a.id, ib = b.id](Graph& g, const Mat& dy) {
                      g.accumulate(ia, dy);
                      g.accumulate(ib, -dy);
                    });
}

Var add_row(Var m, Var row) {
  Graph& g = *m.g;
  const Mat& mv = m.value();
  const Mat& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != mv.cols()) {
    throw ShapeError("add_row: row " + shape_str(rv) + " does not broadcast over " +
                     shape_str(mv));
  }
  Mat out = mv;
  out.rowwise() += rv.row(0);
  return g.add_node(std::move(out), req2(m, row),
                    [im = m.id, ir = row.id](Graph& g, const Mat& dy) {
                      g.accumulate(im, dy);
                      g.accumulate(ir, dy.colwise().sum());
                    });
}

Var hadamard(Var a, Var b) {
  Graph& g = *a.g;
  require_same_shape(a.value(), b.value(), "hadamard");
  return g.add_node(a.value().cwiseProduct(b.value()), req2(a, b),
                    [ia = a.id, ib = b.id](Graph& g, const Mat& dy) {
                      g.accumulate(ia, dy.cwiseProduct(g.value_of(ib)));
                      g.accumulate(ib, dy.cwiseProduct(g.value_of(ia)));
                    });
}

Var hadamard_const(Var a, const Mat& c) {
  Graph& g = *a.g;
  require_same_shape(a.value(), c, "hadamard_const");
  return g.add_node(a.value().cwiseProduct(c), g.requires_grad(a.id),
                    [ia = a.id, c](Graph& g, const Mat& dy) {
                      g.accumulate(ia, dy.cwiseProduct(c));
                    });
}

Var add_const(Var a, const Mat& c) {
  Graph& g = *a.g;
  require_same_shape(a.value(), c, "add_const");
  return g.add_node(a.value() + c, g.requires_grad(a.id),
                    [ia = a.id](Graph& g, const Mat& dy) { g.accumulate(ia, dy); });
}

Var scale(Var a, double s) {
  Graph& g = *a.g;
  return g.add_node(s * a.value(), g.requires_grad(a.id),
                    [ia = a.id, s](Graph& g, const Mat& dy) {
                      g.accumulate(ia, s * dy);
                    });
}

Var sigmoid(Var a) {
  Graph& g = *a.g;
  Mat s = mcdbn::sigmoid(a.value());
  return g.add_node(s, g.requires_grad(a.id),
                    [ia = a.id, s](Graph& g, const Mat& dy) {
                      g.accumulate(ia, dy.cwiseProduct(
                                           s.cwiseProduct((1.0 - s.array()).matrix())));
                    });
}

Var tanh_v(Var a) {
  Graph& g = *a.g;
  Mat t = mcdbn::tanh_m(a.value());
  return g.add_node(t, g.requires_grad(a.id),
                    [ia = a.id, t](Graph& g, const Mat& dy) {
                      g.accumulate(ia, dy.cwiseProduct(
                                           (1.0 - t.array().square()).matrix()));
                    });
}

Var relu(Var a) {
  Graph& g = *a.g;
  Mat mask = (a.value().array() > 0.0).cast<double>().matrix();
  return g.add_node(mcdbn::relu(a.value()), g.requires_grad(a.id),
                    [ia = a.id, mask](Graph& g, const Mat& dy) {
                      g.accumulate(ia, dy.cwiseProduct(mask));
                    });
}

Var softmax_rows_v(Var a) {
  Graph& g = *a.g;
  Mat s = mcdbn::softmax_rows(a.value());
  return g.add_node(s, g.requires_grad(a.id), [ia = a.id, s](Graph& g, const Mat& dy) {
    Mat dx(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const double dot = dy.row(i).dot(s.row(i));
      dx.row(i) = (s.row(i).array() * (dy.row(i).array() - dot)).matrix();
    }
    g.accumulate(ia, dx);
  });
}

Var layer_norm_rows_v(Var a, double eps) {
  Graph& g = *a.g;
  const Mat& x = a.value();
  Mat y(x.rows(), x.cols());
  Eigen::VectorXd inv_std(x.rows());
  const double n = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().sum() / n;
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    y.row(i) = ((x.row(i).array() - mean) * inv_std(i)).matrix();
  }
  return g.add_node(y, g.requires_grad(a.id),
                    [ia = a.id, y, inv_std](Graph& g, const Mat& dy) {
                      Mat dx(y.rows(), y.cols());
                      for (Eigen::Index i = 0; i < y.rows(); ++i) {
                        const double mean_dy = dy.row(i).mean();
                        const double mean_dyy = dy.row(i).cwiseProduct(y.row(i)).mean();
                        dx.row(i) = inv_std(i) * (dy.row(i).array() - mean_dy -
                                                  y.row(i).array() * mean_dyy);
                      }
                      g.accumulate(ia, dx);
                    });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty part list");
  Graph& g = *parts[0].g;
  Eigen::Index rows = parts[0].value().rows();
  Eigen::Index cols = 0;
  bool req = false;
  for (const Var& p : parts) {
    if (p.value().rows() != rows) {
      throw ShapeError("concat_cols: row counts differ (" +
                       shape_str(parts[0].value()) + " vs " + shape_str(p.value()) + ")");
    }
    cols += p.value().cols();
    req = req || g.requires_grad(p.id);
  }
  Mat out(rows, cols);
  Eigen::Index c = 0;
  std::vector<std::pair<int, Eigen::Index>> spans;
  for (const Var& p : parts) {
    out.middleCols(c, p.value().cols()) = p.value();
    spans.emplace_back(p.id, p.value().cols());
    c += p.value().cols();
  }
  return g.add_node(std::move(out), req, [spans](Graph& g, const Mat& dy) {
    Eigen::Index c = 0;
    for (const auto& [id, width] : spans) {
      g.accumulate(id, dy.middleCols(c, width));
      c += width;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty part list");
  Graph& g = *parts[0].g;
  Eigen::Index cols = parts[0].value().cols();
  Eigen::Index rows = 0;
  bool req = false;
  for (const Var& p : parts) {
    if (p.value().cols() != cols) {
      throw ShapeError("concat_rows: column counts differ (" +
                       shape_str(parts[0].value()) + " vs " + shape_str(p.value()) + ")");
    }
    rows += p.value().rows();
    req = req || g.requires_grad(p.id);
  }
  Mat out(rows, cols);
  Eigen::Index r = 0;
  std::vector<std::pair<int, Eigen::Index>> spans;
  for (const Var& p : parts) {
    out.middleRows(r, p.value().rows()) = p.value();
    spans.emplace_back(p.id, p.value().rows());
    r += p.value().rows();
  }
  return g.add_node(std::move(out), req, [spans](Graph& g, const Mat& dy) {
    Eigen::Index r = 0;
    for (const auto& [id, height] : spans) {
      g.accumulate(id, dy.middleRows(r, height));
      r += height;
    }
  });
}

Var slice_rows(Var a, Eigen::Index r0, Eigen::Index n) {
  Graph& g = *a.g;
  const Mat& v = a.value();
  if (r0 < 0 || n < 0 || r0 + n > v.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(r0) + ", " +
                     std::to_string(r0 + n) + ") out of range for " + shape_str(v));
  }
  Eigen::Index rows = v.rows(), cols = v.cols();
  return g.add_node(v.middleRows(r0, n), g.requires_grad(a.id),
                    [ia = a.id, r0, n, rows, cols](Graph& g, const Mat& dy) {
                      Mat scatter = Mat::Zero(rows, cols);
                      scatter.middleRows(r0, n) = dy;
                      g.accumulate(ia, scatter);
                    });
}

Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n) {
  Graph& g = *a.g;
  const Mat& v = a.value();
  if (c0 < 0 || n < 0 || c0 + n > v.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(c0) + ", " +
                     std::to_string(c0 + n) + ") out of range for " + shape_str(v));
  }
  Eigen::Index rows = v.rows(), cols = v.cols();
  return g.add_node(v.middleCols(c0, n), g.requires_grad(a.id),
                    [ia = a.id, c0, n, rows, cols](Graph& g, const Mat& dy) {
                      Mat scatter = Mat::Zero(rows, cols);
                      scatter.middleCols(c0, n) = dy;
                      g.accumulate(ia, scatter);
                    });
}

Var mix_mask(Var gen, const Mat& observed, const Mat& mask) {
  Graph& g = *gen.g;
  require_same_shape(gen.value(), observed, "mix_mask");
  require_same_shape(gen.value(), mask, "mix_mask");
  Mat keep = (1.0 - mask.array()).matrix();
  Mat out = mask.cwiseProduct(observed) + keep.cwiseProduct(gen.value());
  return g.add_node(std::move(out), g.requires_grad(gen.id),
                    [ig = gen.id, keep](Graph& g, const Mat& dy) {
                      g.accumulate(ig, dy.cwiseProduct(keep));
                    });
}

Var mse_masked(Var pred, const Mat& target, const Mat& mask) {
  Graph& g = *pred.g;
  require_same_shape(pred.value(), target, "mse_masked");
  require_same_shape(pred.value(), mask, "mse_masked");
  const double count = mask.sum();
  if (count < 1.0) throw DataError("mse_masked: mask selects no entries");
  Mat diff = mask.cwiseProduct(pred.value() - target);
  Mat v(1, 1);
  v(0, 0) = diff.array().square().sum() / count;
  return g.add_node(std::move(v), g.requires_grad(pred.id),
                    [ip = pred.id, diff, count](Graph& g, const Mat& dy) {
                      g.accumulate(ip, (2.0 * dy(0, 0) / count) * diff);
                    });
}

Var mse_mean(Var pred, const Mat& target) {
  Graph& g = *pred.g;
  require_same_shape(pred.value(), target, "mse_mean");
  const double count = static_cast<double>(target.size());
  Mat diff = pred.value() - target;
  Mat v(1, 1);
  v(0, 0) = diff.array().square().sum() / count;
  return g.add_node(std::move(v), g.requires_grad(pred.id),
                    [ip = pred.id, diff, count](Graph& g, const Mat& dy) {
                      g.accumulate(ip, (2.0 * dy(0, 0) / count) * diff);
                    });
}

Var cross_entropy_probs(Var probs, const Mat& onehot) {
  Graph& g = *probs.g;
  require_same_shape(probs.value(), onehot, "cross_entropy_probs");
  constexpr double kClamp = 1e-12;
  const double n = static_cast<double>(onehot.rows());
  const Mat& p = probs.value();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (onehot(i, j) != 0.0) {
        loss -= onehot(i, j) * std::log(std::max(p(i, j), kClamp));
      }
    }
  }
  Mat v(1, 1);
  v(0, 0) = loss / n;
  return g.add_node(std::move(v), g.requires_grad(probs.id),
                    [ip = probs.id, onehot, n](Graph& g, const Mat& dy) {
                      const Mat& p = g.value_of(ip);
                      Mat dx = Mat::Zero(p.rows(), p.cols());
                      for (Eigen::Index i = 0; i < p.rows(); ++i) {
                        for (Eigen::Index j = 0; j < p.cols(); ++j) {
                          if (onehot(i, j) != 0.0 && p(i, j) > kClamp) {
                            dx(i, j) = -onehot(i, j) / p(i, j);
                          }
                        }
                      }
                      g.accumulate(ip, (dy(0, 0) / n) * dx);
                    });
}

}  // namespace mcdbn::ad
