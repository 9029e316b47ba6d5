#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mcdbn/matrix.hpp"

namespace mcdbn::ad {

class Graph;

// Lightweight handle into a Graph. Valid only while its graph is alive.
struct Var {
  Graph* g = nullptr;
  int id = -1;
  const Mat& value() const;
  const Mat& grad() const;  // zero-sized until backward touches this node
};

// Record-and-replay reverse-mode tape. Nodes are appended in evaluation
// order; backward() walks them in reverse, accumulating dL/dnode into
// Node::grad for every node with requires_grad.
class Graph {
 public:
  Var constant(Mat v) { return add_leaf(std::move(v), false); }
  Var param(const Mat& v) { return add_leaf(v, true); }

  // root must be 1x1; seeds its gradient with 1.
  void backward(Var root);

  const Mat& value_of(int id) const { return nodes_[id].value; }
  const Mat& grad_of(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  using BackFn = std::function<void(Graph&, const Mat& upstream)>;

  Var add_node(Mat value, bool requires_grad, BackFn back) {
    nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(back)});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  void accumulate(int id, const Mat& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    BackFn back;
  };

  Var add_leaf(Mat v, bool requires_grad) {
    return add_node(std::move(v), requires_grad, BackFn());
  }

  std::vector<Node> nodes_;
};

inline const Mat& Var::value() const { return g->value_of(id); }
inline const Mat& Var::grad() const { return g->grad_of(id); }

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);  // same shape
Var sub(Var a, Var b);
Var add_row(Var m, Var row);  // broadcast 1xC row over all rows of m
Var hadamard(Var a, Var b);
Var hadamard_const(Var a, const Mat& c);
Var add_const(Var a, const Mat& c);
Var scale(Var a, double s);
Var sigmoid(Var a);
Var tanh_v(Var a);
Var relu(Var a);
Var softmax_rows_v(Var a);
Var layer_norm_rows_v(Var a, double eps);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, Eigen::Index r0, Eigen::Index n);
Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n);

// observed entries (mask = 1) come from `observed`, the rest from g.
Var mix_mask(Var g, const Mat& observed, const Mat& mask);

// mean over mask=1 entries of (pred - target)^2; mask must select >= 1 entry.
Var mse_masked(Var pred, const Mat& target, const Mat& mask);

// mean over all entries of (pred - target)^2.
Var mse_mean(Var pred, const Mat& target);

// -(1/N) sum_ij onehot_ij log(max(probs_ij, 1e-12)), N = rows.
Var cross_entropy_probs(Var probs, const Mat& onehot);

// x * W + b with b broadcast per row.
inline Var affine(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

// ---- parameter binding ----------------------------------------------------

// Ties model parameter storage to graph leaves so one forward build serves
// both SGD updates and finite-difference checks.
struct Binding {
  struct Entry {
    Mat* target;
    Var var;
  };
  std::vector<Entry> entries;

  Var bind(Graph& g, Mat& m) {
    Var v = g.param(m);
    entries.push_back(Entry{&m, v});
    return v;
  }

  // target -= lr * grad for every bound parameter that received gradient.
  void sgd_step(double lr) {
    for (auto& e : entries) {
      const Mat& gr = e.var.grad();
      if (gr.size() != 0) *e.target -= lr * gr;
    }
  }
};

}  // namespace mcdbn::ad
