#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <vector>

namespace sda::ad {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;

  bool valid() const { return tape != nullptr && idx >= 0; }
  const Mat& val() const;
  const Mat& grad() const;
  double scalar() const { return val()(0, 0); }
};

// Reverse-mode tape over dense matrices. Nodes are created in topological
// order; backward() walks them in reverse. Scalars are 1x1 matrices.
class Tape {
 public:
  Var leaf(const Mat& value);      // gradient-tracked
  Var constant(const Mat& value);  // not tracked
  Var scalar(double v) { return constant(Mat::Constant(1, 1, v)); }

  void backward(Var root);  // root must be 1x1
  void clear_grads();       // resets all gradient buffers

  const Mat& val(int i) const { return nodes_[static_cast<size_t>(i)].val; }
  const Mat& grad(int i) const { return nodes_[static_cast<size_t>(i)].grad; }
  size_t size() const { return nodes_.size(); }

  // -- node machinery used by the op implementations --
  int push(Mat value, bool requires_grad);
  void set_back(int i, std::function<void()> back);
  Mat& grad_buffer(int i);  // lazily sized to match val
  bool requires_grad(int i) const {
    return nodes_[static_cast<size_t>(i)].requires_grad;
  }
  bool has_grad(int i) const {
    return nodes_[static_cast<size_t>(i)].grad.size() != 0;
  }

 private:
  struct Node {
    Mat val;
    Mat grad;
    bool requires_grad = false;
    std::function<void()> back;  // accumulates into parents' grads
  };
  std::deque<Node> nodes_;
};

// ---- primitive operations ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var hadamard(Var a, Var b);          // same shape
Var scalar_mul(Var s, Var a);        // s is 1x1
Var matmul(Var a, Var b);
Var transpose(Var a);
Var dot(Var a, Var b);               // Frobenius inner product -> 1x1
Var concat_rows(Var a, Var b);       // vertical
Var stack_cols(const std::vector<Var>& cols);
Var sigmoid(Var a);
Var tanh_(Var a);
Var exp_(Var a);
Var softmax(Var a);                  // column vector
Var sum(Var a);
Var mean(Var a);
Var abs_(Var a);
Var sqnorm(Var a);                   // sum of squares -> 1x1
Var affine(Var w, Var x, Var b);     // w*x + b
Var embed(Var table, int id);        // column id of table

// Fused GRU cell: z = sig(wz x + uz h + bz), r = sig(wr x + ur h + br),
// n = tanh(wn x + r .* (un h) + bn), out = (1-z) .* n + z .* h.
struct GruParams {
  Var wz, uz, bz, wr, ur, br, wn, un, bn;
};
Var gru_cell(const GruParams& p, Var x, Var h);

// Cross entropy of a logit column vector against one target index.
Var softmax_xent(Var logits, int target);
// Mean cross entropy against a multiset of target indices.
Var bow_xent(Var logits, const std::vector<int>& targets);

// -log(clamp(a, eps, 1-eps)) and -log(clamp(1-a, ...)), elementwise on 1x1.
Var neg_log(Var a, double eps = 1e-7);
Var neg_log1m(Var a, double eps = 1e-7);

// 0.5 * sum(mean^2 + exp(logvar) - logvar - 1)
Var gauss_kl(Var mean, Var logvar);

// log det of a symmetric positive definite matrix via Cholesky.
// Throws TrainAbort if the factorization fails or the result is non-finite.
Var logdet_spd(Var m);

// Square subset m(idx, idx).
Var submatrix(Var m, const std::vector<int>& idx);

}  // namespace sda::ad
