#include "sda/autodiff.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

#include "sda/util.hpp"

namespace sda::ad {

const Mat& Var::val() const { return tape->val(idx); }
const Mat& Var::grad() const { return tape->grad(idx); }

int Tape::push(Mat value, bool requires_grad) {
  Node node;
  node.val = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::set_back(int i, std::function<void()> back) {
  nodes_[static_cast<size_t>(i)].back = std::move(back);
}

Mat& Tape::grad_buffer(int i) {
  Node& n = nodes_[static_cast<size_t>(i)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
  return n.grad;
}

Var Tape::leaf(const Mat& value) { return Var{this, push(value, true)}; }

Var Tape::constant(const Mat& value) { return Var{this, push(value, false)}; }

void Tape::clear_grads() {
  for (auto& n : nodes_) n.grad.resize(0, 0);
}

void Tape::backward(Var root) {
  if (root.tape != this) throw std::logic_error("backward: foreign var");
  const Node& r = nodes_[static_cast<size_t>(root.idx)];
  if (r.val.rows() != 1 || r.val.cols() != 1) {
    throw std::logic_error("backward: root must be scalar");
  }
  grad_buffer(root.idx)(0, 0) += 1.0;
  for (int i = root.idx; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || !n.back) continue;
    if (n.grad.size() == 0) continue;  // not on a path to the root
    n.back();
  }
}

namespace {

bool track(Var a) { return a.tape->requires_grad(a.idx); }
bool track(Var a, Var b) { return track(a) || track(b); }

// Accumulate g into the grad buffer of node i if it is tracked.
void accum(Tape& t, int i, const Mat& g) {
  if (t.requires_grad(i)) t.grad_buffer(i) += g;
}

struct Ctx {
  Tape* t;
  int out;
  const Mat& g() const { return t->grad(out); }
};

template <typename F>
Var make_op(Tape& t, Mat value, bool req, F&& back) {
  int i = t.push(std::move(value), req);
  if (req) {
    t.set_back(i, [&t, i, back = std::forward<F>(back)]() {
      back(Ctx{&t, i});
    });
  }
  return Var{&t, i};
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  int ia = a.idx, ib = b.idx;
  return make_op(t, a.val() + b.val(), track(a, b), [ia, ib](Ctx c) {
    accum(*c.t, ia, c.g());
    accum(*c.t, ib, c.g());
  });
}

Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  int ia = a.idx, ib = b.idx;
  return make_op(t, a.val() - b.val(), track(a, b), [ia, ib](Ctx c) {
    accum(*c.t, ia, c.g());
    accum(*c.t, ib, -c.g());
  });
}

Var neg(Var a) {
  Tape& t = *a.tape;
  int ia = a.idx;
  return make_op(t, -a.val(), track(a), [ia](Ctx c) {
    accum(*c.t, ia, -c.g());
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  int ia = a.idx;
  return make_op(t, s * a.val(), track(a), [ia, s](Ctx c) {
    accum(*c.t, ia, s * c.g());
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = *a.tape;
  int ia = a.idx, ib = b.idx;
  return make_op(t, a.val().cwiseProduct(b.val()), track(a, b), [ia, ib](Ctx c) {
    accum(*c.t, ia, c.g().cwiseProduct(c.t->val(ib)));
    accum(*c.t, ib, c.g().cwiseProduct(c.t->val(ia)));
  });
}

Var scalar_mul(Var s, Var a) {
  Tape& t = *a.tape;
  int is = s.idx, ia = a.idx;
  return make_op(t, s.scalar() * a.val(), track(s, a), [is, ia](Ctx c) {
    if (c.t->requires_grad(is)) {
      c.t->grad_buffer(is)(0, 0) += c.g().cwiseProduct(c.t->val(ia)).sum();
    }
    accum(*c.t, ia, c.t->val(is)(0, 0) * c.g());
  });
}

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  int ia = a.idx, ib = b.idx;
  return make_op(t, a.val() * b.val(), track(a, b), [ia, ib](Ctx c) {
    accum(*c.t, ia, c.g() * c.t->val(ib).transpose());
    accum(*c.t, ib, c.t->val(ia).transpose() * c.g());
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  int ia = a.idx;
  return make_op(t, a.val().transpose(), track(a), [ia](Ctx c) {
    accum(*c.t, ia, c.g().transpose());
  });
}

Var dot(Var a, Var b) {
  Tape& t = *a.tape;
  int ia = a.idx, ib = b.idx;
  Mat v = Mat::Constant(1, 1, a.val().cwiseProduct(b.val()).sum());
  return make_op(t, std::move(v), track(a, b), [ia, ib](Ctx c) {
    double g = c.g()(0, 0);
    accum(*c.t, ia, g * c.t->val(ib));
    accum(*c.t, ib, g * c.t->val(ia));
  });
}

Var concat_rows(Var a, Var b) {
  Tape& t = *a.tape;
  int ia = a.idx, ib = b.idx;
  Mat v(a.val().rows() + b.val().rows(), a.val().cols());
  v << a.val(), b.val();
  long na = a.val().rows();
  return make_op(t, std::move(v), track(a, b), [ia, ib, na](Ctx c) {
    long nb = c.g().rows() - na;
    accum(*c.t, ia, c.g().topRows(na));
    accum(*c.t, ib, c.g().bottomRows(nb));
  });
}

Var stack_cols(const std::vector<Var>& cols) {
  Tape& t = *cols.front().tape;
  Mat v(cols.front().val().rows(), static_cast<long>(cols.size()));
  bool req = false;
  std::vector<int> parents(cols.size());
  for (size_t j = 0; j < cols.size(); ++j) {
    v.col(static_cast<long>(j)) = cols[j].val();
    parents[j] = cols[j].idx;
    req = req || track(cols[j]);
  }
  return make_op(t, std::move(v), req, [parents](Ctx c) {
    for (size_t j = 0; j < parents.size(); ++j) {
      accum(*c.t, parents[j], c.g().col(static_cast<long>(j)));
    }
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  int ia = a.idx;
  Mat v = (1.0 / (1.0 + (-a.val().array()).exp())).matrix();
  int out = t.push(std::move(v), track(a));
  if (track(a)) {
    t.set_back(out, [&t, ia, out]() {
      const Mat& y = t.val(out);
      t.grad_buffer(ia) +=
          t.grad(out).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
    });
  }
  return Var{&t, out};
}

Var tanh_(Var a) {
  Tape& t = *a.tape;
  int ia = a.idx;
  Mat v = a.val().array().tanh().matrix();
  int out = t.push(std::move(v), track(a));
  if (track(a)) {
    t.set_back(out, [&t, ia, out]() {
      const Mat& y = t.val(out);
      t.grad_buffer(ia) +=
          t.grad(out).cwiseProduct((1.0 - y.array().square()).matrix());
    });
  }
  return Var{&t, out};
}

Var exp_(Var a) {
  Tape& t = *a.tape;
  int ia = a.idx;
  Mat v = a.val().array().exp().matrix();
  int out = t.push(std::move(v), track(a));
  if (track(a)) {
    t.set_back(out, [&t, ia, out]() {
      t.grad_buffer(ia) += t.grad(out).cwiseProduct(t.val(out));
    });
  }
  return Var{&t, out};
}

Var softmax(Var a) {
  Tape& t = *a.tape;
  int ia = a.idx;
  Eigen::ArrayXd z = a.val().col(0).array();
  z -= z.maxCoeff();
  Eigen::ArrayXd e = z.exp();
  Mat y = (e / e.sum()).matrix();
  int out = t.push(std::move(y), track(a));
  if (track(a)) {
    t.set_back(out, [&t, ia, out]() {
      const Mat& y = t.val(out);
      const Mat& g = t.grad(out);
      double gy = g.cwiseProduct(y).sum();
      t.grad_buffer(ia) += y.cwiseProduct((g.array() - gy).matrix());
    });
  }
  return Var{&t, out};
}

Var sum(Var a) {
  Tape& t = *a.tape;
  int ia = a.idx;
  return make_op(t, Mat::Constant(1, 1, a.val().sum()), track(a), [ia](Ctx c) {
    if (c.t->requires_grad(ia)) {
      c.t->grad_buffer(ia).array() += c.g()(0, 0);
    }
  });
}

Var mean(Var a) {
  Tape& t = *a.tape;
  int ia = a.idx;
  double n = static_cast<double>(a.val().size());
  return make_op(t, Mat::Constant(1, 1, a.val().mean()), track(a),
                 [ia, n](Ctx c) {
                   if (c.t->requires_grad(ia)) {
                     c.t->grad_buffer(ia).array() += c.g()(0, 0) / n;
                   }
                 });
}

Var abs_(Var a) {
  Tape& t = *a.tape;
  int ia = a.idx;
  return make_op(t, a.val().cwiseAbs(), track(a), [ia](Ctx c) {
    // subgradient 0 at exactly 0
    Mat sign = c.t->val(ia).array().sign().matrix();
    accum(*c.t, ia, c.g().cwiseProduct(sign));
  });
}

Var sqnorm(Var a) {
  Tape& t = *a.tape;
  int ia = a.idx;
  return make_op(t, Mat::Constant(1, 1, a.val().squaredNorm()), track(a),
                 [ia](Ctx c) {
                   accum(*c.t, ia, 2.0 * c.g()(0, 0) * c.t->val(ia));
                 });
}

Var affine(Var w, Var x, Var b) {
  Tape& t = *w.tape;
  int iw = w.idx, ix = x.idx, ib = b.idx;
  bool req = track(w) || track(x) || track(b);
  return make_op(t, w.val() * x.val() + b.val(), req, [iw, ix, ib](Ctx c) {
    accum(*c.t, iw, c.g() * c.t->val(ix).transpose());
    accum(*c.t, ix, c.t->val(iw).transpose() * c.g());
    accum(*c.t, ib, c.g());
  });
}

Var embed(Var table, int id) {
  Tape& t = *table.tape;
  int it = table.idx;
  if (id < 0 || id >= table.val().cols()) {
    throw DataError("token index out of vocabulary range: " + std::to_string(id));
  }
  return make_op(t, table.val().col(id), track(table), [it, id](Ctx c) {
    if (c.t->requires_grad(it)) {
      c.t->grad_buffer(it).col(id) += c.g();
    }
  });
}

Var gru_cell(const GruParams& p, Var x, Var h) {
  Tape& t = *x.tape;
  const Mat& xv = x.val();
  const Mat& hv = h.val();
  auto sig = [](const Mat& m) {
    return Mat((1.0 / (1.0 + (-m.array()).exp())).matrix());
  };
  Mat z = sig(p.wz.val() * xv + p.uz.val() * hv + p.bz.val());
  Mat r = sig(p.wr.val() * xv + p.ur.val() * hv + p.br.val());
  Mat uh = p.un.val() * hv;
  Mat n = (p.wn.val() * xv + r.cwiseProduct(uh) + p.bn.val()).array().tanh().matrix();
  Mat out = (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(hv);

  bool req = track(x) || track(h) || track(p.wz) || track(p.uz) || track(p.bz) ||
             track(p.wr) || track(p.ur) || track(p.br) || track(p.wn) ||
             track(p.un) || track(p.bn);
  int iwz = p.wz.idx, iuz = p.uz.idx, ibz = p.bz.idx;
  int iwr = p.wr.idx, iur = p.ur.idx, ibr = p.br.idx;
  int iwn = p.wn.idx, iun = p.un.idx, ibn = p.bn.idx;
  int ix = x.idx, ih = h.idx;
  return make_op(
      t, std::move(out), req,
      [=, z = std::move(z), r = std::move(r), n = std::move(n),
       uh = std::move(uh)](Ctx c) {
        Tape& t = *c.t;
        const Mat& g = c.g();
        const Mat& xv = t.val(ix);
        const Mat& hv = t.val(ih);
        Mat dn = g.cwiseProduct((1.0 - z.array()).matrix());
        Mat dz = g.cwiseProduct(hv - n);
        Mat dh = g.cwiseProduct(z);
        Mat dan = dn.cwiseProduct((1.0 - n.array().square()).matrix());
        Mat dr = dan.cwiseProduct(uh);
        Mat duh = dan.cwiseProduct(r);
        Mat dar = dr.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));
        Mat daz = dz.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));

        accum(t, iwn, dan * xv.transpose());
        accum(t, ibn, dan);
        accum(t, iun, duh * hv.transpose());
        accum(t, iwr, dar * xv.transpose());
        accum(t, ibr, dar);
        accum(t, iur, dar * hv.transpose());
        accum(t, iwz, daz * xv.transpose());
        accum(t, ibz, daz);
        accum(t, iuz, daz * hv.transpose());

        if (t.requires_grad(ih)) {
          t.grad_buffer(ih) += dh + t.val(iun).transpose() * duh +
                               t.val(iur).transpose() * dar +
                               t.val(iuz).transpose() * daz;
        }
        if (t.requires_grad(ix)) {
          t.grad_buffer(ix) += t.val(iwn).transpose() * dan +
                               t.val(iwr).transpose() * dar +
                               t.val(iwz).transpose() * daz;
        }
      });
}

Var softmax_xent(Var logits, int target) {
  Tape& t = *logits.tape;
  int il = logits.idx;
  Eigen::ArrayXd z = logits.val().col(0).array();
  double zmax = z.maxCoeff();
  double lse = zmax + std::log((z - zmax).exp().sum());
  Mat v = Mat::Constant(1, 1, lse - z(target));
  Mat probs = ((z - lse).exp()).matrix();
  return make_op(t, std::move(v), track(logits),
                 [il, target, probs = std::move(probs)](Ctx c) {
                   Mat d = probs;
                   d(target, 0) -= 1.0;
                   accum(*c.t, il, c.g()(0, 0) * d);
                 });
}

Var bow_xent(Var logits, const std::vector<int>& targets) {
  Tape& t = *logits.tape;
  int il = logits.idx;
  Eigen::ArrayXd z = logits.val().col(0).array();
  double zmax = z.maxCoeff();
  double lse = zmax + std::log((z - zmax).exp().sum());
  double avg = 0;
  for (int id : targets) avg += z(id);
  avg /= static_cast<double>(targets.size());
  Mat v = Mat::Constant(1, 1, lse - avg);
  Mat probs = ((z - lse).exp()).matrix();
  double w = 1.0 / static_cast<double>(targets.size());
  return make_op(t, std::move(v), track(logits),
                 [il, targets, w, probs = std::move(probs)](Ctx c) {
                   Mat d = probs;
                   for (int id : targets) d(id, 0) -= w;
                   accum(*c.t, il, c.g()(0, 0) * d);
                 });
}

Var neg_log(Var a, double eps) {
  Tape& t = *a.tape;
  int ia = a.idx;
  Mat clamped = a.val().cwiseMax(eps).cwiseMin(1.0 - eps);
  Mat v = (-clamped.array().log()).matrix();
  Mat inside =
      ((a.val().array() >= eps) && (a.val().array() <= 1.0 - eps))
          .cast<double>()
          .matrix();
  return make_op(t, std::move(v), track(a),
                 [ia, clamped = std::move(clamped),
                  inside = std::move(inside)](Ctx c) {
                   Mat d = (-inside.array() / clamped.array()).matrix();
                   accum(*c.t, ia, c.g().cwiseProduct(d));
                 });
}

Var neg_log1m(Var a, double eps) {
  Tape& t = *a.tape;
  int ia = a.idx;
  Mat one_minus = (1.0 - a.val().array()).matrix();
  Mat clamped = one_minus.cwiseMax(eps).cwiseMin(1.0 - eps);
  Mat v = (-clamped.array().log()).matrix();
  Mat inside = ((one_minus.array() >= eps) && (one_minus.array() <= 1.0 - eps))
                   .cast<double>()
                   .matrix();
  return make_op(t, std::move(v), track(a),
                 [ia, clamped = std::move(clamped),
                  inside = std::move(inside)](Ctx c) {
                   Mat d = (inside.array() / clamped.array()).matrix();
                   accum(*c.t, ia, c.g().cwiseProduct(d));
                 });
}

Var gauss_kl(Var mn, Var logvar) {
  Tape& t = *mn.tape;
  int im = mn.idx, il = logvar.idx;
  const auto& m = mn.val().array();
  const auto& lv = logvar.val().array();
  double kl = 0.5 * (m.square() + lv.exp() - lv - 1.0).sum();
  return make_op(t, Mat::Constant(1, 1, kl), track(mn, logvar), [im, il](Ctx c) {
    double g = c.g()(0, 0);
    accum(*c.t, im, g * c.t->val(im));
    accum(*c.t, il,
          (0.5 * g * (c.t->val(il).array().exp() - 1.0)).matrix());
  });
}

Var logdet_spd(Var m) {
  Tape& t = *m.tape;
  int im = m.idx;
  // Symmetrize so the value and the gradient agree for any input; exact
  // no-op for the symmetric kernels this is used on.
  Mat msym = 0.5 * (m.val() + m.val().transpose());
  Eigen::LLT<Mat> llt(msym);
  if (llt.info() != Eigen::Success) {
    throw TrainAbort("logdet: matrix is not positive definite");
  }
  double ld = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  if (!std::isfinite(ld)) {
    throw TrainAbort("logdet: non-finite determinant");
  }
  long n = m.val().rows();
  Mat inv = llt.solve(Mat::Identity(n, n));
  return make_op(t, Mat::Constant(1, 1, ld), track(m),
                 [im, inv = std::move(inv)](Ctx c) {
                   accum(*c.t, im, c.g()(0, 0) * inv);
                 });
}

Var submatrix(Var m, const std::vector<int>& idx) {
  Tape& t = *m.tape;
  int im = m.idx;
  long k = static_cast<long>(idx.size());
  Mat v(k, k);
  for (long i = 0; i < k; ++i) {
    for (long j = 0; j < k; ++j) {
      v(i, j) = m.val()(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
  }
  return make_op(t, std::move(v), track(m), [im, idx](Ctx c) {
    if (!c.t->requires_grad(im)) return;
    Mat& g = c.t->grad_buffer(im);
    long k = static_cast<long>(idx.size());
    for (long i = 0; i < k; ++i) {
      for (long j = 0; j < k; ++j) {
        g(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]) +=
            c.g()(i, j);
      }
    }
  });
}

}  // namespace sda::ad
