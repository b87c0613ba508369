#include "sda/selector.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "sda/util.hpp"

namespace sda {

Selector::Selector(int encoder_hidden, uint64_t seed) : d_(encoder_hidden) {
  const long in = 4L * d_;
  widths_ = {4L * d_, 2L * d_, std::max(1L, static_cast<long>(d_)),
             std::max(1L, d_ / 2L), 1L};
  long prev = in;
  for (size_t l = 0; l < widths_.size(); ++l) {
    params_.add("sel.w" + std::to_string(l), widths_[l], prev);
    params_.add("sel.b" + std::to_string(l), widths_[l], 1);
    prev = widths_[l];
  }
  std::mt19937_64 rng(substream_seed(seed, "selector"));
  nn::xavier_init(params_, rng);
}

ad::Var Selector::score(ad::Tape& tape, const nn::Bound& b,
                        const EncodedPairVars& encoded) const {
  (void)tape;
  if (encoded.query_final.val().rows() != 2L * d_ ||
      encoded.response_final.val().rows() != 2L * d_) {
    throw DataError("selector: final-state dimension mismatch");
  }
  ad::Var x = ad::concat_rows(encoded.query_final, encoded.response_final);
  for (size_t l = 0; l < widths_.size(); ++l) {
    x = ad::affine(b["sel.w" + std::to_string(l)], x,
                   b["sel.b" + std::to_string(l)]);
    if (l + 1 < widths_.size()) x = ad::tanh_(x);
  }
  return ad::sigmoid(x);
}

double Selector::score_value(const EncodedPair& encoded) const {
  ad::Tape tape;
  nn::Bound b(tape, const_cast<nn::ParamStore&>(params_));
  EncodedPairVars vars;
  vars.query_final = tape.constant(encoded.query_final);
  vars.response_final = tape.constant(encoded.response_final);
  return score(tape, b, vars).scalar();
}

std::pair<ad::Var, ad::Var> split_hat_tilde(ad::Var x, ad::Var s) {
  if (s.scalar() > 0.5) {
    ad::Var tilde = ad::scalar_mul(s, x);
    ad::Var hat = ad::sub(x, tilde);
    return {hat, tilde};
  }
  ad::Var one_minus = ad::sub(x.tape->scalar(1.0), s);
  ad::Var hat = ad::scalar_mul(one_minus, x);
  ad::Var tilde = ad::sub(x, hat);
  return {hat, tilde};
}

WeightedFeaturesVars weight_features(ad::Tape& tape,
                                     const EncodedPairVars& encoded,
                                     ad::Var s) {
  (void)tape;
  WeightedFeaturesVars out;
  for (ad::Var v : encoded.query_states) {
    auto [hat, tilde] = split_hat_tilde(v, s);
    out.q_hat_states.push_back(hat);
    out.q_tilde_states.push_back(tilde);
  }
  for (ad::Var v : encoded.response_states) {
    auto [hat, tilde] = split_hat_tilde(v, s);
    out.r_hat_states.push_back(hat);
    out.r_tilde_states.push_back(tilde);
  }
  auto [qh, qt] = split_hat_tilde(encoded.query_final, s);
  auto [rh, rt] = split_hat_tilde(encoded.response_final, s);
  out.q_hat_final = qh;
  out.q_tilde_final = qt;
  out.r_hat_final = rh;
  out.r_tilde_final = rt;
  return out;
}

namespace {

template <typename T>
void split_value(const T& x, double s, T* hat, T* tilde) {
  if (s > 0.5) {
    *tilde = s * x;
    *hat = x - *tilde;
  } else {
    *hat = (1.0 - s) * x;
    *tilde = x - *hat;
  }
}

}  // namespace

WeightedFeatures weight_features(const EncodedPair& encoded, double s) {
  WeightedFeatures out;
  split_value(encoded.query_states, s, &out.q_hat, &out.q_tilde);
  split_value(encoded.response_states, s, &out.r_hat, &out.r_tilde);
  split_value(encoded.query_final, s, &out.q_hat_final, &out.q_tilde_final);
  split_value(encoded.response_final, s, &out.r_hat_final, &out.r_tilde_final);
  return out;
}

double length_regularizer(const std::vector<double>& scores,
                          double target_fraction) {
  if (scores.empty()) throw DataError("length_regularizer: empty score batch");
  double m = 0;
  for (double s : scores) m += s;
  m /= static_cast<double>(scores.size());
  return std::abs(target_fraction - m);
}

ad::Var length_regularizer(ad::Tape& tape, const std::vector<ad::Var>& scores,
                           double target_fraction) {
  if (scores.empty()) throw DataError("length_regularizer: empty score batch");
  ad::Var stacked = ad::stack_cols(scores);  // 1 x N
  ad::Var m = ad::mean(stacked);
  ad::Var diff = ad::sub(tape.scalar(target_fraction), m);
  return ad::abs_(diff);
}

DppKernel dpp_kernel(const std::vector<double>& scores,
                     const std::vector<Eigen::VectorXd>& final_features) {
  if (scores.size() != final_features.size() || scores.empty()) {
    throw DataError("dpp_kernel: need one feature vector per score");
  }
  const long n = static_cast<long>(scores.size());
  DppKernel k;
  k.feature_dim = static_cast<int>(final_features[0].size());
  k.matrix.resize(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j <= i; ++j) {
      double v = scores[static_cast<size_t>(i)] * scores[static_cast<size_t>(j)] *
                 final_features[static_cast<size_t>(i)].dot(
                     final_features[static_cast<size_t>(j)]);
      k.matrix(i, j) = v;
      k.matrix(j, i) = v;
    }
  }
  return k;
}

std::vector<int> dpp_selected(const std::vector<double>& scores) {
  std::vector<int> sel;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > 0.5) sel.push_back(static_cast<int>(i));
  }
  return sel;
}

namespace {

double logdet_spd_value(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw TrainAbort("dpp_loss: shifted kernel is not positive definite");
  }
  double ld = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  if (!std::isfinite(ld)) throw TrainAbort("dpp_loss: non-finite determinant");
  return ld;
}

}  // namespace

double dpp_loss(const DppKernel& kernel, const std::vector<double>& scores,
                double eps) {
  const long n = kernel.matrix.rows();
  if (static_cast<long>(scores.size()) != n) {
    throw DataError("dpp_loss: score/kernel size mismatch");
  }
  std::vector<int> sel = dpp_selected(scores);
  double norm = logdet_spd_value(
      kernel.matrix + Eigen::MatrixXd::Identity(n, n));
  if (sel.empty()) return norm;  // det over the empty matrix is 1
  const long k = static_cast<long>(sel.size());
  Eigen::MatrixXd sub(k, k);
  for (long i = 0; i < k; ++i) {
    for (long j = 0; j < k; ++j) {
      sub(i, j) = kernel.matrix(sel[static_cast<size_t>(i)],
                                sel[static_cast<size_t>(j)]);
    }
  }
  sub += eps * Eigen::MatrixXd::Identity(k, k);
  return -logdet_spd_value(sub) + norm;
}

ad::Var dpp_loss(ad::Tape& tape, const std::vector<ad::Var>& scores,
                 const std::vector<ad::Var>& final_features, double eps) {
  const size_t n = scores.size();
  if (n == 0 || final_features.size() != n) {
    throw DataError("dpp_loss: need one feature vector per score");
  }
  ad::Var s = ad::transpose(ad::stack_cols(scores));  // N x 1
  ad::Var f = ad::stack_cols(final_features);         // dim x N
  ad::Var gram = ad::matmul(ad::transpose(f), f);     // N x N
  ad::Var outer = ad::matmul(s, ad::transpose(s));    // s s^T
  ad::Var kernel = ad::hadamard(outer, gram);

  std::vector<double> score_vals(n);
  for (size_t i = 0; i < n; ++i) score_vals[i] = scores[i].scalar();
  std::vector<int> sel = dpp_selected(score_vals);

  ad::Var shifted = ad::add(
      kernel, tape.constant(Eigen::MatrixXd::Identity(static_cast<long>(n),
                                                      static_cast<long>(n))));
  ad::Var norm = ad::logdet_spd(shifted);
  if (sel.empty()) return norm;
  ad::Var sub = ad::submatrix(kernel, sel);
  ad::Var jittered = ad::add(
      sub, tape.constant(eps * Eigen::MatrixXd::Identity(
                                   static_cast<long>(sel.size()),
                                   static_cast<long>(sel.size()))));
  return ad::sub(norm, ad::logdet_spd(jittered));
}

}  // namespace sda
