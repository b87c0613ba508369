#include "sda/quality_gan.hpp"

#include <cmath>

#include "sda/selector.hpp"
#include "sda/util.hpp"

namespace sda {

QualityDiscriminator::QualityDiscriminator(int feature_dim, uint64_t seed)
    : feature_dim_(feature_dim) {
  const long f = feature_dim;
  params_.add("gqd.proj.w", f, f);
  params_.add("gqd.proj.b", f, 1);
  params_.add("gqd.fc1.w", f, 2 * f);
  params_.add("gqd.fc1.b", f, 1);
  params_.add("gqd.fc2.w", 1, f);
  params_.add("gqd.fc2.b", 1, 1);
  std::mt19937_64 rng(substream_seed(seed, "quality_gan"));
  nn::xavier_init(params_, rng);
}

void QualityDiscriminator::set_identity_projection() {
  params_.at("gqd.proj.w").value =
      Eigen::MatrixXd::Identity(feature_dim_, feature_dim_);
  params_.at("gqd.proj.b").value.setZero();
}

ad::Var QualityDiscriminator::fc(const nn::Bound& b, ad::Var q_feat,
                                 ad::Var r_feat) const {
  if (q_feat.val().rows() != feature_dim_ || r_feat.val().rows() != feature_dim_) {
    throw DataError("quality discriminator: feature dimension mismatch");
  }
  ad::Var x = ad::concat_rows(q_feat, r_feat);
  x = ad::tanh_(ad::affine(b["gqd.fc1.w"], x, b["gqd.fc1.b"]));
  x = ad::affine(b["gqd.fc2.w"], x, b["gqd.fc2.b"]);
  return ad::sigmoid(x);
}

ad::Var QualityDiscriminator::match_positive(const nn::Bound& b,
                                             ad::Var q_hat_final,
                                             ad::Var r_hat_final) const {
  return fc(b, q_hat_final, r_hat_final);
}

double QualityDiscriminator::match_positive(
    const Eigen::VectorXd& q_hat_final,
    const Eigen::VectorXd& r_hat_final) const {
  ad::Tape tape;
  nn::Bound b(tape, const_cast<nn::ParamStore&>(params_));
  return match_positive(b, tape.constant(q_hat_final),
                        tape.constant(r_hat_final))
      .scalar();
}

ad::Var QualityDiscriminator::match_negative(const nn::Bound& b,
                                             ad::Var q_hat_final,
                                             ad::Var generated_final_raw,
                                             ad::Var s) const {
  ad::Var projected =
      ad::affine(b["gqd.proj.w"], generated_final_raw, b["gqd.proj.b"]);
  // same (1-s) weighting as the positive branch
  ad::Var weighted = split_hat_tilde(projected, s).first;
  return fc(b, q_hat_final, weighted);
}

double QualityDiscriminator::match_negative(
    const Eigen::VectorXd& q_hat_final,
    const Eigen::VectorXd& generated_final_raw, double s) const {
  ad::Tape tape;
  nn::Bound b(tape, const_cast<nn::ParamStore&>(params_));
  return match_negative(b, tape.constant(q_hat_final),
                        tape.constant(generated_final_raw),
                        tape.scalar(s))
      .scalar();
}

namespace {
double clamp_unit(double v, double eps = 1e-7) {
  return std::min(std::max(v, eps), 1.0 - eps);
}
}  // namespace

double gqd_loss(const std::vector<double>& m_g, const std::vector<double>& m_f) {
  if (m_g.size() != m_f.size()) throw DataError("gqd_loss: unpaired scores");
  double loss = 0;
  for (size_t i = 0; i < m_g.size(); ++i) {
    loss -= std::log(clamp_unit(1.0 - m_f[i])) + std::log(clamp_unit(m_g[i]));
  }
  return loss;
}

ad::Var gqd_loss(const std::vector<ad::Var>& m_g,
                 const std::vector<ad::Var>& m_f) {
  if (m_g.size() != m_f.size() || m_g.empty()) {
    throw DataError("gqd_loss: unpaired scores");
  }
  std::vector<ad::Var> terms;
  terms.reserve(2 * m_g.size());
  for (size_t i = 0; i < m_g.size(); ++i) {
    terms.push_back(ad::neg_log1m(m_f[i]));
    terms.push_back(ad::neg_log(m_g[i]));
  }
  return ad::sum(ad::stack_cols(terms));
}

double selector_quality_loss(const std::vector<double>& m_f) {
  double loss = 0;
  for (double v : m_f) loss -= std::log(clamp_unit(v));
  return loss;
}

ad::Var selector_quality_loss(const std::vector<ad::Var>& m_f) {
  if (m_f.empty()) throw DataError("selector_quality_loss: empty batch");
  std::vector<ad::Var> terms;
  terms.reserve(m_f.size());
  for (ad::Var v : m_f) terms.push_back(ad::neg_log(v));
  return ad::sum(ad::stack_cols(terms));
}

double gqd_accuracy(const std::vector<double>& m_g,
                    const std::vector<double>& m_f) {
  if (m_g.empty() || m_g.size() != m_f.size()) {
    throw DataError("gqd_accuracy: empty or unpaired batch");
  }
  long correct = 0;
  for (double v : m_g) {
    if (v > 0.5) ++correct;
  }
  for (double v : m_f) {
    if (v < 0.5) ++correct;
  }
  return static_cast<double>(correct) / (2.0 * static_cast<double>(m_g.size()));
}

}  // namespace sda
