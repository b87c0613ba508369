#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sda/autodiff.hpp"
#include "sda/nn.hpp"

namespace sda {

// Generation Quality Discriminator: matching scores in (0,1) for
// (query, gold response) and (query, generated response) pairs.
// Two affine layers with tanh between, scalar sigmoid head; negative pairs
// pass through a learned dimension transformation first.
class QualityDiscriminator {
 public:
  // feature_dim = 2d, the bidirectional final-state size.
  QualityDiscriminator(int feature_dim, uint64_t seed);

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // m_g = sigmoid(FC([q_hat_final; r_hat_final])); inputs already (1-s)-weighted.
  ad::Var match_positive(const nn::Bound& b, ad::Var q_hat_final,
                         ad::Var r_hat_final) const;
  double match_positive(const Eigen::VectorXd& q_hat_final,
                        const Eigen::VectorXd& r_hat_final) const;

  // The generated response is re-encoded by the shared encoder; its raw
  // final state goes through the projection, is weighted by the same (1-s),
  // and is matched against the weighted query.
  ad::Var match_negative(const nn::Bound& b, ad::Var q_hat_final,
                         ad::Var generated_final_raw, ad::Var s) const;
  double match_negative(const Eigen::VectorXd& q_hat_final,
                        const Eigen::VectorXd& generated_final_raw,
                        double s) const;

  // Test hook: forces the dimension transformation to identity.
  void set_identity_projection();

 private:
  ad::Var fc(const nn::Bound& b, ad::Var q_feat, ad::Var r_feat) const;
  int feature_dim_;
  nn::ParamStore params_;
};

// L_D = -sum_i [ log(1 - m_f^i) + log(m_g^i) ]
double gqd_loss(const std::vector<double>& m_g, const std::vector<double>& m_f);
ad::Var gqd_loss(const std::vector<ad::Var>& m_g, const std::vector<ad::Var>& m_f);

// L_G = -sum_i log(m_f^i); reaches the selector through the (1-s) weighting.
double selector_quality_loss(const std::vector<double>& m_f);
ad::Var selector_quality_loss(const std::vector<ad::Var>& m_f);

// Fraction of correct decisions over 2N: m_g > 0.5 and m_f < 0.5 (strict;
// a score of exactly 0.5 counts as incorrect).
double gqd_accuracy(const std::vector<double>& m_g,
                    const std::vector<double>& m_f);

}  // namespace sda
