#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sda/autodiff.hpp"
#include "sda/encoder.hpp"
#include "sda/nn.hpp"

namespace sda {

// Quality branch (hat, weight 1-s) and representativeness branch (tilde,
// weight s) of one encoded pair. hat + tilde reproduces the original.
struct WeightedFeatures {
  Eigen::MatrixXd q_hat, r_hat;
  Eigen::MatrixXd q_tilde, r_tilde;
  Eigen::VectorXd q_hat_final, r_hat_final;
  Eigen::VectorXd q_tilde_final, r_tilde_final;
};

struct WeightedFeaturesVars {
  std::vector<ad::Var> q_hat_states, r_hat_states;
  std::vector<ad::Var> q_tilde_states, r_tilde_states;
  ad::Var q_hat_final, r_hat_final;
  ad::Var q_tilde_final, r_tilde_final;
};

struct DppKernel {
  Eigen::MatrixXd matrix;
  int feature_dim = 0;
};

// Maps the concatenated final states of a pair to a selection score in (0,1)
// via a 5-layer MLP; input dimension 4d, widths tapering to a scalar.
class Selector {
 public:
  Selector(int encoder_hidden, uint64_t seed);

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  ad::Var score(ad::Tape& tape, const nn::Bound& b,
                const EncodedPairVars& encoded) const;

  // Inference-mode score of a value-level encoding.
  double score_value(const EncodedPair& encoded) const;

 private:
  int d_;
  std::vector<long> widths_;  // output width per layer
  nn::ParamStore params_;
};

// Splits a feature into (hat, tilde) = ((1-s) x, s x). The larger branch is
// computed by multiplication and the smaller by subtraction, so
// hat + tilde == x holds exactly in floating point.
std::pair<ad::Var, ad::Var> split_hat_tilde(ad::Var x, ad::Var s);

WeightedFeaturesVars weight_features(ad::Tape& tape,
                                     const EncodedPairVars& encoded, ad::Var s);
WeightedFeatures weight_features(const EncodedPair& encoded, double s);

// || target_fraction - mean(scores) ||_2 (scalar: absolute deviation).
double length_regularizer(const std::vector<double>& scores,
                          double target_fraction);
ad::Var length_regularizer(ad::Tape& tape, const std::vector<ad::Var>& scores,
                           double target_fraction);

// L_ij = s_i * s_j * <f_i, f_j>; symmetric PSD by construction.
DppKernel dpp_kernel(const std::vector<double>& scores,
                     const std::vector<Eigen::VectorXd>& final_features);

// Hard subset S = { i : s_i > 0.5 } (strict; ties excluded).
std::vector<int> dpp_selected(const std::vector<double>& scores);

// -log det(L(S) + eps I) + log det(L + I); det over the empty set is 1.
double dpp_loss(const DppKernel& kernel, const std::vector<double>& scores,
                double eps = 1e-6);

// Tape route: builds the kernel from score and feature vars so gradients
// flow through the kernel entries; subset membership is fixed per call.
ad::Var dpp_loss(ad::Tape& tape, const std::vector<ad::Var>& scores,
                 const std::vector<ad::Var>& final_features, double eps = 1e-6);

}  // namespace sda
