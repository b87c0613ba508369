#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sda/autodiff.hpp"
#include "sda/nn.hpp"

namespace sda {

struct VaeConfig {
  int feature_dim = 0;  // 2d, the weighted final-state size
  int hidden = 64;
  int z_dim = 32;
  int vocab_size = 0;   // for the BOW head
};

struct LatentPosterior {
  Eigen::VectorXd mean;
  Eigen::VectorXd logvar;
  Eigen::VectorXd sample;  // mean + exp(logvar/2) .* noise
};

struct Reconstruction {
  Eigen::VectorXd features;
  Eigen::VectorXd bow_logits;
};

// VAE over weighted final-state features. The query branch and the response
// branch each own a separate instance.
class FeatureVae {
 public:
  FeatureVae(const VaeConfig& cfg, uint64_t seed);

  const VaeConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  struct PosteriorVars {
    ad::Var mean, logvar, sample;
  };
  struct ReconVars {
    ad::Var features, bow_logits;
  };

  PosteriorVars encode(ad::Tape& tape, const nn::Bound& b, ad::Var weighted_final,
                       const Eigen::VectorXd& noise) const;
  ReconVars decode(const nn::Bound& b, ad::Var latent) const;

  // Inference-mode wrappers.
  LatentPosterior vae_encode(const Eigen::VectorXd& weighted_final,
                             const Eigen::VectorXd& noise) const;
  Reconstruction reconstruct(const Eigen::VectorXd& latent) const;

 private:
  VaeConfig cfg_;
  nn::ParamStore params_;
};

// kl_coeff * KL(q || N(0,I)) + ||recon - target||^2 + mean BOW cross-entropy.
ad::Var vae_loss(ad::Var weighted_final, const FeatureVae::PosteriorVars& post,
                 const FeatureVae::ReconVars& recon, double kl_coeff,
                 const std::vector<int>& target_tokens);
double vae_loss(const Eigen::VectorXd& weighted_final,
                const LatentPosterior& post, const Reconstruction& recon,
                double kl_coeff, const std::vector<int>& target_tokens);

// min(1, 0.5 * floor(batch_index / 10000)); the cap keeps the KL term from
// eventually dominating every other loss.
double kl_schedule(long batch_index);

// Representativeness Discriminator: probability that a feature vector is a
// selected-weighted original rather than a VAE reconstruction. Same FC
// architecture as the quality discriminator, without the projection.
class ReprDiscriminator {
 public:
  ReprDiscriminator(int feature_dim, uint64_t seed);

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  ad::Var score(const nn::Bound& b, ad::Var features) const;
  double score(const Eigen::VectorXd& features) const;

 private:
  int feature_dim_;
  nn::ParamStore params_;
};

// These mirror the quality-discriminator losses under the relabeling
// (m_g, m_f) -> (p_original, p_reconstructed); they share the implementation.
double rd_loss(const std::vector<double>& p_orig,
               const std::vector<double>& p_recon);
ad::Var rd_loss(const std::vector<ad::Var>& p_orig,
                const std::vector<ad::Var>& p_recon);
double selector_repr_loss(const std::vector<double>& p_recon);
ad::Var selector_repr_loss(const std::vector<ad::Var>& p_recon);
double rd_accuracy(const std::vector<double>& p_orig,
                   const std::vector<double>& p_recon);

}  // namespace sda
