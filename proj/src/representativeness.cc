#include "sda/representativeness.hpp"

#include <cmath>

#include "sda/quality_gan.hpp"
#include "sda/util.hpp"

namespace sda {

FeatureVae::FeatureVae(const VaeConfig& cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg.feature_dim <= 0 || cfg.vocab_size <= 0) {
    throw UsageError("vae: feature_dim and vocab_size must be set");
  }
  params_.add("vae.enc.w", cfg.hidden, cfg.feature_dim);
  params_.add("vae.enc.b", cfg.hidden, 1);
  params_.add("vae.mean.w", cfg.z_dim, cfg.hidden);
  params_.add("vae.mean.b", cfg.z_dim, 1);
  params_.add("vae.logvar.w", cfg.z_dim, cfg.hidden);
  params_.add("vae.logvar.b", cfg.z_dim, 1);
  params_.add("vae.dec.w", cfg.hidden, cfg.z_dim);
  params_.add("vae.dec.b", cfg.hidden, 1);
  params_.add("vae.out.w", cfg.feature_dim, cfg.hidden);
  params_.add("vae.out.b", cfg.feature_dim, 1);
  params_.add("vae.bow.w", cfg.vocab_size, cfg.z_dim);
  params_.add("vae.bow.b", cfg.vocab_size, 1);
  std::mt19937_64 rng(substream_seed(seed, "vae"));
  nn::xavier_init(params_, rng);
}

FeatureVae::PosteriorVars FeatureVae::encode(ad::Tape& tape, const nn::Bound& b,
                                             ad::Var weighted_final,
                                             const Eigen::VectorXd& noise) const {
  if (noise.size() != cfg_.z_dim) throw DataError("vae: noise dimension mismatch");
  ad::Var hidden =
      ad::tanh_(ad::affine(b["vae.enc.w"], weighted_final, b["vae.enc.b"]));
  PosteriorVars out;
  out.mean = ad::affine(b["vae.mean.w"], hidden, b["vae.mean.b"]);
  out.logvar = ad::affine(b["vae.logvar.w"], hidden, b["vae.logvar.b"]);
  ad::Var std = ad::exp_(ad::scale(out.logvar, 0.5));
  out.sample = ad::add(out.mean, ad::hadamard(std, tape.constant(noise)));
  return out;
}

FeatureVae::ReconVars FeatureVae::decode(const nn::Bound& b, ad::Var latent) const {
  ad::Var hidden = ad::tanh_(ad::affine(b["vae.dec.w"], latent, b["vae.dec.b"]));
  ReconVars out;
  out.features = ad::affine(b["vae.out.w"], hidden, b["vae.out.b"]);
  out.bow_logits = ad::affine(b["vae.bow.w"], latent, b["vae.bow.b"]);
  return out;
}

LatentPosterior FeatureVae::vae_encode(const Eigen::VectorXd& weighted_final,
                                       const Eigen::VectorXd& noise) const {
  ad::Tape tape;
  nn::Bound b(tape, const_cast<nn::ParamStore&>(params_));
  PosteriorVars vars = encode(tape, b, tape.constant(weighted_final), noise);
  return {vars.mean.val().col(0), vars.logvar.val().col(0),
          vars.sample.val().col(0)};
}

Reconstruction FeatureVae::reconstruct(const Eigen::VectorXd& latent) const {
  ad::Tape tape;
  nn::Bound b(tape, const_cast<nn::ParamStore&>(params_));
  ReconVars vars = decode(b, tape.constant(latent));
  return {vars.features.val().col(0), vars.bow_logits.val().col(0)};
}

ad::Var vae_loss(ad::Var weighted_final, const FeatureVae::PosteriorVars& post,
                 const FeatureVae::ReconVars& recon, double kl_coeff,
                 const std::vector<int>& target_tokens) {
  if (target_tokens.empty()) throw DataError("vae_loss: empty target tokens");
  ad::Var kl = ad::gauss_kl(post.mean, post.logvar);
  ad::Var rec = ad::sqnorm(ad::sub(recon.features, weighted_final));
  ad::Var bow = ad::bow_xent(recon.bow_logits, target_tokens);
  return ad::add(ad::scale(kl, kl_coeff), ad::add(rec, bow));
}

double vae_loss(const Eigen::VectorXd& weighted_final,
                const LatentPosterior& post, const Reconstruction& recon,
                double kl_coeff, const std::vector<int>& target_tokens) {
  if (target_tokens.empty()) throw DataError("vae_loss: empty target tokens");
  double kl = 0.5 * (post.mean.array().square() + post.logvar.array().exp() -
                     post.logvar.array() - 1.0)
                        .sum();
  double rec = (recon.features - weighted_final).squaredNorm();
  Eigen::ArrayXd z = recon.bow_logits.array();
  double mx = z.maxCoeff();
  double lse = mx + std::log((z - mx).exp().sum());
  double avg = 0;
  for (int id : target_tokens) avg += z(id);
  avg /= static_cast<double>(target_tokens.size());
  return kl_coeff * kl + rec + (lse - avg);
}

double kl_schedule(long batch_index) {
  if (batch_index < 0) throw UsageError("kl_schedule: negative batch index");
  return std::min(1.0, 0.5 * static_cast<double>(batch_index / 10000));
}

ReprDiscriminator::ReprDiscriminator(int feature_dim, uint64_t seed)
    : feature_dim_(feature_dim) {
  const long f = feature_dim;
  params_.add("rd.fc1.w", f, f);
  params_.add("rd.fc1.b", f, 1);
  params_.add("rd.fc2.w", 1, f);
  params_.add("rd.fc2.b", 1, 1);
  std::mt19937_64 rng(substream_seed(seed, "rd"));
  nn::xavier_init(params_, rng);
}

ad::Var ReprDiscriminator::score(const nn::Bound& b, ad::Var features) const {
  if (features.val().rows() != feature_dim_) {
    throw DataError("repr discriminator: feature dimension mismatch");
  }
  ad::Var x = ad::tanh_(ad::affine(b["rd.fc1.w"], features, b["rd.fc1.b"]));
  x = ad::affine(b["rd.fc2.w"], x, b["rd.fc2.b"]);
  return ad::sigmoid(x);
}

double ReprDiscriminator::score(const Eigen::VectorXd& features) const {
  ad::Tape tape;
  nn::Bound b(tape, const_cast<nn::ParamStore&>(params_));
  return score(b, tape.constant(features)).scalar();
}

double rd_loss(const std::vector<double>& p_orig,
               const std::vector<double>& p_recon) {
  return gqd_loss(p_orig, p_recon);
}

ad::Var rd_loss(const std::vector<ad::Var>& p_orig,
                const std::vector<ad::Var>& p_recon) {
  return gqd_loss(p_orig, p_recon);
}

double selector_repr_loss(const std::vector<double>& p_recon) {
  return selector_quality_loss(p_recon);
}

ad::Var selector_repr_loss(const std::vector<ad::Var>& p_recon) {
  return selector_quality_loss(p_recon);
}

double rd_accuracy(const std::vector<double>& p_orig,
                   const std::vector<double>& p_recon) {
  return gqd_accuracy(p_orig, p_recon);
}

}  // namespace sda
