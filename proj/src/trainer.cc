#include "sda/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "sda/util.hpp"

namespace sda {

std::vector<IndexedPair> index_corpus(const Corpus& corpus,
                                      const Vocabulary& vocab) {
  std::vector<IndexedPair> out;
  out.reserve(corpus.size());
  for (const auto& pair : corpus.pairs) {
    out.push_back({pair.id, vocab.encode(pair.query), vocab.encode(pair.response)});
  }
  return out;
}

Trainer::Trainer(int vocab_size, const TrainerConfig& cfg)
    : cfg_(cfg),
      encoder_({vocab_size, cfg.embedding_dim, cfg.encoder_hidden}, cfg.seed),
      selector_(cfg.encoder_hidden, cfg.seed),
      generator_({vocab_size, cfg.embedding_dim, cfg.generator_hidden,
                  cfg.min_decode, cfg.max_decode},
                 cfg.seed),
      gqd_(2 * cfg.encoder_hidden, cfg.seed),
      vae_q_({2 * cfg.encoder_hidden, cfg.vae_hidden, cfg.z_dim, vocab_size},
             substream_seed(cfg.seed, "vae_q")),
      vae_r_({2 * cfg.encoder_hidden, cfg.vae_hidden, cfg.z_dim, vocab_size},
             substream_seed(cfg.seed, "vae_r")),
      rd_q_(2 * cfg.encoder_hidden, substream_seed(cfg.seed, "rd_q")),
      rd_r_(2 * cfg.encoder_hidden, substream_seed(cfg.seed, "rd_r")),
      opt_selector_(cfg.selector_lr, cfg.selector_weight_decay),
      opt_encoder_(cfg.selector_lr),
      opt_generator_(cfg.lr),
      opt_vae_(cfg.lr),
      opt_disc_(cfg.disc_lr),
      rng_(substream_seed(cfg.seed, "trainer")) {
  if (cfg.batch_size < 1) throw UsageError("trainer: batch_size must be >= 1");
  if (cfg.disc_cycle < 2) throw UsageError("trainer: disc_cycle must be >= 2");
  for (double w : {cfg.weights.adv_quality, cfg.weights.adv_repr,
                   cfg.weights.length_reg, cfg.weights.dpp, cfg.weights.vae,
                   cfg.weights.mle}) {
    if (w < 0) throw UsageError("trainer: loss weights must be nonnegative");
  }
  state_.rng_seed = cfg.seed;
  state_.loss_weights = cfg.weights;
}

namespace {

void check_finite(double v, const char* loss_name) {
  if (!std::isfinite(v)) {
    throw TrainAbort(std::string("non-finite loss: ") + loss_name);
  }
}

}  // namespace

StepRecord Trainer::train_step(const std::vector<const IndexedPair*>& batch) {
  if (batch.empty()) throw DataError("train_step: empty batch");
  const LossWeights& w = state_.loss_weights;
  const bool disc = is_disc_step(state_.step);
  const size_t n = batch.size();

  // Draw the step's noise up front so the stream advances identically on
  // generator and discriminator steps.
  std::vector<Eigen::VectorXd> noise_q(n), noise_r(n);
  for (size_t i = 0; i < n; ++i) {
    noise_q[i].resize(cfg_.z_dim);
    noise_r[i].resize(cfg_.z_dim);
    for (int j = 0; j < cfg_.z_dim; ++j) noise_q[i](j) = gauss_(rng_);
    for (int j = 0; j < cfg_.z_dim; ++j) noise_r[i](j) = gauss_(rng_);
  }

  // Greedy negative samples (token-level, no gradient path).
  std::vector<std::vector<int>> generated(n);
  for (size_t i = 0; i < n; ++i) {
    generated[i] = generator_.generate(batch[i]->query).tokens;
    if (generated[i].empty()) {
      throw TrainAbort("generator produced an empty response");
    }
  }

  ad::Tape tape;
  nn::Bound b_enc(tape, encoder_.params());
  nn::Bound b_sel(tape, selector_.params());
  nn::Bound b_gen(tape, generator_.params());
  nn::Bound b_gqd(tape, gqd_.params());
  nn::Bound b_vae_q(tape, vae_q_.params());
  nn::Bound b_vae_r(tape, vae_r_.params());
  nn::Bound b_rd_q(tape, rd_q_.params());
  nn::Bound b_rd_r(tape, rd_r_.params());

  std::vector<ad::Var> scores, m_g, m_f, p_orig_q, p_recon_q, p_orig_r, p_recon_r;
  std::vector<ad::Var> dpp_features, vae_losses_q, vae_losses_r, mle_losses;
  const double kl_coeff = kl_schedule(state_.batch_index);

  for (size_t i = 0; i < n; ++i) {
    const IndexedPair& pair = *batch[i];
    EncodedPairVars enc = encoder_.encode(tape, b_enc, pair.query, pair.response);
    ad::Var s = selector_.score(tape, b_sel, enc);
    scores.push_back(s);
    dpp_features.push_back(ad::concat_rows(enc.query_final, enc.response_final));

    WeightedFeaturesVars wf = weight_features(tape, enc, s);

    // quality branch
    m_g.push_back(gqd_.match_positive(b_gqd, wf.q_hat_final, wf.r_hat_final));
    std::vector<ad::Var> gen_states =
        encoder_.encode_sequence(tape, b_enc, generated[i]);
    m_f.push_back(
        gqd_.match_negative(b_gqd, wf.q_hat_final, gen_states.back(), s));

    // representativeness branch, query then response
    auto post_q = vae_q_.encode(tape, b_vae_q, wf.q_tilde_final, noise_q[i]);
    auto recon_q = vae_q_.decode(b_vae_q, post_q.sample);
    vae_losses_q.push_back(
        vae_loss(wf.q_tilde_final, post_q, recon_q, kl_coeff, pair.query));
    p_orig_q.push_back(rd_q_.score(b_rd_q, wf.q_tilde_final));
    p_recon_q.push_back(rd_q_.score(b_rd_q, recon_q.features));

    auto post_r = vae_r_.encode(tape, b_vae_r, wf.r_tilde_final, noise_r[i]);
    auto recon_r = vae_r_.decode(b_vae_r, post_r.sample);
    vae_losses_r.push_back(
        vae_loss(wf.r_tilde_final, post_r, recon_r, kl_coeff, pair.response));
    p_orig_r.push_back(rd_r_.score(b_rd_r, wf.r_tilde_final));
    p_recon_r.push_back(rd_r_.score(b_rd_r, recon_r.features));

    mle_losses.push_back(generator_.mle_loss(tape, b_gen, pair.query, pair.response));
  }

  StepRecord rec;
  rec.step = state_.step;
  rec.disc_step = disc;
  rec.kl_coeff = kl_coeff;

  ad::Var l_g = selector_quality_loss(m_f);
  ad::Var l_d = gqd_loss(m_g, m_f);
  ad::Var repr_sel = ad::add(selector_repr_loss(p_recon_q),
                             selector_repr_loss(p_recon_r));
  ad::Var rd_l = ad::add(rd_loss(p_orig_q, p_recon_q),
                         rd_loss(p_orig_r, p_recon_r));
  ad::Var lr_loss = length_regularizer(tape, scores, cfg_.target_fraction);
  ad::Var dpp = dpp_loss(tape, scores, dpp_features);
  ad::Var vae_q_total = ad::mean(ad::stack_cols(vae_losses_q));
  ad::Var vae_r_total = ad::mean(ad::stack_cols(vae_losses_r));
  ad::Var mle = ad::mean(ad::stack_cols(mle_losses));

  rec.l_g = l_g.scalar();
  rec.l_d = l_d.scalar();
  rec.rd_l = rd_l.scalar();
  rec.length_reg = lr_loss.scalar();
  rec.dpp = dpp.scalar();
  rec.vae_q = vae_q_total.scalar();
  rec.vae_r = vae_r_total.scalar();
  rec.mle = mle.scalar();
  check_finite(rec.l_g, "selector_quality_loss");
  check_finite(rec.l_d, "gqd_loss");
  check_finite(rec.rd_l, "rd_loss");
  check_finite(rec.length_reg, "length_regularizer");
  check_finite(rec.dpp, "dpp_loss");
  check_finite(rec.vae_q, "vae_loss_q");
  check_finite(rec.vae_r, "vae_loss_r");
  check_finite(rec.mle, "mle_loss");

  std::vector<double> mg_v, mf_v, po_v, pr_v;
  for (auto& v : m_g) mg_v.push_back(v.scalar());
  for (auto& v : m_f) mf_v.push_back(v.scalar());
  for (auto& v : p_orig_q) po_v.push_back(v.scalar());
  for (auto& v : p_orig_r) po_v.push_back(v.scalar());
  for (auto& v : p_recon_q) pr_v.push_back(v.scalar());
  for (auto& v : p_recon_r) pr_v.push_back(v.scalar());
  rec.gqd_acc = gqd_accuracy(mg_v, mf_v);
  rec.rd_acc = rd_accuracy(po_v, pr_v);

  if (disc) {
    ad::Var total = ad::add(ad::scale(l_d, w.adv_quality),
                            ad::scale(rd_l, w.adv_repr));
    tape.backward(total);
    opt_disc_.step({&b_gqd, &b_rd_q, &b_rd_r});
    state_.accuracy_window.emplace_back(rec.gqd_acc, rec.rd_acc);
    ++state_.total_evals;
    while (static_cast<int>(state_.accuracy_window.size()) > cfg_.window) {
      state_.accuracy_window.pop_front();
    }
  } else {
    // Each sub-family is driven by its own objective: selector (and the
    // shared encoder) by the composite, the generator by MLE, the VAEs by
    // their lower bound.
    ad::Var selector_total =
        ad::add(ad::add(ad::scale(l_g, w.adv_quality),
                        ad::scale(repr_sel, w.adv_repr)),
                ad::add(ad::scale(lr_loss, w.length_reg),
                        ad::scale(dpp, w.dpp)));
    tape.backward(selector_total);
    opt_selector_.step({&b_sel});
    opt_encoder_.step({&b_enc});
    tape.clear_grads();

    tape.backward(ad::scale(mle, w.mle));
    opt_generator_.step({&b_gen});
    tape.clear_grads();

    tape.backward(ad::scale(ad::add(vae_q_total, vae_r_total), w.vae));
    opt_vae_.step({&b_vae_q, &b_vae_r});
  }

  ++state_.step;
  ++state_.batch_index;
  state_.kl_coeff = kl_coeff;
  return rec;
}

ConvergenceStatus Trainer::check_convergence() const {
  ConvergenceStatus st;
  const bool window_ready =
      static_cast<int>(state_.accuracy_window.size()) >= cfg_.window &&
      state_.total_evals >= 2L * cfg_.window;
  if (window_ready) {
    double gq = 0, rd = 0;
    for (const auto& [g, r] : state_.accuracy_window) {
      gq += g;
      rd += r;
    }
    gq /= static_cast<double>(state_.accuracy_window.size());
    rd /= static_cast<double>(state_.accuracy_window.size());
    st.gqd_mean = gq;
    st.rd_mean = rd;
    if (gq >= 0.45 && gq <= 0.55 && rd >= 0.45 && rd <= 0.55) {
      st.converged = true;
      st.reason = "converged";
      return st;
    }
  }
  if (state_.step >= cfg_.max_steps) {
    st.converged = true;
    st.reason = "budget";
  }
  return st;
}

void Trainer::write_quality_header(std::ostream& out) {
  out << "step,l_d,l_g,gqd_accuracy\n";
}

void Trainer::write_repr_header(std::ostream& out) {
  out << "step,vae_loss_q,vae_loss_r,kl_coeff,rd_loss,rd_accuracy\n";
}

ConvergenceStatus Trainer::run(
    const std::vector<IndexedPair>& pairs, std::ostream* quality_csv,
    std::ostream* repr_csv,
    const std::function<void(const StepRecord&)>& on_step) {
  if (pairs.empty()) throw DataError("trainer: empty corpus");
  if (quality_csv) write_quality_header(*quality_csv);
  if (repr_csv) write_repr_header(*repr_csv);

  std::vector<size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  size_t pos = order.size();  // force an initial shuffle

  ConvergenceStatus status;
  while (true) {
    status = check_convergence();
    if (status.converged) break;
    std::vector<const IndexedPair*> batch;
    batch.reserve(static_cast<size_t>(cfg_.batch_size));
    while (batch.size() < static_cast<size_t>(cfg_.batch_size)) {
      if (pos >= order.size()) {
        std::shuffle(order.begin(), order.end(), rng_);
        pos = 0;
      }
      batch.push_back(&pairs[order[pos++]]);
    }
    StepRecord rec = train_step(batch);
    if (quality_csv) {
      *quality_csv << rec.step << ',' << rec.l_d << ',' << rec.l_g << ','
                   << rec.gqd_acc << '\n';
    }
    if (repr_csv) {
      *repr_csv << rec.step << ',' << rec.vae_q << ',' << rec.vae_r << ','
                << rec.kl_coeff << ',' << rec.rd_l << ',' << rec.rd_acc << '\n';
    }
    if (on_step) on_step(rec);
  }
  return status;
}

double Trainer::score_pair(const IndexedPair& pair) const {
  EncodedPair enc = encoder_.encode_pair(pair.query, pair.response);
  return selector_.score_value(enc);
}

std::pair<double, double> Trainer::match_scores(const IndexedPair& pair) const {
  std::vector<int> generated = generator_.generate(pair.query).tokens;
  ad::Tape tape;
  nn::Bound b_enc(tape, const_cast<nn::ParamStore&>(encoder_.params()));
  nn::Bound b_sel(tape, const_cast<nn::ParamStore&>(selector_.params()));
  nn::Bound b_gqd(tape, const_cast<nn::ParamStore&>(gqd_.params()));
  EncodedPairVars enc = encoder_.encode(tape, b_enc, pair.query, pair.response);
  ad::Var s = selector_.score(tape, b_sel, enc);
  WeightedFeaturesVars wf = weight_features(tape, enc, s);
  double m_g = gqd_.match_positive(b_gqd, wf.q_hat_final, wf.r_hat_final).scalar();
  std::vector<ad::Var> gen_states =
      encoder_.encode_sequence(tape, b_enc, generated);
  double m_f =
      gqd_.match_negative(b_gqd, wf.q_hat_final, gen_states.back(), s).scalar();
  return {m_g, m_f};
}

void Trainer::export_scores(const std::vector<IndexedPair>& pairs,
                            std::ostream& out) const {
  for (const auto& pair : pairs) {
    if (pair.id.empty()) throw DataError("export_scores: pair without id");
    double s = score_pair(pair);
    nlohmann::json obj;
    obj["id"] = pair.id;
    obj["score"] = s;
    out << obj.dump() << "\n";
  }
}

std::vector<int> Trainer::reconstruct_response_tokens(
    const IndexedPair& pair) const {
  EncodedPair enc = encoder_.encode_pair(pair.query, pair.response);
  double s = selector_.score_value(enc);
  Eigen::VectorXd weighted = s * enc.response_final;
  // Evaluation mode: the latent is the posterior mean (zero noise).
  LatentPosterior post =
      vae_r_.vae_encode(weighted, Eigen::VectorXd::Zero(cfg_.z_dim));
  Reconstruction recon = vae_r_.reconstruct(post.mean);
  const size_t m = pair.response.size();
  std::vector<int> ids(static_cast<size_t>(recon.bow_logits.size()));
  std::iota(ids.begin(), ids.end(), 0);
  std::partial_sort(ids.begin(), ids.begin() + static_cast<long>(m), ids.end(),
                    [&](int a, int b) {
                      if (recon.bow_logits(a) != recon.bow_logits(b)) {
                        return recon.bow_logits(a) > recon.bow_logits(b);
                      }
                      return a < b;
                    });
  ids.resize(m);
  return ids;
}

void Trainer::save_checkpoint(const std::filesystem::path& dir,
                              const std::string& config_hash) const {
  std::filesystem::create_directories(dir);
  encoder_.params().save(dir / "encoder.bin");
  selector_.params().save(dir / "selector.bin");
  generator_.params().save(dir / "generator.bin");
  gqd_.params().save(dir / "gqd.bin");
  vae_q_.params().save(dir / "vae_q.bin");
  vae_r_.params().save(dir / "vae_r.bin");
  rd_q_.params().save(dir / "rd_q.bin");
  rd_r_.params().save(dir / "rd_r.bin");
  nlohmann::json manifest;
  manifest["config_hash"] = config_hash;
  manifest["step"] = state_.step;
  manifest["seed"] = state_.rng_seed;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

void Trainer::load_checkpoint(const std::filesystem::path& dir) {
  encoder_.params().load(dir / "encoder.bin");
  selector_.params().load(dir / "selector.bin");
  generator_.params().load(dir / "generator.bin");
  gqd_.params().load(dir / "gqd.bin");
  vae_q_.params().load(dir / "vae_q.bin");
  vae_r_.params().load(dir / "vae_r.bin");
  rd_q_.params().load(dir / "rd_q.bin");
  rd_r_.params().load(dir / "rd_r.bin");
  nlohmann::json manifest =
      nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  state_.step = manifest["step"].get<long>();
  state_.batch_index = state_.step;
}

}  // namespace sda
