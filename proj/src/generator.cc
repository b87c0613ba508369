#include "sda/generator.hpp"

#include <cmath>
#include <limits>

#include "sda/corpus.hpp"
#include "sda/util.hpp"

namespace sda {

namespace {

Eigen::VectorXd sigmoid_v(const Eigen::VectorXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

// Plain-math GRU step mirroring ad::gru_cell.
Eigen::VectorXd gru_step(const nn::ParamStore& p, const std::string& prefix,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
  const auto& wz = p.at(prefix + ".wz").value;
  const auto& uz = p.at(prefix + ".uz").value;
  const auto& bz = p.at(prefix + ".bz").value;
  const auto& wr = p.at(prefix + ".wr").value;
  const auto& ur = p.at(prefix + ".ur").value;
  const auto& br = p.at(prefix + ".br").value;
  const auto& wn = p.at(prefix + ".wn").value;
  const auto& un = p.at(prefix + ".un").value;
  const auto& bn = p.at(prefix + ".bn").value;
  Eigen::VectorXd z = sigmoid_v(wz * x + uz * h + bz);
  Eigen::VectorXd r = sigmoid_v(wr * x + ur * h + br);
  Eigen::VectorXd n =
      (wn * x + r.cwiseProduct((un * h).eval()) + bn).array().tanh().matrix();
  return (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(h);
}

}  // namespace

Seq2SeqGenerator::Seq2SeqGenerator(const GeneratorConfig& cfg, uint64_t seed)
    : cfg_(cfg) {
  if (cfg.vocab_size <= 0) throw UsageError("generator: vocab_size must be set");
  if (cfg.min_steps < 1 || cfg.max_steps < cfg.min_steps) {
    throw UsageError("generator: need 1 <= min_steps <= max_steps");
  }
  const long h = cfg.hidden;
  const long e = cfg.embedding_dim;
  params_.add("gen.embedding", e, cfg.vocab_size);
  enc_fwd_.init(params_, h, e);
  enc_bwd_.init(params_, h, e);
  params_.add("gen.bridge.w", h, 2 * h);
  params_.add("gen.bridge.b", h, 1);
  dec_.init(params_, h, e + 2 * h);
  params_.add("gen.attn.w", h, 2 * h);
  params_.add("gen.out.w", cfg.vocab_size, h + 2 * h);
  params_.add("gen.out.b", cfg.vocab_size, 1);
  std::mt19937_64 rng(substream_seed(seed, "generator"));
  nn::xavier_init(params_, rng);
}

Seq2SeqGenerator::EncodedQuery Seq2SeqGenerator::run_encoder(
    const std::vector<int>& query) const {
  if (query.empty()) throw DataError("generator: empty query");
  const long h = cfg_.hidden;
  const auto& emb = params_.at("gen.embedding").value;
  for (int id : query) {
    if (id < 0 || id >= cfg_.vocab_size) {
      throw DataError("generator: token index out of vocabulary range");
    }
  }
  const long m = static_cast<long>(query.size());
  Eigen::MatrixXd states(2 * h, m);
  Eigen::VectorXd hf = Eigen::VectorXd::Zero(h);
  for (long t = 0; t < m; ++t) {
    hf = gru_step(params_, "gen.enc.fwd", emb.col(query[static_cast<size_t>(t)]), hf);
    states.col(t).head(h) = hf;
  }
  Eigen::VectorXd hb = Eigen::VectorXd::Zero(h);
  for (long t = m - 1; t >= 0; --t) {
    hb = gru_step(params_, "gen.enc.bwd", emb.col(query[static_cast<size_t>(t)]), hb);
    states.col(t).tail(h) = hb;
  }
  return {states, states.col(m - 1)};
}

GeneratedResponse Seq2SeqGenerator::generate(const std::vector<int>& query) const {
  EncodedQuery enc = run_encoder(query);
  const long h = cfg_.hidden;
  const auto& emb = params_.at("gen.embedding").value;
  const auto& attn_w = params_.at("gen.attn.w").value;
  const auto& out_w = params_.at("gen.out.w").value;
  const auto& out_b = params_.at("gen.out.b").value;

  // Project encoder states once: score_j = h_dec . (Wa e_j).
  Eigen::MatrixXd proj = attn_w * enc.states;  // h x m

  Eigen::VectorXd hd =
      (params_.at("gen.bridge.w").value * enc.final_state +
       params_.at("gen.bridge.b").value)
          .array()
          .tanh()
          .matrix();
  Eigen::VectorXd ctx = Eigen::VectorXd::Zero(2 * h);

  GeneratedResponse out;
  std::vector<Eigen::VectorXd> dists;
  int prev = Vocabulary::kBos;
  for (int step = 0; step < cfg_.max_steps; ++step) {
    Eigen::VectorXd x(emb.rows() + 2 * h);
    x << emb.col(prev), ctx;
    hd = gru_step(params_, "gen.dec", x, hd);
    Eigen::VectorXd scores = proj.transpose() * hd;
    Eigen::ArrayXd a = scores.array();
    a -= a.maxCoeff();
    Eigen::ArrayXd ea = a.exp();
    Eigen::VectorXd alpha = (ea / ea.sum()).matrix();
    ctx = enc.states * alpha;
    Eigen::VectorXd cat(h + 2 * h);
    cat << hd, ctx;
    Eigen::VectorXd logits = out_w * cat + out_b;

    logits(Vocabulary::kPad) = -std::numeric_limits<double>::infinity();
    logits(Vocabulary::kBos) = -std::numeric_limits<double>::infinity();
    if (static_cast<int>(out.tokens.size()) < cfg_.min_steps) {
      logits(Vocabulary::kEos) = -std::numeric_limits<double>::infinity();
    }
    Eigen::ArrayXd la = logits.array();
    double mx = la.maxCoeff();
    Eigen::ArrayXd pe = (la - mx).exp();
    pe = pe.isFinite().select(pe, 0.0);
    dists.push_back((pe / pe.sum()).matrix());

    long best;
    logits.maxCoeff(&best);
    if (best == Vocabulary::kEos) break;
    out.tokens.push_back(static_cast<int>(best));
    prev = static_cast<int>(best);
  }
  out.distributions.resize(static_cast<long>(dists.size()), cfg_.vocab_size);
  for (size_t i = 0; i < dists.size(); ++i) {
    out.distributions.row(static_cast<long>(i)) = dists[i].transpose();
  }
  return out;
}

ad::Var Seq2SeqGenerator::mle_loss(ad::Tape& tape, const nn::Bound& b,
                                   const std::vector<int>& query,
                                   const std::vector<int>& response) const {
  if (query.empty()) throw DataError("generator: empty query");
  if (response.empty()) throw DataError("generator: empty response");
  const long h = cfg_.hidden;
  ad::Var emb = b["gen.embedding"];
  ad::GruParams pf = enc_fwd_.bind(b);
  ad::GruParams pb = enc_bwd_.bind(b);

  const size_t m = query.size();
  std::vector<ad::Var> xs(m);
  for (size_t t = 0; t < m; ++t) xs[t] = ad::embed(emb, query[t]);
  ad::Var h0 = tape.constant(ad::Mat::Zero(h, 1));
  std::vector<ad::Var> fwd(m), bwd(m);
  ad::Var hv = h0;
  for (size_t t = 0; t < m; ++t) {
    hv = ad::gru_cell(pf, xs[t], hv);
    fwd[t] = hv;
  }
  hv = h0;
  for (size_t t = m; t-- > 0;) {
    hv = ad::gru_cell(pb, xs[t], hv);
    bwd[t] = hv;
  }
  std::vector<ad::Var> states(m);
  for (size_t t = 0; t < m; ++t) states[t] = ad::concat_rows(fwd[t], bwd[t]);
  ad::Var enc_states = ad::stack_cols(states);  // 2h x m
  ad::Var proj = ad::matmul(b["gen.attn.w"], enc_states);

  ad::Var hd = ad::tanh_(
      ad::affine(b["gen.bridge.w"], states.back(), b["gen.bridge.b"]));
  ad::Var ctx = tape.constant(ad::Mat::Zero(2 * h, 1));
  ad::GruParams pd = dec_.bind(b);

  // inputs: BOS r_1 .. r_m ; targets: r_1 .. r_m EOS
  std::vector<int> inputs;
  inputs.push_back(Vocabulary::kBos);
  inputs.insert(inputs.end(), response.begin(), response.end());
  std::vector<int> targets = response;
  targets.push_back(Vocabulary::kEos);

  std::vector<ad::Var> step_losses;
  for (size_t t = 0; t < inputs.size(); ++t) {
    ad::Var x = ad::concat_rows(ad::embed(emb, inputs[t]), ctx);
    hd = ad::gru_cell(pd, x, hd);
    ad::Var scores = ad::matmul(ad::transpose(proj), hd);
    ad::Var alpha = ad::softmax(scores);
    ctx = ad::matmul(enc_states, alpha);
    ad::Var logits =
        ad::affine(b["gen.out.w"], ad::concat_rows(hd, ctx), b["gen.out.b"]);
    step_losses.push_back(ad::softmax_xent(logits, targets[t]));
  }
  return ad::mean(ad::stack_cols(step_losses));
}

double Seq2SeqGenerator::mle_loss(const std::vector<int>& query,
                                  const std::vector<int>& response) const {
  ad::Tape tape;
  nn::Bound b(tape, const_cast<nn::ParamStore&>(params_));
  return mle_loss(tape, b, query, response).scalar();
}

}  // namespace sda
