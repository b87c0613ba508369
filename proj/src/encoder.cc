#include "sda/encoder.hpp"

#include "sda/util.hpp"

namespace sda {

Encoder::Encoder(const EncoderConfig& cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg.vocab_size <= 0) throw UsageError("encoder: vocab_size must be set");
  params_.add("enc.embedding", cfg.embedding_dim, cfg.vocab_size);
  fwd_.init(params_, cfg.hidden, cfg.embedding_dim);
  bwd_.init(params_, cfg.hidden, cfg.embedding_dim);
  std::mt19937_64 rng(substream_seed(seed, "encoder"));
  nn::xavier_init(params_, rng);
}

std::vector<ad::Var> Encoder::encode_sequence(ad::Tape& tape, const nn::Bound& b,
                                              const std::vector<int>& tokens) const {
  if (tokens.empty()) throw DataError("encoder: empty token sequence");
  for (int id : tokens) {
    if (id < 0 || id >= cfg_.vocab_size) {
      throw DataError("encoder: token index out of vocabulary range: " +
                      std::to_string(id));
    }
  }
  const size_t m = tokens.size();
  ad::Var table = b["enc.embedding"];
  std::vector<ad::Var> xs(m);
  for (size_t t = 0; t < m; ++t) xs[t] = ad::embed(table, tokens[t]);

  ad::GruParams pf = fwd_.bind(b);
  ad::GruParams pb = bwd_.bind(b);
  ad::Var h0 = tape.constant(ad::Mat::Zero(cfg_.hidden, 1));

  std::vector<ad::Var> fwd_states(m), bwd_states(m);
  ad::Var h = h0;
  for (size_t t = 0; t < m; ++t) {
    h = ad::gru_cell(pf, xs[t], h);
    fwd_states[t] = h;
  }
  h = h0;
  for (size_t t = m; t-- > 0;) {
    h = ad::gru_cell(pb, xs[t], h);
    bwd_states[t] = h;
  }
  std::vector<ad::Var> states(m);
  for (size_t t = 0; t < m; ++t) {
    states[t] = ad::concat_rows(fwd_states[t], bwd_states[t]);
  }
  return states;
}

EncodedPairVars Encoder::encode(ad::Tape& tape, const nn::Bound& b,
                                const std::vector<int>& query,
                                const std::vector<int>& response) const {
  EncodedPairVars out;
  out.query_states = encode_sequence(tape, b, query);
  out.response_states = encode_sequence(tape, b, response);
  out.query_final = out.query_states.back();
  out.response_final = out.response_states.back();
  return out;
}

EncodedPair Encoder::encode_pair(const std::vector<int>& query,
                                 const std::vector<int>& response) const {
  ad::Tape tape;
  nn::Bound b(tape, const_cast<nn::ParamStore&>(params_));
  EncodedPairVars vars = encode(tape, b, query, response);
  EncodedPair out;
  const long two_d = 2 * cfg_.hidden;
  out.query_states.resize(static_cast<long>(query.size()), two_d);
  for (size_t t = 0; t < query.size(); ++t) {
    out.query_states.row(static_cast<long>(t)) =
        vars.query_states[t].val().col(0).transpose();
  }
  out.response_states.resize(static_cast<long>(response.size()), two_d);
  for (size_t t = 0; t < response.size(); ++t) {
    out.response_states.row(static_cast<long>(t)) =
        vars.response_states[t].val().col(0).transpose();
  }
  out.query_final = vars.query_final.val().col(0);
  out.response_final = vars.response_final.val().col(0);
  return out;
}

}  // namespace sda
