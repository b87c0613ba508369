#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sda/autodiff.hpp"
#include "sda/nn.hpp"

namespace sda {

struct GeneratorConfig {
  int vocab_size = 0;
  int embedding_dim = 64;
  int hidden = 64;
  int min_steps = 10;
  int max_steps = 30;
};

struct GeneratedResponse {
  std::vector<int> tokens;           // content tokens, EOS excluded
  Eigen::MatrixXd distributions;     // steps x V, softmax per decoded step
};

// Response generators are pluggable: anything exposing generate() and
// mle_loss() can stand in. The shipped backbone is a recurrent
// encoder-decoder with dot-product attention, trained by teacher forcing.
class ResponseGenerator {
 public:
  virtual ~ResponseGenerator() = default;
  virtual GeneratedResponse generate(const std::vector<int>& query) const = 0;
  virtual double mle_loss(const std::vector<int>& query,
                          const std::vector<int>& response) const = 0;
};

class Seq2SeqGenerator : public ResponseGenerator {
 public:
  Seq2SeqGenerator(const GeneratorConfig& cfg, uint64_t seed);

  const GeneratorConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Greedy decoding; EOS is suppressed before min_steps and decoding stops
  // at EOS or max_steps. PAD/BOS are never emitted.
  GeneratedResponse generate(const std::vector<int>& query) const override;

  // Mean per-token negative log-likelihood under teacher forcing.
  double mle_loss(const std::vector<int>& query,
                  const std::vector<int>& response) const override;
  ad::Var mle_loss(ad::Tape& tape, const nn::Bound& b,
                   const std::vector<int>& query,
                   const std::vector<int>& response) const;

 private:
  struct EncodedQuery {            // value-level encoder pass
    Eigen::MatrixXd states;        // 2h x m
    Eigen::VectorXd final_state;   // 2h
  };
  EncodedQuery run_encoder(const std::vector<int>& query) const;

  GeneratorConfig cfg_;
  nn::ParamStore params_;
  nn::GruCell enc_fwd_{"gen.enc.fwd"};
  nn::GruCell enc_bwd_{"gen.enc.bwd"};
  nn::GruCell dec_{"gen.dec"};
};

}  // namespace sda
