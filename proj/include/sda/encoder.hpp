#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sda/autodiff.hpp"
#include "sda/nn.hpp"

namespace sda {

struct EncoderConfig {
  int vocab_size = 0;
  int embedding_dim = 64;
  int hidden = 64;  // per direction
};

// Value-level encoding of one pair: rows are per-token bidirectional states.
struct EncodedPair {
  Eigen::MatrixXd query_states;     // m' x 2d
  Eigen::MatrixXd response_states;  // m x 2d
  Eigen::VectorXd query_final;      // 2d
  Eigen::VectorXd response_final;   // 2d
};

// Tape-level encoding; states are 2d x 1 column vectors per token.
struct EncodedPairVars {
  std::vector<ad::Var> query_states;
  std::vector<ad::Var> response_states;
  ad::Var query_final;
  ad::Var response_final;
};

// Bidirectional gated recurrent encoder shared by the selector, the quality
// discriminator, and the reconstructor. Query and response pass through the
// same parameters.
class Encoder {
 public:
  Encoder(const EncoderConfig& cfg, uint64_t seed);

  const EncoderConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Encode an already index-mapped token sequence.
  std::vector<ad::Var> encode_sequence(ad::Tape& tape, const nn::Bound& b,
                                       const std::vector<int>& tokens) const;

  EncodedPairVars encode(ad::Tape& tape, const nn::Bound& b,
                         const std::vector<int>& query,
                         const std::vector<int>& response) const;

  // Inference-mode convenience: runs on a private tape and extracts values.
  EncodedPair encode_pair(const std::vector<int>& query,
                          const std::vector<int>& response) const;

 private:
  EncoderConfig cfg_;
  nn::ParamStore params_;
  nn::GruCell fwd_{"enc.fwd"};
  nn::GruCell bwd_{"enc.bwd"};
};

}  // namespace sda
