#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "sda/corpus.hpp"
#include "sda/encoder.hpp"
#include "sda/generator.hpp"
#include "sda/quality_gan.hpp"
#include "sda/representativeness.hpp"
#include "sda/selector.hpp"

namespace sda {

// Defaults calibrated on the synthetic corpus: the length regularizer needs
// roughly batch_size-scale weight to anchor the mean score against the
// adversarial and DPP pressure, and the raw DPP log-determinant runs hot at
// bidirectional-feature magnitudes.
struct LossWeights {
  double adv_quality = 1.0;
  double adv_repr = 1.0;
  double length_reg = 64.0;
  double dpp = 0.2;
  double vae = 1.0;
  double mle = 1.0;
};

struct TrainerConfig {
  uint64_t seed = 42;
  int batch_size = 16;
  long max_steps = 30000;
  // Discriminators update when step % disc_cycle == disc_cycle - 1; the
  // default 6 gives one discriminator step per five generator steps.
  int disc_cycle = 6;
  double lr = 1e-3;
  // The selector family (selector MLP + shared encoder) trains slower than
  // the rest; it chases two discriminators at once and oscillates at the
  // shared rate.
  double selector_lr = 1e-4;
  double disc_lr = 1e-3;
  // Decoupled weight decay on the selector family; keeps score logits off
  // the sigmoid rails, where every selector gradient vanishes.
  double selector_weight_decay = 0.1;
  int window = 50;
  double target_fraction = 0.6;
  LossWeights weights;
  bool lg_updates_generator = false;

  int encoder_hidden = 64;
  int embedding_dim = 64;
  int generator_hidden = 64;
  int vae_hidden = 64;
  int z_dim = 32;
  int min_decode = 10;
  int max_decode = 30;
};

struct IndexedPair {
  std::string id;
  std::vector<int> query;
  std::vector<int> response;
};

std::vector<IndexedPair> index_corpus(const Corpus& corpus,
                                      const Vocabulary& vocab);

struct StepRecord {
  long step = 0;
  bool disc_step = false;
  double l_d = 0, l_g = 0, gqd_acc = 0;
  double vae_q = 0, vae_r = 0, kl_coeff = 0;
  double rd_l = 0, rd_acc = 0;
  double mle = 0, length_reg = 0, dpp = 0;
};

struct TrainState {
  long step = 0;
  long batch_index = 0;
  double kl_coeff = 0;
  LossWeights loss_weights;
  uint64_t rng_seed = 0;
  std::deque<std::pair<double, double>> accuracy_window;  // (gqd_acc, rd_acc)
  long total_evals = 0;  // discriminator evaluations recorded so far
};

struct ConvergenceStatus {
  bool converged = false;
  std::string reason;  // "converged" or "budget"
  double gqd_mean = 0, rd_mean = 0;
};

// Joint adversarial training of selector, shared encoder, generator, GQD,
// the two VAE branches and the two RD branches. Single-writer over all
// parameters; one parameter family is updated per step.
class Trainer {
 public:
  Trainer(int vocab_size, const TrainerConfig& cfg);

  StepRecord train_step(const std::vector<const IndexedPair*>& batch);

  // True when the accuracy window is full and both means sit in
  // [0.45, 0.55], or when the step budget is exhausted. The first window
  // of evaluations is warm-up: an untrained discriminator scores near
  // chance before it has learned anything, which would otherwise declare
  // convergence during the initial accuracy ascent.
  ConvergenceStatus check_convergence() const;

  // Full loop with deterministic batch order; stops at convergence.
  // Telemetry streams may be null.
  ConvergenceStatus run(const std::vector<IndexedPair>& pairs,
                        std::ostream* quality_csv, std::ostream* repr_csv,
                        const std::function<void(const StepRecord&)>& on_step = {});

  // Evaluation-mode selector score for one pair.
  double score_pair(const IndexedPair& pair) const;

  // Evaluation-mode matching scores (m_g, m_f) for one pair under the
  // current parameters; used by diagnostics.
  std::pair<double, double> match_scores(const IndexedPair& pair) const;

  // One score line per pair: {"id":..., "score":...}.
  void export_scores(const std::vector<IndexedPair>& pairs,
                     std::ostream& out) const;

  // Response-branch diagnostic reconstruction: BOW logits decoded to the
  // top-|response| tokens, ordered by descending logit.
  std::vector<int> reconstruct_response_tokens(const IndexedPair& pair) const;

  void save_checkpoint(const std::filesystem::path& dir,
                       const std::string& config_hash) const;
  void load_checkpoint(const std::filesystem::path& dir);

  const TrainState& state() const { return state_; }
  const TrainerConfig& config() const { return cfg_; }
  Seq2SeqGenerator& generator() { return generator_; }
  const Seq2SeqGenerator& generator() const { return generator_; }
  Encoder& encoder() { return encoder_; }
  Selector& selector() { return selector_; }

  static void write_quality_header(std::ostream& out);
  static void write_repr_header(std::ostream& out);

 private:
  bool is_disc_step(long step) const {
    return step % cfg_.disc_cycle == cfg_.disc_cycle - 1;
  }

  TrainerConfig cfg_;
  TrainState state_;
  Encoder encoder_;
  Selector selector_;
  Seq2SeqGenerator generator_;
  QualityDiscriminator gqd_;
  FeatureVae vae_q_, vae_r_;
  ReprDiscriminator rd_q_, rd_r_;
  nn::Adam opt_selector_;  // selector MLP (with weight decay)
  nn::Adam opt_encoder_;   // shared encoder
  nn::Adam opt_generator_;
  nn::Adam opt_vae_;
  nn::Adam opt_disc_;  // GQD + RDs
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

}  // namespace sda
