#include "sda/trainer.hpp"

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sda/util.hpp"
#include "support.hpp"

using namespace sda;

namespace {

TrainerConfig micro_config() {
  TrainerConfig cfg;
  cfg.seed = 9;
  cfg.batch_size = 2;
  cfg.encoder_hidden = 4;
  cfg.embedding_dim = 4;
  cfg.generator_hidden = 4;
  cfg.vae_hidden = 4;
  cfg.z_dim = 2;
  cfg.min_decode = 2;
  cfg.max_decode = 6;
  cfg.max_steps = 100;
  return cfg;
}

std::vector<IndexedPair> micro_pairs(int n, int vocab) {
  std::vector<IndexedPair> out;
  std::mt19937_64 rng(4);
  for (int i = 0; i < n; ++i) {
    IndexedPair p;
    p.id = "p" + std::to_string(i);
    for (int t = 0; t < 4; ++t) p.query.push_back(4 + static_cast<int>(rng() % (vocab - 4)));
    for (int t = 0; t < 3; ++t) p.response.push_back(4 + static_cast<int>(rng() % (vocab - 4)));
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST_CASE("60 steps contain exactly 10 discriminator updates") {
  const int vocab = 20;
  Trainer trainer(vocab, micro_config());
  auto pairs = micro_pairs(6, vocab);
  std::vector<const IndexedPair*> batch{&pairs[0], &pairs[1]};

  int disc_steps = 0, model_steps = 0;
  for (int i = 0; i < 60; ++i) {
    StepRecord rec = trainer.train_step(batch);
    (rec.disc_step ? disc_steps : model_steps)++;
  }
  CHECK(disc_steps == 10);
  CHECK(model_steps == 50);
  CHECK(trainer.state().step == 60);
}

TEST_CASE("identical seeds give bitwise-identical checkpoints") {
  const int vocab = 20;
  auto pairs = micro_pairs(8, vocab);
  test::TempDir dir;

  auto run_once = [&](const std::filesystem::path& out) {
    Trainer trainer(vocab, micro_config());
    std::vector<const IndexedPair*> batch;
    for (int i = 0; i < 20; ++i) {
      batch.clear();
      batch.push_back(&pairs[static_cast<size_t>(i) % pairs.size()]);
      batch.push_back(&pairs[static_cast<size_t>(i + 3) % pairs.size()]);
      trainer.train_step(batch);
    }
    trainer.save_checkpoint(out, "test");
  };
  run_once(dir.path / "a");
  run_once(dir.path / "b");

  for (const char* name : {"encoder.bin", "selector.bin", "generator.bin",
                           "gqd.bin", "vae_q.bin", "vae_r.bin", "rd_q.bin",
                           "rd_r.bin"}) {
    CHECK(read_text_file(dir.path / "a" / name) ==
          read_text_file(dir.path / "b" / name));
  }
}

TEST_CASE("zeroed loss weights leave selector and discriminators untouched") {
  const int vocab = 20;
  TrainerConfig cfg = micro_config();
  cfg.weights = LossWeights{0, 0, 0, 0, 0, 1.0};  // mle only
  Trainer trainer(vocab, cfg);
  auto pairs = micro_pairs(4, vocab);
  std::vector<const IndexedPair*> batch{&pairs[0], &pairs[1]};

  Eigen::MatrixXd sel_before = trainer.selector().params().tensors()[0].value;
  Eigen::MatrixXd enc_before = trainer.encoder().params().at("enc.fwd.wz").value;
  for (int i = 0; i < 12; ++i) trainer.train_step(batch);
  CHECK((trainer.selector().params().tensors()[0].value - sel_before)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((trainer.encoder().params().at("enc.fwd.wz").value - enc_before)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("convergence check") {
  const int vocab = 20;
  TrainerConfig cfg = micro_config();
  cfg.window = 3;
  cfg.max_steps = 1000;
  Trainer trainer(vocab, cfg);

  SUBCASE("empty window means not converged") {
    CHECK_FALSE(trainer.check_convergence().converged);
  }
  // The window is private state; drive it through real steps and then
  // inspect means via the status.
  auto pairs = micro_pairs(4, vocab);
  std::vector<const IndexedPair*> batch{&pairs[0], &pairs[1]};
  for (int i = 0; i < 6 * 4; ++i) trainer.train_step(batch);
  ConvergenceStatus st = trainer.check_convergence();
  CHECK(trainer.state().accuracy_window.size() == 3);
  if (st.converged) {
    CHECK(st.gqd_mean >= 0.45);
    CHECK(st.gqd_mean <= 0.55);
  }
}

TEST_CASE("budget stop reports its reason") {
  const int vocab = 20;
  TrainerConfig cfg = micro_config();
  cfg.max_steps = 6;
  cfg.window = 100;  // cannot fill
  Trainer trainer(vocab, cfg);
  auto pairs = micro_pairs(4, vocab);
  ConvergenceStatus st = trainer.run(pairs, nullptr, nullptr);
  CHECK(st.converged);
  CHECK(st.reason == "budget");
  CHECK(trainer.state().step == 6);
}

TEST_CASE("score export writes one line per pair, all in (0,1)") {
  const int vocab = 20;
  Trainer trainer(vocab, micro_config());
  auto pairs = micro_pairs(7, vocab);
  std::ostringstream out;
  trainer.export_scores(pairs, out);

  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(line.find("\"id\"") != std::string::npos);
    auto pos = line.find("\"score\":");
    REQUIRE(pos != std::string::npos);
    double v = std::stod(line.substr(pos + 8));
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(lines == 7);

  SUBCASE("two exports from the same state are identical") {
    std::ostringstream again;
    trainer.export_scores(pairs, again);
    CHECK(again.str() == out.str());
  }
}

TEST_CASE("telemetry rows follow the declared schemas") {
  const int vocab = 20;
  TrainerConfig cfg = micro_config();
  cfg.max_steps = 7;
  cfg.window = 100;
  Trainer trainer(vocab, cfg);
  auto pairs = micro_pairs(4, vocab);
  std::ostringstream quality, repr;
  trainer.run(pairs, &quality, &repr);

  std::istringstream q(quality.str());
  std::string header;
  std::getline(q, header);
  CHECK(header == "step,l_d,l_g,gqd_accuracy");
  std::istringstream r(repr.str());
  std::getline(r, header);
  CHECK(header == "step,vae_loss_q,vae_loss_r,kl_coeff,rd_loss,rd_accuracy");
  int rows = 0;
  std::string line;
  while (std::getline(q, line)) ++rows;
  CHECK(rows == 7);
}

TEST_CASE("checkpoint round trip restores scores") {
  const int vocab = 20;
  Trainer trainer(vocab, micro_config());
  auto pairs = micro_pairs(4, vocab);
  std::vector<const IndexedPair*> batch{&pairs[0], &pairs[1]};
  for (int i = 0; i < 8; ++i) trainer.train_step(batch);

  test::TempDir dir;
  trainer.save_checkpoint(dir.path / "ckpt", "hash123");

  Trainer other(vocab, micro_config());
  other.load_checkpoint(dir.path / "ckpt");
  CHECK(other.state().step == trainer.state().step);
  for (const auto& p : pairs) {
    CHECK(other.score_pair(p) == trainer.score_pair(p));
  }
}
