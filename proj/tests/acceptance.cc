// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Run via `ctest -R acceptance` or directly.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "sda/augmenter.hpp"
#include "sda/config.hpp"
#include "sda/corpus.hpp"
#include "sda/metrics.hpp"
#include "sda/pipeline.hpp"
#include "sda/quality_gan.hpp"
#include "sda/representativeness.hpp"
#include "sda/selector.hpp"
#include "sda/trainer.hpp"
#include "sda/util.hpp"

#define DOCTEST_CONFIG_DISABLE
#include "support.hpp"

namespace {

using namespace sda;
using Clock = std::chrono::steady_clock;

struct Harness {
  int failures = 0;
  void run(const std::string& name, const std::function<bool(std::string&)>& fn) {
    auto start = Clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(Clock::now() - start).count();
    std::printf("[%s] %-24s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
                secs, detail.empty() ? "" : " ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

// ---- criterion 1: DPP normalization ----
bool dpp_normalization(std::string& detail) {
  auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + static_cast<int>(rng() % 4);
    std::vector<Eigen::VectorXd> feats;
    std::vector<double> scores;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd f(n + 2);
      for (int j = 0; j < n + 2; ++j) f(j) = g(rng);
      feats.push_back(f);
      scores.push_back(u(rng));
    }
    DppKernel kernel = dpp_kernel(scores, feats);
    double subset_sum = 0;
    for (int mask = 0; mask < (1 << n); ++mask) {
      std::vector<int> idx;
      for (int i = 0; i < n; ++i)
        if (mask & (1 << i)) idx.push_back(i);
      subset_sum += test::laplace_det(test::submatrix_of(kernel.matrix, idx));
    }
    double direct = test::laplace_det(kernel.matrix +
                                      Eigen::MatrixXd::Identity(n, n));
    if (rel_err(subset_sum, direct) > 1e-8) {
      detail = "trial " + std::to_string(trial) + ": rel err " +
               std::to_string(rel_err(subset_sum, direct));
      return false;
    }
  }
  double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (secs >= 10.0) {
    detail = "runtime " + std::to_string(secs) + "s exceeds 10s";
    return false;
  }
  return true;
}

// ---- criterion 2: DPP loss vs brute-force subset probability ----
bool dpp_loss_oracle(std::string& detail) {
  auto start = Clock::now();
  std::mt19937_64 rng(202);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 2 + static_cast<int>(rng() % 4);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    // eigenvalue floor keeps the epsilon jitter inside the 1e-5 budget
    Eigen::MatrixXd L = a * a.transpose() + 1.5 * Eigen::MatrixXd::Identity(n, n);
    std::vector<double> scores(static_cast<size_t>(n));
    bool any = false;
    for (double& s : scores) {
      s = u(rng);
      any = any || s > 0.5;
    }
    if (!any) scores[0] = 0.8;
    std::vector<int> sel = dpp_selected(scores);
    double p = test::laplace_det(test::submatrix_of(L, sel)) /
               test::laplace_det(L + Eigen::MatrixXd::Identity(n, n));
    double got = dpp_loss(DppKernel{L, n}, scores);
    if (std::abs(got - (-std::log(p))) > 1e-5) {
      detail = "trial " + std::to_string(trial) + ": |diff| " +
               std::to_string(std::abs(got + std::log(p)));
      return false;
    }
  }
  double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (secs >= 10.0) {
    detail = "runtime exceeds 10s";
    return false;
  }
  return true;
}

// shared finite-difference scaffold (central differences)
bool fd_matches(Eigen::MatrixXd& param, const std::function<double()>& eval,
                const Eigen::MatrixXd& analytic, std::string& detail,
                const char* what, double tol = 1e-4, double h = 1e-5) {
  for (long j = 0; j < param.cols(); ++j) {
    for (long i = 0; i < param.rows(); ++i) {
      double saved = param(i, j);
      param(i, j) = saved + h;
      double fp = eval();
      param(i, j) = saved - h;
      double fm = eval();
      param(i, j) = saved;
      double numeric = (fp - fm) / (2 * h);
      double a = analytic(i, j);
      double rel = std::abs(a - numeric) /
                   std::max(std::abs(a) + std::abs(numeric), 1e-2);
      if (rel > tol) {
        std::ostringstream ss;
        ss << what << " (" << i << "," << j << "): analytic " << a
           << " vs fd " << numeric;
        detail = ss.str();
        return false;
      }
    }
  }
  return true;
}

// ---- criterion 3: gradient checks ----
bool gradient_checks(std::string& detail) {
  auto start = Clock::now();

  {  // selector MLP on a miniature instance
    Selector sel(4, 7);
    EncodedPair pair;
    pair.query_final = Eigen::VectorXd::LinSpaced(8, -0.5, 0.7);
    pair.response_final = Eigen::VectorXd::LinSpaced(8, 0.3, -0.4);
    auto eval = [&]() { return sel.score_value(pair); };
    ad::Tape tape;
    nn::Bound b(tape, sel.params());
    EncodedPairVars vars;
    vars.query_final = tape.constant(pair.query_final);
    vars.response_final = tape.constant(pair.response_final);
    tape.backward(sel.score(tape, b, vars));
    for (const char* name : {"sel.w0", "sel.w2", "sel.w4"}) {
      if (!fd_matches(sel.params().at(name).value, eval, b[name].grad(), detail,
                      "selector")) {
        return false;
      }
    }
  }

  {  // encoder: 3-token input, d=4
    Encoder enc({12, 4, 4}, 5);
    const std::vector<int> q{4, 5, 6}, r{7, 8, 9};
    auto eval = [&]() {
      ad::Tape tape;
      nn::Bound b(tape, enc.params());
      EncodedPairVars out = enc.encode(tape, b, q, r);
      return ad::add(ad::sqnorm(out.query_final), ad::sqnorm(out.response_final))
          .scalar();
    };
    ad::Tape tape;
    nn::Bound b(tape, enc.params());
    EncodedPairVars out = enc.encode(tape, b, q, r);
    tape.backward(
        ad::add(ad::sqnorm(out.query_final), ad::sqnorm(out.response_final)));
    for (const char* name : {"enc.embedding", "enc.fwd.un", "enc.bwd.wr"}) {
      if (!fd_matches(enc.params().at(name).value, eval, b[name].grad(), detail,
                      "encoder")) {
        return false;
      }
    }
  }

  {  // generator output layer on a 2-token example
    Seq2SeqGenerator gen({12, 4, 4, 1, 6}, 5);
    const std::vector<int> q{4, 5}, r{6, 7};
    auto eval = [&]() { return gen.mle_loss(q, r); };
    ad::Tape tape;
    nn::Bound b(tape, gen.params());
    tape.backward(gen.mle_loss(tape, b, q, r));
    for (const char* name : {"gen.out.w", "gen.out.b"}) {
      if (!fd_matches(gen.params().at(name).value, eval, b[name].grad(), detail,
                      "generator")) {
        return false;
      }
    }
  }

  {  // KL term
    Eigen::MatrixXd mean(4, 1), logvar(4, 1);
    mean << 0.8, -0.3, 0.1, 1.2;
    logvar << 0.4, -0.6, 0.0, 0.2;
    auto eval = [&]() {
      ad::Tape t;
      return ad::gauss_kl(t.leaf(mean), t.leaf(logvar)).scalar();
    };
    ad::Tape t;
    ad::Var vm = t.leaf(mean), vl = t.leaf(logvar);
    t.backward(ad::gauss_kl(vm, vl));
    if (!fd_matches(mean, eval, vm.grad(), detail, "kl.mean")) return false;
    if (!fd_matches(logvar, eval, vl.grad(), detail, "kl.logvar")) return false;
  }

  {  // dpp_loss w.r.t. the scores (subset fixed)
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g(0.0, 1.0);
    const int n = 4;
    Eigen::MatrixXd feats(6, n);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < n; ++j) feats(i, j) = g(rng);
    Eigen::MatrixXd score_mat(n, 1);
    score_mat << 0.8, 0.3, 0.7, 0.6;
    auto eval = [&]() {
      ad::Tape tape;
      std::vector<ad::Var> scores, fvars;
      for (int i = 0; i < n; ++i) {
        scores.push_back(tape.leaf(score_mat.row(i).transpose()));
        fvars.push_back(tape.constant(feats.col(i)));
      }
      return dpp_loss(tape, scores, fvars).scalar();
    };
    ad::Tape tape;
    std::vector<ad::Var> scores, fvars;
    for (int i = 0; i < n; ++i) {
      scores.push_back(tape.leaf(score_mat.row(i).transpose()));
      fvars.push_back(tape.constant(feats.col(i)));
    }
    tape.backward(dpp_loss(tape, scores, fvars));
    Eigen::MatrixXd analytic(n, 1);
    for (int i = 0; i < n; ++i) {
      auto sv = scores[static_cast<size_t>(i)];
      analytic(i, 0) = tape.has_grad(sv.idx) ? sv.grad()(0, 0) : 0.0;
    }
    if (!fd_matches(score_mat, eval, analytic, detail, "dpp_loss")) return false;
  }

  double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (secs >= 60.0) {
    detail = "runtime exceeds 60s";
    return false;
  }
  return true;
}

// ---- criterion 4: loss identities ----
bool loss_identities(std::string& detail) {
  const double ln2 = std::log(2.0);
  if (std::abs(gqd_loss(std::vector<double>{0.5}, std::vector<double>{0.5}) -
               2 * ln2) > 1e-12) {
    detail = "L_D at 0.5";
    return false;
  }
  if (std::abs(selector_quality_loss(std::vector<double>{0.5}) - ln2) > 1e-12) {
    detail = "L_G at 0.5";
    return false;
  }
  {
    ad::Tape t;
    double kl = ad::gauss_kl(t.constant(Eigen::MatrixXd::Zero(8, 1)),
                             t.constant(Eigen::MatrixXd::Zero(8, 1)))
                    .scalar();
    if (std::abs(kl) > 1e-12) {
      detail = "KL at standard normal";
      return false;
    }
  }
  if (std::abs(length_regularizer(std::vector<double>(16, 0.6), 0.6)) > 1e-12) {
    detail = "length regularizer at target";
    return false;
  }
  if (std::abs(length_regularizer({1.0, 0.0}, 0.5)) > 1e-12) {
    detail = "length regularizer at mean 0.5";
    return false;
  }
  return true;
}

// ---- criterion 5: schedule accounting ----
bool schedule_accounting(std::string& detail) {
  if (kl_schedule(0) != 0.0 || kl_schedule(10000) != 0.5 ||
      kl_schedule(25000) != 1.0) {
    detail = "kl_schedule values";
    return false;
  }
  // 6,000 real training steps on a miniature model
  TrainerConfig cfg;
  cfg.seed = 11;
  cfg.batch_size = 2;
  cfg.encoder_hidden = 2;
  cfg.embedding_dim = 2;
  cfg.generator_hidden = 2;
  cfg.vae_hidden = 2;
  cfg.z_dim = 2;
  cfg.min_decode = 1;
  cfg.max_decode = 3;
  cfg.max_steps = 6000;
  Trainer trainer(12, cfg);
  std::vector<IndexedPair> pairs;
  for (int i = 0; i < 4; ++i) {
    pairs.push_back({"p" + std::to_string(i),
                     {4 + i, 5, 6},
                     {7, 8 + i}});
  }
  std::vector<const IndexedPair*> batch{&pairs[0], &pairs[1]};
  long disc_updates = 0;
  for (int step = 0; step < 6000; ++step) {
    StepRecord rec = trainer.train_step(batch);
    if (rec.disc_step) ++disc_updates;
  }
  if (disc_updates != 1000) {
    detail = "got " + std::to_string(disc_updates) + " discriminator updates";
    return false;
  }
  return true;
}

// ---- criterion 6: metric oracles ----
bool metric_oracles(std::string& detail) {
  using Seq = TokenSeq;
  Seq aab{"a", "a", "b"};
  if (std::abs(distinct_n({aab}, 1) - 2.0 / 3.0) > 1e-9) {
    detail = "distinct-1";
    return false;
  }
  Seq x{"to", "be", "or", "not", "to", "be"};
  for (int n = 1; n <= 4; ++n) {
    if (std::abs(bleu_n({x}, {x}, n) - 1.0) > 1e-9) {
      detail = "BLEU-" + std::to_string(n) + "(x,x)";
      return false;
    }
  }
  if (std::abs(bleu_n({{"a", "b", "c", "d"}}, {{"a", "b", "c", "e"}}, 1) - 0.75) >
      1e-9) {
    detail = "BLEU-1 3/4 overlap";
    return false;
  }

  // 4-dimensional fixture; brute-force greedy and extrema
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
  auto vec = [](double a, double b, double c, double d) {
    Eigen::VectorXd v(4);
    v << a, b, c, d;
    return v;
  };
  const char* words[20] = {"w00", "w01", "w02", "w03", "w04", "w05", "w06",
                           "w07", "w08", "w09", "w10", "w11", "w12", "w13",
                           "w14", "w15", "w16", "w17", "w18", "w19"};
  std::mt19937_64 rng(606);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    entries.emplace_back(words[i], vec(g(rng), g(rng), g(rng), g(rng)));
  }
  EmbeddingTable table = EmbeddingTable::from_entries(entries);
  auto cosine = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double na = a.norm(), nb = b.norm();
    if (na == 0 || nb == 0) return 0.0;
    return a.dot(b) / (na * nb);
  };
  TokenSeq hyp{"w00", "w03", "w07", "w11"};
  TokenSeq ref{"w02", "w05", "w13"};

  double fwd = 0;
  for (const auto& hw : hyp) {
    double best = -1;
    for (const auto& rw : ref) best = std::max(best, cosine(table.lookup(hw), table.lookup(rw)));
    fwd += best;
  }
  fwd /= static_cast<double>(hyp.size());
  double bwd = 0;
  for (const auto& rw : ref) {
    double best = -1;
    for (const auto& hw : hyp) best = std::max(best, cosine(table.lookup(rw), table.lookup(hw)));
    bwd += best;
  }
  bwd /= static_cast<double>(ref.size());
  if (std::abs(emb_greedy(hyp, ref, table) - 0.5 * (fwd + bwd)) > 1e-9) {
    detail = "greedy vs brute force";
    return false;
  }

  auto brute_extrema = [&](const TokenSeq& seq) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(4);
    for (int j = 0; j < 4; ++j) {
      double best = 0;
      for (const auto& w : seq) {
        double v = table.lookup(w)(j);
        if (std::abs(v) > std::abs(best) ||
            (std::abs(v) == std::abs(best) && v > best)) {
          best = v;
        }
      }
      out(j) = best;
    }
    return out;
  };
  if (std::abs(emb_extrema(hyp, ref, table) -
               cosine(brute_extrema(hyp), brute_extrema(ref))) > 1e-9) {
    detail = "extrema vs brute force";
    return false;
  }
  return true;
}

RunConfig desk_config(const std::filesystem::path& input,
                      const std::filesystem::path& out) {
  RunConfig cfg = RunConfig::from_string(
      "encoder.hidden = 16\n"
      "encoder.embedding = 16\n"
      "generator.hidden = 16\n"
      "vae.hidden = 16\n"
      "vae.z_dim = 8\n"
      "trainer.max_steps = 400\n"
      "trainer.window = 30\n"
      "trainer.dialog_steps = 30\n");
  cfg.set("data.input", input.string());
  cfg.set("run.out", out.string());
  return cfg;
}

// ---- criterion 7: pipeline count identity ----
bool count_identity(std::string& detail) {
  test::TempDir dir;
  // 250 unique pairs split 0.8/0.1/0.1 -> exactly 200 train pairs
  write_text_file(dir.path / "input.jsonl", test::toy_corpus_jsonl(175, 75, 9));
  {
    std::ifstream in(dir.path / "input.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(in, line))
      if (!line.empty()) ++n;
    if (n != 250) {
      detail = "fixture produced " + std::to_string(n) + " records, wanted 250";
      return false;
    }
  }
  RunConfig cfg = desk_config(dir.path / "input.jsonl", dir.path / "run");
  cfg.set("trainer.max_steps", "30");
  cfg.set("trainer.dialog_steps", "5");
  cfg.set("augmenter.fraction", "0.6");
  cfg.set("augmenter.multiplier", "10");
  pipeline::run_pipeline(cfg, false);

  Corpus train = load_corpus(dir.path / "run" / "corpus" / "train.jsonl", 20);
  if (train.size() != 200) {
    detail = "train split has " + std::to_string(train.size()) + " pairs";
    return false;
  }
  Corpus aug = load_corpus(dir.path / "run" / "augmented.jsonl", 20,
                           /*dedup=*/false);
  if (aug.size() != 1400) {
    detail = "augmented corpus has " + std::to_string(aug.size()) + " pairs";
    return false;
  }
  // provenance closure
  std::set<std::string> train_ids;
  for (const auto& p : train.pairs) train_ids.insert(p.id);
  long variants = 0;
  for (const auto& p : aug.pairs) {
    if (p.parent_id.empty()) continue;
    ++variants;
    if (!train_ids.count(p.parent_id)) {
      detail = "orphan parent_id " + p.parent_id;
      return false;
    }
    if (p.variant_index < 0 || p.variant_index >= 10) {
      detail = "variant_index out of range";
      return false;
    }
  }
  if (variants != 1200) {
    detail = "expected 1200 variants, got " + std::to_string(variants);
    return false;
  }
  return true;
}

std::vector<IndexedPair> toy_training_pairs(Vocabulary& vocab_out,
                                            const std::filesystem::path& dir) {
  write_text_file(dir / "toy.jsonl", test::toy_corpus_jsonl(350, 150, 5));
  Corpus corpus = load_corpus(dir / "toy.jsonl", 20);
  vocab_out = build_vocab(corpus, 50000);
  return index_corpus(corpus, vocab_out);
}

// ---- criterion 8: convergence behavior on the toy corpus ----
bool convergence_behavior(std::string& detail) {
  auto start = Clock::now();
  test::TempDir dir;
  Vocabulary vocab;
  std::vector<IndexedPair> pairs = toy_training_pairs(vocab, dir.path);

  TrainerConfig cfg;  // defaults: d=64, batch 16, lr 1e-3, window 50
  Trainer trainer(vocab.size(), cfg);
  ConvergenceStatus st = trainer.run(pairs, nullptr, nullptr);
  double secs = std::chrono::duration<double>(Clock::now() - start).count();

  std::ostringstream ss;
  ss << "stop=" << st.reason << " step=" << trainer.state().step
     << " gqd=" << st.gqd_mean << " rd=" << st.rd_mean << " wall="
     << static_cast<int>(secs) << "s";
  detail = ss.str();
  if (trainer.state().step > 30000) return false;
  if (secs >= 1800.0) return false;
  return st.gqd_mean >= 0.40 && st.gqd_mean <= 0.60 && st.rd_mean >= 0.40 &&
         st.rd_mean <= 0.60;
}

// ---- criterion 9: selection direction, 2 of 3 seeds ----
bool selection_direction(std::string& detail) {
  test::TempDir dir;
  Vocabulary vocab;
  std::vector<IndexedPair> pairs = toy_training_pairs(vocab, dir.path);

  int wins = 0;
  std::ostringstream ss;
  for (uint64_t seed : {42ull, 43ull, 44ull}) {
    TrainerConfig cfg;
    cfg.seed = seed;
    Trainer trainer(vocab.size(), cfg);
    trainer.run(pairs, nullptr, nullptr);
    double s_copy = 0, s_tmpl = 0;
    int n_copy = 0, n_tmpl = 0;
    for (const auto& p : pairs) {
      double s = trainer.score_pair(p);
      if (p.query == p.response) {
        s_copy += s;
        ++n_copy;
      } else {
        s_tmpl += s;
        ++n_tmpl;
      }
    }
    s_copy /= n_copy;
    s_tmpl /= n_tmpl;
    bool win = s_tmpl > s_copy;
    wins += win ? 1 : 0;
    ss << " seed" << seed << ": tmpl=" << s_tmpl << " copy=" << s_copy
       << (win ? " +" : " -");
  }
  detail = "wins=" + std::to_string(wins) + "/3" + ss.str();
  return wins >= 2;
}

// ---- criterion 10: sweep shape ----
bool sweep_shape(std::string& detail) {
  test::TempDir dir;
  write_text_file(dir.path / "input.jsonl", test::toy_corpus_jsonl(120, 40, 13));
  RunConfig cfg = desk_config(dir.path / "input.jsonl", dir.path / "run");
  cfg.set("trainer.max_steps", "40");
  cfg.set("trainer.dialog_steps", "8");
  cfg.set("augmenter.multiplier", "2");
  pipeline::run_sweep(cfg, {0.2, 0.6, 1.0}, false, dir.path / "run" / "sweep.csv",
                      false);

  std::ifstream in(dir.path / "run" / "sweep.csv");
  if (!in) {
    detail = "missing sweep.csv";
    return false;
  }
  std::string header;
  std::getline(in, header);
  if (header.find("fraction,") != 0 || header.find("emb_greedy") == std::string::npos) {
    detail = "malformed header: " + header;
    return false;
  }
  std::vector<long> selected;
  std::string line;
  int columns = static_cast<int>(std::count(header.begin(), header.end(), ',')) + 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1 != columns) {
      detail = "ragged row: " + line;
      return false;
    }
    auto p1 = line.find(',');
    auto p2 = line.find(',', p1 + 1);
    auto p3 = line.find(',', p2 + 1);
    selected.push_back(std::stol(line.substr(p2 + 1, p3 - p2 - 1)));
  }
  if (selected.size() != 3) {
    detail = "expected 3 rows, got " + std::to_string(selected.size());
    return false;
  }
  if (!(selected[0] < selected[1] && selected[1] < selected[2])) {
    detail = "selection counts not monotone";
    return false;
  }
  return true;
}

}  // namespace

int main() {
  Harness h;
  h.run("dpp_normalization", dpp_normalization);
  h.run("dpp_loss_oracle", dpp_loss_oracle);
  h.run("gradient_checks", gradient_checks);
  h.run("loss_identities", loss_identities);
  h.run("schedule_accounting", schedule_accounting);
  h.run("metric_oracles", metric_oracles);
  h.run("count_identity", count_identity);
  h.run("convergence_behavior", convergence_behavior);
  h.run("selection_direction", selection_direction);
  h.run("sweep_shape", sweep_shape);
  if (h.failures > 0) {
    std::printf("%d criterion(s) failed\n", h.failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
