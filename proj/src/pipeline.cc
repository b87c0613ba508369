#include "sda/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "sda/augmenter.hpp"
#include "sda/util.hpp"

namespace sda::pipeline {

namespace {

// A stage is up to date when its stamp records the same config hash and the
// same input-file hashes as the current invocation.
bool stage_fresh(const fs::path& stamp_path, const std::string& config_hash,
                 const std::vector<fs::path>& inputs,
                 const std::vector<fs::path>& outputs) {
  if (!fs::exists(stamp_path)) return false;
  for (const auto& out : outputs) {
    if (!fs::exists(out)) return false;
  }
  nlohmann::json stamp;
  try {
    stamp = nlohmann::json::parse(read_text_file(stamp_path));
  } catch (const std::exception&) {
    return false;
  }
  if (stamp.value("config_hash", "") != config_hash) return false;
  for (const auto& in : inputs) {
    std::string key = in.string();
    if (!stamp["inputs"].contains(key)) return false;
    if (stamp["inputs"][key].get<std::string>() != hex64(hash_file(in))) {
      return false;
    }
  }
  return true;
}

void write_stamp(const fs::path& stamp_path, const std::string& config_hash,
                 const std::vector<fs::path>& inputs) {
  nlohmann::json stamp;
  stamp["config_hash"] = config_hash;
  stamp["inputs"] = nlohmann::json::object();
  for (const auto& in : inputs) {
    stamp["inputs"][in.string()] = hex64(hash_file(in));
  }
  write_text_file(stamp_path, stamp.dump(2) + "\n");
}

std::unique_ptr<Augmenter> make_augmenter(const RunConfig& cfg) {
  const std::string kind = cfg.get("augmenter.kind");
  if (kind == "mock") return std::make_unique<MockParaphraser>();
  if (kind == "identity") return std::make_unique<IdentityAugmenter>();
  if (kind == "backtranslate") {
    BacktranslateConfig bc;
    bc.endpoint = cfg.get("augmenter.endpoint");
    bc.pivot_lang = cfg.get("augmenter.pivot_lang");
    bc.max_inflight = static_cast<int>(cfg.get_int("augmenter.max_inflight"));
    bc.retries = static_cast<int>(cfg.get_int("augmenter.retries"));
    return std::make_unique<BacktranslateAugmenter>(bc);
  }
  throw UsageError("unknown augmenter.kind: " + kind);
}

EmbeddingTable load_metrics_embeddings(const RunConfig& cfg,
                                       const Vocabulary& vocab) {
  const std::string path = cfg.get("metrics.embeddings_path");
  if (!path.empty()) return EmbeddingTable::load(path);
  return hashed_embeddings(vocab);
}

}  // namespace

EmbeddingTable hashed_embeddings(const Vocabulary& vocab, int dim) {
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
  for (int id = 0; id < vocab.size(); ++id) {
    const std::string& word = vocab.token(id);
    std::mt19937_64 rng(fnv1a(word));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j) v(j) = gauss(rng);
    v.normalize();
    entries.emplace_back(word, v);
  }
  return EmbeddingTable::from_entries(entries);
}

void prepare(const RunConfig& cfg, const fs::path& input,
             const fs::path& corpus_dir, bool force) {
  const fs::path stamp = corpus_dir / "prepare.stamp.json";
  std::vector<fs::path> outputs = {corpus_dir / "train.jsonl",
                                   corpus_dir / "valid.jsonl",
                                   corpus_dir / "test.jsonl",
                                   corpus_dir / "vocab.txt"};
  if (!force && stage_fresh(stamp, cfg.hash(), {input}, outputs)) {
    std::cerr << "[prepare] up to date\n";
    return;
  }
  Corpus corpus = load_corpus(input, cfg.max_len());
  auto splits = split_corpus(corpus, cfg.get_ratios("data.split_ratios"), cfg.seed());
  fs::create_directories(corpus_dir);
  save_corpus(splits[0], corpus_dir / "train.jsonl");
  save_corpus(splits[1], corpus_dir / "valid.jsonl");
  save_corpus(splits[2], corpus_dir / "test.jsonl");
  Vocabulary vocab = build_vocab(splits[0], cfg.vocab_size());
  vocab.save(corpus_dir / "vocab.txt");
  write_stamp(stamp, cfg.hash(), {input});
  std::cerr << "[prepare] " << corpus.size() << " pairs -> " << splits[0].size()
            << "/" << splits[1].size() << "/" << splits[2].size()
            << ", vocab " << vocab.size() << "\n";
}

ConvergenceStatus train(const RunConfig& cfg, const fs::path& corpus_dir,
                        const fs::path& train_dir, bool force) {
  const fs::path stamp = train_dir / "train.stamp.json";
  const std::vector<fs::path> inputs = {corpus_dir / "train.jsonl",
                                        corpus_dir / "vocab.txt"};
  if (!force && stage_fresh(stamp, cfg.hash(), inputs,
                            {train_dir / "manifest.json"})) {
    std::cerr << "[train] up to date\n";
    ConvergenceStatus st;
    st.converged = true;
    st.reason = "cached";
    return st;
  }
  Vocabulary vocab = Vocabulary::load(corpus_dir / "vocab.txt");
  Corpus corpus = load_corpus(corpus_dir / "train.jsonl", cfg.max_len());
  std::vector<IndexedPair> pairs = index_corpus(corpus, vocab);

  Trainer trainer(vocab.size(), cfg.trainer_config());
  fs::create_directories(train_dir);
  std::ofstream quality_csv(train_dir / "telemetry_quality.csv");
  std::ofstream repr_csv(train_dir / "telemetry_repr.csv");
  long next_report = 0;
  ConvergenceStatus status =
      trainer.run(pairs, &quality_csv, &repr_csv, [&](const StepRecord& rec) {
        if (rec.step >= next_report) {
          std::cerr << "[train] step " << rec.step << " L_D=" << rec.l_d
                    << " L_G=" << rec.l_g << " gqd_acc=" << rec.gqd_acc
                    << " rd_acc=" << rec.rd_acc << "\n";
          next_report = rec.step + 200;
        }
      });
  trainer.save_checkpoint(train_dir, cfg.hash());
  nlohmann::json conv;
  conv["reason"] = status.reason;
  conv["gqd_mean"] = status.gqd_mean;
  conv["rd_mean"] = status.rd_mean;
  conv["step"] = trainer.state().step;
  conv["config_hash"] = cfg.hash();
  write_text_file(train_dir / "convergence.json", conv.dump(2) + "\n");
  write_stamp(stamp, cfg.hash(), inputs);
  std::cerr << "[train] stopped (" << status.reason << ") at step "
            << trainer.state().step << "\n";
  return status;
}

void score(const RunConfig& cfg, const fs::path& corpus_dir,
           const fs::path& train_dir, const fs::path& scores_path, bool force) {
  const fs::path stamp = scores_path.string() + ".stamp.json";
  const std::vector<fs::path> inputs = {corpus_dir / "train.jsonl",
                                        corpus_dir / "vocab.txt",
                                        train_dir / "manifest.json"};
  if (!force && stage_fresh(stamp, cfg.hash(), inputs, {scores_path})) {
    std::cerr << "[score] up to date\n";
    return;
  }
  Vocabulary vocab = Vocabulary::load(corpus_dir / "vocab.txt");
  Corpus corpus = load_corpus(corpus_dir / "train.jsonl", cfg.max_len());
  Trainer trainer(vocab.size(), cfg.trainer_config());
  trainer.load_checkpoint(train_dir);
  std::vector<IndexedPair> pairs = index_corpus(corpus, vocab);
  if (scores_path.has_parent_path()) fs::create_directories(scores_path.parent_path());
  std::ofstream out(scores_path);
  if (!out) throw DataError("cannot write scores: " + scores_path.string());
  trainer.export_scores(pairs, out);
  out.close();
  write_stamp(stamp, cfg.hash(), inputs);
  std::cerr << "[score] wrote " << pairs.size() << " scores\n";
}

void augment(const RunConfig& cfg, const fs::path& corpus_dir,
             const fs::path& scores_path, const fs::path& out_path, bool force) {
  const fs::path stamp = out_path.string() + ".stamp.json";
  const std::vector<fs::path> inputs = {corpus_dir / "train.jsonl", scores_path};
  if (!force && stage_fresh(stamp, cfg.hash(), inputs, {out_path})) {
    std::cerr << "[augment] up to date\n";
    return;
  }
  Corpus corpus = load_corpus(corpus_dir / "train.jsonl", cfg.max_len());
  auto scores = load_scores(scores_path);
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& p : corpus.pairs) ids.push_back(p.id);
  auto selected = select_for_augmentation(ids, scores,
                                          cfg.get_double("augmenter.fraction"));
  auto augmenter = make_augmenter(cfg);
  AugmentedCorpus aug =
      augment_corpus(corpus, selected, *augmenter,
                     static_cast<int>(cfg.get_int("augmenter.multiplier")),
                     cfg.max_len());
  save_augmented(aug, out_path);
  write_stamp(stamp, cfg.hash(), inputs);
  std::cerr << "[augment] " << aug.originals.size() << " + "
            << aug.variants.size() << " variants = " << aug.total() << "\n";
}

void train_dialog(const RunConfig& cfg, const fs::path& corpus_file,
                  const fs::path& vocab_path, const fs::path& dialog_dir,
                  bool force) {
  const fs::path stamp = dialog_dir / "dialog.stamp.json";
  const std::vector<fs::path> inputs = {corpus_file, vocab_path};
  if (!force && stage_fresh(stamp, cfg.hash(), inputs,
                            {dialog_dir / "generator.bin"})) {
    std::cerr << "[train-dialog] up to date\n";
    return;
  }
  Vocabulary vocab = Vocabulary::load(vocab_path);
  // Augmented corpora repeat text on purpose; keep duplicates.
  Corpus corpus = load_corpus(corpus_file, cfg.max_len(), /*dedup=*/false);
  std::vector<IndexedPair> pairs = index_corpus(corpus, vocab);

  GeneratorConfig gc{vocab.size(),
                     static_cast<int>(cfg.get_int("encoder.embedding")),
                     static_cast<int>(cfg.get_int("generator.hidden")),
                     static_cast<int>(cfg.get_int("generator.min_steps")),
                     static_cast<int>(cfg.get_int("generator.max_steps"))};
  Seq2SeqGenerator generator(gc, cfg.seed());
  nn::Adam opt(cfg.get_double("trainer.lr"));
  std::mt19937_64 rng(substream_seed(cfg.seed(), "dialog"));

  const long steps = cfg.get_int("trainer.dialog_steps");
  const int batch_size = static_cast<int>(cfg.get_int("batch_size"));
  std::vector<size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  size_t pos = order.size();

  fs::create_directories(dialog_dir);
  std::ofstream telemetry(dialog_dir / "telemetry.csv");
  telemetry << "step,mle\n";
  for (long step = 0; step < steps; ++step) {
    ad::Tape tape;
    nn::Bound b(tape, generator.params());
    std::vector<ad::Var> losses;
    for (int i = 0; i < batch_size; ++i) {
      if (pos >= order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        pos = 0;
      }
      const IndexedPair& pair = pairs[order[pos++]];
      losses.push_back(generator.mle_loss(tape, b, pair.query, pair.response));
    }
    ad::Var loss = ad::mean(ad::stack_cols(losses));
    double v = loss.scalar();
    if (!std::isfinite(v)) throw TrainAbort("non-finite loss: mle_loss");
    tape.backward(loss);
    opt.step({&b});
    telemetry << step << ',' << v << '\n';
    if (step % 100 == 0) std::cerr << "[train-dialog] step " << step << " mle=" << v << "\n";
  }
  generator.params().save(dialog_dir / "generator.bin");
  nlohmann::json manifest;
  manifest["config_hash"] = cfg.hash();
  manifest["steps"] = steps;
  manifest["seed"] = cfg.seed();
  manifest["corpus"] = corpus_file.string();
  write_text_file(dialog_dir / "manifest.json", manifest.dump(2) + "\n");
  write_stamp(stamp, cfg.hash(), inputs);
}

MetricsReport evaluate(const RunConfig& cfg, const fs::path& dialog_dir,
                       const fs::path& vocab_path, const fs::path& test_file,
                       const fs::path& report_path, bool force) {
  const fs::path stamp = report_path.string() + ".stamp.json";
  const std::vector<fs::path> inputs = {dialog_dir / "generator.bin",
                                        vocab_path, test_file};
  if (!force && stage_fresh(stamp, cfg.hash(), inputs, {report_path})) {
    std::cerr << "[evaluate] up to date\n";
    nlohmann::json cached = nlohmann::json::parse(read_text_file(report_path));
    MetricsReport report;
    report.dist_1 = cached["dist_1"];
    report.dist_2 = cached["dist_2"];
    report.dist_3 = cached["dist_3"];
    report.bleu_1 = cached["bleu_1"];
    report.bleu_2 = cached["bleu_2"];
    report.bleu_3 = cached["bleu_3"];
    report.bleu_4 = cached["bleu_4"];
    report.emb_average = cached["emb_average"];
    report.emb_extrema = cached["emb_extrema"];
    report.emb_greedy = cached["emb_greedy"];
    report.n_samples = cached["n_samples"];
    return report;
  }
  Vocabulary vocab = Vocabulary::load(vocab_path);
  Corpus test = load_corpus(test_file, cfg.max_len());

  GeneratorConfig gc{vocab.size(),
                     static_cast<int>(cfg.get_int("encoder.embedding")),
                     static_cast<int>(cfg.get_int("generator.hidden")),
                     static_cast<int>(cfg.get_int("generator.min_steps")),
                     static_cast<int>(cfg.get_int("generator.max_steps"))};
  Seq2SeqGenerator generator(gc, cfg.seed());
  generator.params().load(dialog_dir / "generator.bin");

  std::vector<TokenSeq> hyps, refs;
  std::ofstream gen_out(report_path.string() + ".hyps.jsonl");
  for (const auto& pair : test.pairs) {
    GeneratedResponse resp = generator.generate(vocab.encode(pair.query));
    TokenSeq hyp = vocab.decode(resp.tokens);
    hyps.push_back(hyp);
    refs.push_back(pair.response);
    nlohmann::json obj;
    obj["id"] = pair.id;
    obj["hypothesis"] = join_tokens(hyp);
    gen_out << obj.dump() << "\n";
  }
  EmbeddingTable table = load_metrics_embeddings(cfg, vocab);
  MetricsReport report = evaluate_responses(hyps, refs, table);
  write_report_json(report, cfg.hash(), report_path);
  write_stamp(stamp, cfg.hash(), inputs);
  std::cerr << "[evaluate] n=" << report.n_samples << " dist1=" << report.dist_1
            << " bleu1=" << report.bleu_1 << " avg=" << report.emb_average << "\n";
  return report;
}

void run_pipeline(const RunConfig& cfg, bool force) {
  const fs::path out = cfg.get("run.out");
  const fs::path input = cfg.get("data.input");
  if (input.empty()) throw UsageError("config key data.input is required");
  fs::create_directories(out);
  // Config snapshot with its hash for provenance.
  {
    std::ostringstream ss;
    ss << "# config_hash = " << cfg.hash() << "\n";
    for (const auto& [k, v] : RunConfig::defaults()) {
      ss << k << " = " << cfg.get(k) << "\n";
    }
    write_text_file(out / "config.txt", ss.str());
  }
  const fs::path corpus_dir = out / "corpus";
  const fs::path train_dir = out / "train";
  const fs::path dialog_dir = out / "dialog";

  prepare(cfg, input, corpus_dir, force);
  train(cfg, corpus_dir, train_dir, force);
  score(cfg, corpus_dir, train_dir, out / "scores.jsonl", force);
  augment(cfg, corpus_dir, out / "scores.jsonl", out / "augmented.jsonl", force);
  train_dialog(cfg, out / "augmented.jsonl", corpus_dir / "vocab.txt",
               dialog_dir, force);
  evaluate(cfg, dialog_dir, corpus_dir / "vocab.txt", corpus_dir / "test.jsonl",
           out / "report.json", force);

  // Selected-vs-unselected diagnostics on the training split: generation
  // BLEU-2 of the jointly trained generator and BLEU-1 of the BOW-decoded
  // reconstruction, split by the augmentation selection.
  Vocabulary vocab = Vocabulary::load(corpus_dir / "vocab.txt");
  Corpus train_corpus = load_corpus(corpus_dir / "train.jsonl", cfg.max_len());
  Trainer trainer(vocab.size(), cfg.trainer_config());
  trainer.load_checkpoint(train_dir);
  auto scores = load_scores(out / "scores.jsonl");
  std::vector<std::string> ids;
  for (const auto& p : train_corpus.pairs) ids.push_back(p.id);
  auto selected = select_for_augmentation(ids, scores,
                                          cfg.get_double("augmenter.fraction"));
  std::map<std::string, double> gen_bleu, recon_bleu;
  for (const auto& pair : train_corpus.pairs) {
    IndexedPair ip{pair.id, vocab.encode(pair.query), vocab.encode(pair.response)};
    GeneratedResponse resp = trainer.generator().generate(ip.query);
    gen_bleu[pair.id] =
        sentence_bleu(vocab.decode(resp.tokens), pair.response, 2);
    std::vector<int> recon = trainer.reconstruct_response_tokens(ip);
    recon_bleu[pair.id] = sentence_bleu(vocab.decode(recon), pair.response, 1);
  }
  DiagnosticReport diag =
      selected_vs_unselected_report(gen_bleu, recon_bleu, selected);
  write_text_file(out / "diagnostics.csv", diagnostic_csv(diag));
  std::cerr << "[pipeline] done; artifacts in " << out.string() << "\n";
}

void run_sweep(const RunConfig& cfg, const std::vector<double>& fractions,
               bool random_selection, const fs::path& out_csv, bool force) {
  if (fractions.empty()) throw UsageError("sweep: no fractions given");
  for (double f : fractions) {
    if (f <= 0.0 || f > 1.0) {
      throw UsageError("sweep: fractions must lie in (0, 1]");
    }
  }
  const fs::path out = cfg.get("run.out");
  const fs::path input = cfg.get("data.input");
  if (input.empty()) throw UsageError("config key data.input is required");
  const fs::path corpus_dir = out / "corpus";
  const fs::path train_dir = out / "train";

  prepare(cfg, input, corpus_dir, force);
  train(cfg, corpus_dir, train_dir, force);
  score(cfg, corpus_dir, train_dir, out / "scores.jsonl", force);

  Corpus train_corpus = load_corpus(corpus_dir / "train.jsonl", cfg.max_len());
  std::vector<std::string> ids;
  for (const auto& p : train_corpus.pairs) ids.push_back(p.id);
  auto scores = load_scores(out / "scores.jsonl");

  std::ostringstream csv;
  csv << "fraction,selection,n_selected,n_total,dialog_steps,dist_1,dist_2,"
         "dist_3,bleu_1,bleu_2,bleu_3,bleu_4,emb_average,emb_extrema,"
         "emb_greedy\n";
  for (size_t fi = 0; fi < fractions.size(); ++fi) {
    const double fraction = fractions[fi];
    std::set<std::string> selected;
    if (random_selection) {
      std::vector<std::string> shuffled = ids;
      std::mt19937_64 rng(substream_seed(cfg.seed(), "sweep-random"));
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      size_t k = static_cast<size_t>(
          std::ceil(fraction * static_cast<double>(ids.size())));
      k = std::min(k, shuffled.size());
      selected.insert(shuffled.begin(), shuffled.begin() + static_cast<long>(k));
    } else {
      selected = select_for_augmentation(ids, scores, fraction);
    }
    std::ostringstream tag;
    tag << (random_selection ? "random" : "selective") << "_f"
        << static_cast<int>(std::lround(fraction * 100));
    const fs::path frac_dir = out / "sweep" / tag.str();
    fs::create_directories(frac_dir);

    auto augmenter = make_augmenter(cfg);
    AugmentedCorpus aug = augment_corpus(
        train_corpus, selected, *augmenter,
        static_cast<int>(cfg.get_int("augmenter.multiplier")), cfg.max_len());
    save_augmented(aug, frac_dir / "augmented.jsonl");

    train_dialog(cfg, frac_dir / "augmented.jsonl", corpus_dir / "vocab.txt",
                 frac_dir / "dialog", force);
    MetricsReport report =
        evaluate(cfg, frac_dir / "dialog", corpus_dir / "vocab.txt",
                 corpus_dir / "test.jsonl", frac_dir / "report.json", force);

    csv << fraction << ',' << (random_selection ? "random" : "selective") << ','
        << selected.size() << ',' << aug.total() << ','
        << cfg.get_int("trainer.dialog_steps") << ',' << report.dist_1 << ','
        << report.dist_2 << ',' << report.dist_3 << ',' << report.bleu_1 << ','
        << report.bleu_2 << ',' << report.bleu_3 << ',' << report.bleu_4 << ','
        << report.emb_average << ',' << report.emb_extrema << ','
        << report.emb_greedy << '\n';
  }
  write_text_file(out_csv, csv.str());
  std::cerr << "[sweep] wrote " << out_csv.string() << "\n";
}

}  // namespace sda::pipeline
