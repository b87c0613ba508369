#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "sda/config.hpp"
#include "sda/metrics.hpp"
#include "sda/trainer.hpp"

namespace sda::pipeline {

namespace fs = std::filesystem;

// Stages are cached: each writes a stamp with the config hash and the
// content hashes of its inputs, and is skipped when nothing changed
// (unless force).

void prepare(const RunConfig& cfg, const fs::path& input,
             const fs::path& corpus_dir, bool force);

ConvergenceStatus train(const RunConfig& cfg, const fs::path& corpus_dir,
                        const fs::path& train_dir, bool force);

void score(const RunConfig& cfg, const fs::path& corpus_dir,
           const fs::path& train_dir, const fs::path& scores_path, bool force);

void augment(const RunConfig& cfg, const fs::path& corpus_dir,
             const fs::path& scores_path, const fs::path& out_path, bool force);

void train_dialog(const RunConfig& cfg, const fs::path& corpus_file,
                  const fs::path& vocab_path, const fs::path& dialog_dir,
                  bool force);

MetricsReport evaluate(const RunConfig& cfg, const fs::path& dialog_dir,
                       const fs::path& vocab_path, const fs::path& test_file,
                       const fs::path& report_path, bool force);

// prepare -> train -> score -> augment -> train-dialog -> evaluate, plus the
// selected-vs-unselected diagnostic table. Artifacts land under run.out.
void run_pipeline(const RunConfig& cfg, bool force);

// Reuses the prepared corpus and trained selector; per fraction, selects,
// augments (mock), retrains the downstream generator and evaluates. With
// random_selection the top-score rule is replaced by seeded uniform draws.
void run_sweep(const RunConfig& cfg, const std::vector<double>& fractions,
               bool random_selection, const fs::path& out_csv, bool force);

// Deterministic per-word unit vectors used when no embedding file is
// configured; keyed by a hash of the word.
EmbeddingTable hashed_embeddings(const Vocabulary& vocab, int dim = 16);

}  // namespace sda::pipeline
