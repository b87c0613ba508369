// Command-line front end for the selective data augmentation toolkit.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sda/augmenter.hpp"
#include "sda/config.hpp"
#include "sda/pipeline.hpp"
#include "sda/util.hpp"

namespace {

using sda::RunConfig;
namespace fs = std::filesystem;

RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig();
  return RunConfig::load(path);
}

std::vector<double> parse_fractions(const std::string& csv) {
  std::vector<double> out;
  std::istringstream ss(csv);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    try {
      out.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw sda::UsageError("bad fraction: " + part);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sda - selective data augmentation for response generation"};
  app.require_subcommand(1);

  std::string config_path, input, out, corpus, scores, test_file, embeddings,
      report = "report.json", run_dir, augmenter_kind, fractions_csv, vocab;
  int max_len = -1, vocab_size = -1, multiplier = -1;
  double fraction = -1.0;
  bool force = false, random_selection = false;
  app.add_flag("--force", force, "rerun stages even when cached");

  auto* cmd_prepare = app.add_subcommand("prepare", "tokenize, dedup and split a corpus");
  cmd_prepare->add_option("--input", input, "input JSONL corpus")->required();
  cmd_prepare->add_option("--out", out, "output corpus directory")->required();
  cmd_prepare->add_option("--max-len", max_len, "truncation length (default 20)");
  cmd_prepare->add_option("--vocab-size", vocab_size, "vocabulary cap (default 50000)");
  cmd_prepare->add_option("--config", config_path, "config file");

  auto* cmd_train = app.add_subcommand("train", "adversarial selector training");
  cmd_train->add_option("--corpus", corpus, "prepared corpus directory")->required();
  cmd_train->add_option("--config", config_path, "config file");
  cmd_train->add_option("--out", out, "training output directory")->required();

  auto* cmd_score = app.add_subcommand("score", "export selection scores");
  cmd_score->add_option("--run", run_dir, "run directory (corpus/ + train/)")->required();
  cmd_score->add_option("--out", out, "score file (jsonl)")->required();
  cmd_score->add_option("--config", config_path, "config file");

  auto* cmd_augment = app.add_subcommand("augment", "expand the selected pairs");
  cmd_augment->add_option("--scores", scores, "score file")->required();
  cmd_augment->add_option("--corpus", corpus, "prepared corpus directory")->required();
  cmd_augment->add_option("--fraction", fraction, "selection fraction (default 0.6)");
  cmd_augment->add_option("--multiplier", multiplier, "variants per pair (default 10)");
  cmd_augment->add_option("--augmenter", augmenter_kind, "mock|backtranslate");
  cmd_augment->add_option("--out", out, "augmented corpus file")->required();
  cmd_augment->add_option("--config", config_path, "config file");

  auto* cmd_dialog = app.add_subcommand("train-dialog", "train the downstream generator");
  cmd_dialog->add_option("--corpus", corpus, "training corpus file (jsonl)")->required();
  cmd_dialog->add_option("--out", out, "output directory")->required();
  cmd_dialog->add_option("--vocab", vocab, "vocabulary file (default: sibling vocab.txt)");
  cmd_dialog->add_option("--config", config_path, "config file");

  auto* cmd_eval = app.add_subcommand("evaluate", "metrics report on a test set");
  cmd_eval->add_option("--run", run_dir, "run directory (dialog/ + corpus/)")->required();
  cmd_eval->add_option("--test", test_file, "test corpus file")->required();
  cmd_eval->add_option("--embeddings", embeddings, "word-vector file");
  cmd_eval->add_option("--report", report, "report path (default report.json)");
  cmd_eval->add_option("--config", config_path, "config file");

  auto* cmd_pipeline = app.add_subcommand("pipeline", "run all stages");
  cmd_pipeline->add_option("--config", config_path, "config file")->required();

  auto* cmd_sweep = app.add_subcommand("sweep", "augmentation-fraction sweep");
  cmd_sweep->add_option("--config", config_path, "config file")->required();
  cmd_sweep->add_option("--fractions", fractions_csv, "comma-separated fractions")
      ->required();
  cmd_sweep->add_flag("--random", random_selection, "random instead of top-score selection");
  cmd_sweep->add_option("--out", out, "sweep CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints help or the parse error
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = load_config_or_default(config_path);

    if (cmd_prepare->parsed()) {
      if (max_len > 0) cfg.set("max_len", std::to_string(max_len));
      if (vocab_size > 0) cfg.set("vocab_size", std::to_string(vocab_size));
      sda::pipeline::prepare(cfg, input, out, force);
    } else if (cmd_train->parsed()) {
      sda::pipeline::train(cfg, corpus, out, force);
    } else if (cmd_score->parsed()) {
      sda::pipeline::score(cfg, fs::path(run_dir) / "corpus",
                           fs::path(run_dir) / "train", out, force);
    } else if (cmd_augment->parsed()) {
      if (fraction > 0) cfg.set("augmenter.fraction", std::to_string(fraction));
      if (multiplier > 0) cfg.set("augmenter.multiplier", std::to_string(multiplier));
      if (!augmenter_kind.empty()) cfg.set("augmenter.kind", augmenter_kind);
      sda::pipeline::augment(cfg, corpus, scores, out, force);
    } else if (cmd_dialog->parsed()) {
      fs::path vocab_path = vocab.empty()
                                ? fs::path(corpus).parent_path() / "vocab.txt"
                                : fs::path(vocab);
      if (!fs::exists(vocab_path)) {
        vocab_path = fs::path(corpus).parent_path() / "corpus" / "vocab.txt";
      }
      sda::pipeline::train_dialog(cfg, corpus, vocab_path, out, force);
    } else if (cmd_eval->parsed()) {
      if (!embeddings.empty()) cfg.set("metrics.embeddings_path", embeddings);
      sda::pipeline::evaluate(cfg, fs::path(run_dir) / "dialog",
                              fs::path(run_dir) / "corpus" / "vocab.txt",
                              test_file, report, force);
    } else if (cmd_pipeline->parsed()) {
      sda::pipeline::run_pipeline(cfg, force);
    } else if (cmd_sweep->parsed()) {
      fs::path csv = out.empty()
                         ? fs::path(cfg.get("run.out")) / "sweep.csv"
                         : fs::path(out);
      sda::pipeline::run_sweep(cfg, parse_fractions(fractions_csv),
                               random_selection, csv, force);
    }
  } catch (const sda::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const sda::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const sda::TrainAbort& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 3;
  } catch (const sda::ServiceError& e) {
    std::cerr << "external service failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
