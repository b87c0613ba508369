#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "sda/corpus.hpp"

namespace sda {

// Text augmentation backends. augment() must be total on non-empty input
// and safe to call concurrently.
class Augmenter {
 public:
  virtual ~Augmenter() = default;
  virtual std::string name() const = 0;
  virtual std::string augment(const std::string& text, int variant_index) const = 0;
  virtual int max_inflight() const { return 1; }
};

class IdentityAugmenter : public Augmenter {
 public:
  std::string name() const override { return "identity"; }
  std::string augment(const std::string& text, int) const override {
    return text;
  }
};

// Deterministic rule-based paraphrase: synonym substitution from a bundled
// lexicon keyed by (text hash, variant_index), plus one adjacent-token swap
// keyed by the text hash alone so distinct variants stay distinct.
std::string mock_paraphrase(const std::string& text, int variant_index);

class MockParaphraser : public Augmenter {
 public:
  std::string name() const override { return "mock"; }
  std::string augment(const std::string& text, int variant_index) const override {
    return mock_paraphrase(text, variant_index);
  }
};

// Round-trip translation through an external service. Wire format: POST
// <endpoint>/translate with {"text","source","target","variant"}, response
// {"text"}; API key read from SDA_MT_KEY and sent as x-api-key.
struct BacktranslateConfig {
  std::string endpoint;  // e.g. http://host:port
  std::string pivot_lang = "de";
  int max_inflight = 4;
  int retries = 3;
  int backoff_ms = 100;  // doubled per retry
};

class BacktranslateAugmenter : public Augmenter {
 public:
  explicit BacktranslateAugmenter(const BacktranslateConfig& cfg);
  std::string name() const override { return "backtranslate"; }
  std::string augment(const std::string& text, int variant_index) const override;
  int max_inflight() const override { return cfg_.max_inflight; }

 private:
  std::string translate(const std::string& text, const std::string& source,
                        const std::string& target, int variant_index) const;
  BacktranslateConfig cfg_;
  std::string api_key_;
};

std::map<std::string, double> load_scores(const std::filesystem::path& path);
void save_scores(const std::map<std::string, double>& scores,
                 const std::filesystem::path& path);

// ceil(fraction * N) ids with the highest scores; ties keep the
// lexicographically smaller id. Every id must be scored.
std::set<std::string> select_for_augmentation(
    const std::vector<std::string>& ids,
    const std::map<std::string, double>& scores, double fraction);

struct AugmentedVariant {
  std::string parent_id;
  int variant_index = 0;
  DialogPair pair;
};

struct AugmentedCorpus {
  Corpus originals;
  std::vector<AugmentedVariant> variants;  // sorted by (parent_id, variant_index)
  double fraction = 0;
  int multiplier = 0;

  size_t total() const { return originals.size() + variants.size(); }
};

// Expands each selected pair into `multiplier` variants; query and response
// are augmented independently and re-tokenized/truncated. Unselected pairs
// pass through untouched. Transport failures are collected and reported
// together; nothing partial is returned.
AugmentedCorpus augment_corpus(const Corpus& corpus,
                               const std::set<std::string>& selected_ids,
                               const Augmenter& augmenter, int multiplier,
                               int max_len);

// Originals first (corpus order), then variants with parent_id and
// variant_index fields.
void save_augmented(const AugmentedCorpus& aug, const std::filesystem::path& path);

}  // namespace sda
