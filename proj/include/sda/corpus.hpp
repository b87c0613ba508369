#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace sda {

// One query/response training pair. Token sequences are lowercased,
// punctuation-split and truncated; raw_* keep the untouched source text.
struct DialogPair {
  std::string id;
  std::vector<std::string> query;
  std::vector<std::string> response;
  std::string raw_query;
  std::string raw_response;
  // Provenance for augmented variants; empty / -1 for originals.
  std::string parent_id;
  int variant_index = -1;
};

struct Corpus {
  std::vector<DialogPair> pairs;
  std::string split_tag;  // train / valid / test / ""

  size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

// Token/index bijection with four fixed reserved entries.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  Vocabulary();

  // Appends a token; no-op if already present. Returns its index.
  int add(const std::string& token);

  int size() const { return static_cast<int>(id_to_token_.size()); }
  bool contains(const std::string& token) const {
    return token_to_id_.count(token) > 0;
  }

  // UNK for out-of-vocabulary tokens.
  int encode(const std::string& token) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  const std::string& token(int id) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

std::vector<std::string> tokenize(const std::string& text);

// Reads a JSONL corpus ({"query":..., "response":...} per line), tokenizes,
// truncates to max_len tokens and drops exact (query, response) duplicates.
// Records may carry parent_id / variant_index fields (augmented corpora).
Corpus load_corpus(const std::filesystem::path& path, int max_len,
                   bool dedup = true);

// Same pipeline over in-memory records; ids are assigned from record order.
Corpus corpus_from_records(
    const std::vector<std::pair<std::string, std::string>>& records,
    int max_len, bool dedup = true);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Most frequent max_size tokens, ties broken by first appearance.
Vocabulary build_vocab(const Corpus& corpus, int max_size);

// Deterministic shuffle + partition; ratios must be nonnegative and sum to 1.
std::array<Corpus, 3> split_corpus(const Corpus& corpus,
                                   const std::array<double, 3>& ratios,
                                   uint64_t seed);

}  // namespace sda
