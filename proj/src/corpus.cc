#include "sda/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sda/util.hpp"

namespace sda {

namespace {

const char* kReservedMarkers[] = {"<pad>", "<unk>", "<bos>", "<eos>"};

std::string pair_key(const std::vector<std::string>& q,
                     const std::vector<std::string>& r) {
  return join_tokens(q) + "\x1f" + join_tokens(r);
}

std::vector<std::string> truncate(std::vector<std::string> tokens, int max_len) {
  if (static_cast<int>(tokens.size()) > max_len) tokens.resize(max_len);
  return tokens;
}

}  // namespace

Vocabulary::Vocabulary() {
  for (const char* m : kReservedMarkers) {
    token_to_id_[m] = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(m);
  }
}

int Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  int id = static_cast<int>(id_to_token_.size());
  token_to_id_[token] = id;
  id_to_token_.push_back(token);
  return id;
}

int Vocabulary::encode(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(encode(t));
  return out;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw DataError("token index out of vocabulary range: " + std::to_string(id));
  }
  return id_to_token_[static_cast<size_t>(id)];
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(token(id));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ostringstream ss;
  for (const auto& t : id_to_token_) ss << t << "\n";
  write_text_file(path, ss.str());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary: " + path.string());
  Vocabulary vocab;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno <= kReserved) {
      if (line != kReservedMarkers[lineno - 1]) {
        throw DataError("vocabulary line " + std::to_string(lineno) +
                        ": expected reserved marker " +
                        kReservedMarkers[lineno - 1]);
      }
      continue;
    }
    if (line.empty()) continue;
    vocab.add(line);
  }
  return vocab;
}

std::vector<std::string> tokenize(const std::string& text) {
  return split_tokens(lowercase(text));
}

namespace {

struct RawRecord {
  std::string query;
  std::string response;
  std::string parent_id;
  int variant_index = -1;
  std::string id;  // optional explicit id
};

Corpus build_corpus(const std::vector<RawRecord>& records, int max_len,
                    bool dedup) {
  if (max_len < 1) throw UsageError("max_len must be positive");
  Corpus corpus;
  std::set<std::string> seen;
  int index = 0;
  for (const auto& rec : records) {
    DialogPair pair;
    pair.raw_query = rec.query;
    pair.raw_response = rec.response;
    pair.query = truncate(tokenize(rec.query), max_len);
    pair.response = truncate(tokenize(rec.response), max_len);
    pair.parent_id = rec.parent_id;
    pair.variant_index = rec.variant_index;
    if (pair.query.empty() || pair.response.empty()) {
      throw DataError("record " + std::to_string(index + 1) +
                      ": query/response empty after tokenization");
    }
    if (dedup) {
      auto key = pair_key(pair.query, pair.response);
      if (!seen.insert(key).second) {
        ++index;
        continue;
      }
    }
    if (!rec.id.empty()) {
      pair.id = rec.id;
    } else {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "p%06d", index);
      pair.id = buf;
    }
    corpus.pairs.push_back(std::move(pair));
    ++index;
  }
  if (corpus.pairs.empty()) throw DataError("corpus is empty");
  return corpus;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, int max_len, bool dedup) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus: " + path.string());
  std::vector<RawRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": malformed JSON record: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("query") || !obj.contains("response") ||
        !obj["query"].is_string() || !obj["response"].is_string()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": record must be an object with string "
                      "\"query\" and \"response\"");
    }
    RawRecord rec;
    rec.query = obj["query"].get<std::string>();
    rec.response = obj["response"].get<std::string>();
    if (rec.query.empty() || rec.response.empty()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": empty query or response");
    }
    if (obj.contains("id") && obj["id"].is_string()) {
      rec.id = obj["id"].get<std::string>();
    }
    if (obj.contains("parent_id") && obj["parent_id"].is_string()) {
      rec.parent_id = obj["parent_id"].get<std::string>();
    }
    if (obj.contains("variant_index") && obj["variant_index"].is_number_integer()) {
      rec.variant_index = obj["variant_index"].get<int>();
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw DataError("empty corpus file: " + path.string());
  return build_corpus(records, max_len, dedup);
}

Corpus corpus_from_records(
    const std::vector<std::pair<std::string, std::string>>& records,
    int max_len, bool dedup) {
  std::vector<RawRecord> raw;
  raw.reserve(records.size());
  for (const auto& [q, r] : records) raw.push_back({q, r, "", -1, ""});
  return build_corpus(raw, max_len, dedup);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ostringstream ss;
  for (const auto& pair : corpus.pairs) {
    nlohmann::json obj;
    obj["id"] = pair.id;
    obj["query"] = pair.raw_query;
    obj["response"] = pair.raw_response;
    if (!pair.parent_id.empty()) {
      obj["parent_id"] = pair.parent_id;
      obj["variant_index"] = pair.variant_index;
    }
    ss << obj.dump() << "\n";
  }
  write_text_file(path, ss.str());
}

Vocabulary build_vocab(const Corpus& corpus, int max_size) {
  if (max_size < 1) throw UsageError("vocabulary max_size must be >= 1");
  if (corpus.empty()) throw DataError("cannot build vocabulary from empty corpus");
  std::unordered_map<std::string, long> counts;
  std::vector<std::string> order;  // first-appearance order
  auto count = [&](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) {
      auto it = counts.find(t);
      if (it == counts.end()) {
        counts[t] = 1;
        order.push_back(t);
      } else {
        ++it->second;
      }
    }
  };
  for (const auto& pair : corpus.pairs) {
    count(pair.query);
    count(pair.response);
  }
  // Stable sort keeps first-appearance order among equal frequencies.
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string& a, const std::string& b) {
                     return counts[a] > counts[b];
                   });
  if (static_cast<int>(order.size()) > max_size) order.resize(max_size);
  Vocabulary vocab;
  for (const auto& t : order) vocab.add(t);
  return vocab;
}

std::array<Corpus, 3> split_corpus(const Corpus& corpus,
                                   const std::array<double, 3>& ratios,
                                   uint64_t seed) {
  double sum = 0;
  for (double r : ratios) {
    if (r < 0) throw UsageError("split ratios must be nonnegative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw UsageError("split ratios must sum to 1");
  }
  const size_t n = corpus.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  size_t n_train = static_cast<size_t>(std::llround(ratios[0] * n));
  size_t n_valid = static_cast<size_t>(std::llround(ratios[1] * n));
  n_train = std::min(n_train, n);
  n_valid = std::min(n_valid, n - n_train);

  std::array<Corpus, 3> out;
  out[0].split_tag = "train";
  out[1].split_tag = "valid";
  out[2].split_tag = "test";
  for (size_t i = 0; i < n; ++i) {
    int bucket = i < n_train ? 0 : (i < n_train + n_valid ? 1 : 2);
    out[bucket].pairs.push_back(corpus.pairs[idx[i]]);
  }
  return out;
}

}  // namespace sda
