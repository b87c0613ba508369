#include "sda/augmenter.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"
#include "sda/util.hpp"

namespace sda {

namespace {

// Small dialog-domain synonym lexicon for the deterministic mock.
const std::unordered_map<std::string, std::vector<std::string>>& lexicon() {
  static const std::unordered_map<std::string, std::vector<std::string>> table = {
      {"good", {"great", "fine", "nice"}},
      {"great", {"good", "wonderful"}},
      {"bad", {"awful", "terrible"}},
      {"happy", {"glad", "pleased"}},
      {"sad", {"unhappy", "gloomy"}},
      {"know", {"understand", "realize"}},
      {"think", {"believe", "guess", "suppose"}},
      {"want", {"need", "wish"}},
      {"like", {"enjoy", "love"}},
      {"love", {"adore", "like"}},
      {"go", {"leave", "head"}},
      {"come", {"arrive", "show"}},
      {"see", {"notice", "spot"}},
      {"say", {"tell", "mention"}},
      {"talk", {"speak", "chat"}},
      {"help", {"assist", "aid"}},
      {"buy", {"purchase", "get"}},
      {"eat", {"have", "taste"}},
      {"big", {"large", "huge"}},
      {"small", {"little", "tiny"}},
      {"fast", {"quick", "rapid"}},
      {"slow", {"sluggish", "unhurried"}},
      {"weather", {"forecast", "climate"}},
      {"cold", {"chilly", "freezing"}},
      {"hot", {"warm", "boiling"}},
      {"sunny", {"bright", "clear"}},
      {"rainy", {"wet", "drizzly"}},
      {"movie", {"film", "picture"}},
      {"book", {"novel", "read"}},
      {"music", {"songs", "tunes"}},
      {"food", {"meal", "dish"}},
      {"friend", {"pal", "buddy"}},
      {"work", {"job", "labor"}},
      {"home", {"house", "place"}},
      {"city", {"town", "area"}},
      {"really", {"truly", "honestly"}},
      {"maybe", {"perhaps", "possibly"}},
      {"yes", {"yeah", "sure"}},
      {"no", {"nope", "nah"}},
      {"hello", {"hi", "hey"}},
      {"thanks", {"thank", "cheers"}},
      {"sorry", {"apologies", "pardon"}},
      {"sure", {"certainly", "definitely"}},
      {"very", {"quite", "extremely"}},
      {"pretty", {"fairly", "rather"}},
      {"fun", {"enjoyable", "amusing"}},
      {"nice", {"pleasant", "lovely"}},
      {"tired", {"sleepy", "exhausted"}},
      {"hungry", {"starving", "peckish"}},
      {"beautiful", {"gorgeous", "lovely"}},
      {"interesting", {"fascinating", "intriguing"}},
      {"difficult", {"hard", "tough"}},
      {"easy", {"simple", "effortless"}},
      {"expensive", {"costly", "pricey"}},
      {"cheap", {"affordable", "inexpensive"}},
      {"today", {"now", "currently"}},
      {"tomorrow", {"later", "soon"}},
  };
  return table;
}

}  // namespace

std::string mock_paraphrase(const std::string& text, int variant_index) {
  if (text.empty()) return text;
  std::vector<std::string> tokens = split_tokens(lowercase(text));
  if (tokens.empty()) return text;
  const uint64_t h = fnv1a(text);
  const auto& lex = lexicon();

  for (size_t t = 0; t < tokens.size(); ++t) {
    auto it = lex.find(tokens[t]);
    if (it == lex.end()) continue;
    const auto& options = it->second;
    size_t pick = (h + static_cast<uint64_t>(variant_index) + t) %
                  (options.size() + 1);  // one slot keeps the original
    if (pick < options.size()) tokens[t] = options[pick];
  }

  // One adjacent swap at a hash-determined position; independent of the
  // variant index so substitution alone separates variants.
  if (tokens.size() >= 4) {
    size_t p = h % (tokens.size() - 1);
    std::swap(tokens[p], tokens[p + 1]);
  }
  return join_tokens(tokens);
}

BacktranslateAugmenter::BacktranslateAugmenter(const BacktranslateConfig& cfg)
    : cfg_(cfg) {
  if (cfg_.endpoint.empty()) {
    throw UsageError("backtranslate: augmenter.endpoint is not configured");
  }
  if (const char* key = std::getenv("SDA_MT_KEY")) api_key_ = key;
}

std::string BacktranslateAugmenter::translate(const std::string& text,
                                              const std::string& source,
                                              const std::string& target,
                                              int variant_index) const {
  nlohmann::json req;
  req["text"] = text;
  req["source"] = source;
  req["target"] = target;
  req["variant"] = variant_index;
  const std::string body = req.dump();

  int backoff = cfg_.backoff_ms;
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
    httplib::Client client(cfg_.endpoint);
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("x-api-key", api_key_);
    auto res = client.Post("/translate", headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    try {
      nlohmann::json obj = nlohmann::json::parse(res->body);
      return obj.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("bad response body: ") + e.what();
    }
  }
  throw ServiceError("backtranslate: " + last_error);
}

std::string BacktranslateAugmenter::augment(const std::string& text,
                                            int variant_index) const {
  std::string pivot = translate(text, "en", cfg_.pivot_lang, variant_index);
  return translate(pivot, cfg_.pivot_lang, "en", variant_index);
}

std::map<std::string, double> load_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score file: " + path.string());
  std::map<std::string, double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
      out[obj.at("id").get<std::string>()] = obj.at("score").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": malformed score record: " + e.what());
    }
  }
  if (out.empty()) throw DataError("empty score file: " + path.string());
  return out;
}

void save_scores(const std::map<std::string, double>& scores,
                 const std::filesystem::path& path) {
  std::ostringstream ss;
  for (const auto& [id, score] : scores) {
    nlohmann::json obj;
    obj["id"] = id;
    obj["score"] = score;
    ss << obj.dump() << "\n";
  }
  write_text_file(path, ss.str());
}

std::set<std::string> select_for_augmentation(
    const std::vector<std::string>& ids,
    const std::map<std::string, double>& scores, double fraction) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw UsageError("selection fraction must be in (0, 1]");
  }
  if (ids.empty()) throw DataError("select_for_augmentation: no ids");
  std::vector<std::pair<std::string, double>> ranked;
  ranked.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = scores.find(id);
    if (it == scores.end()) {
      throw DataError("missing score for id: " + id);
    }
    ranked.emplace_back(id, it->second);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  size_t k = static_cast<size_t>(
      std::ceil(fraction * static_cast<double>(ids.size())));
  k = std::min(k, ranked.size());
  std::set<std::string> out;
  for (size_t i = 0; i < k; ++i) out.insert(ranked[i].first);
  return out;
}

AugmentedCorpus augment_corpus(const Corpus& corpus,
                               const std::set<std::string>& selected_ids,
                               const Augmenter& augmenter, int multiplier,
                               int max_len) {
  if (multiplier < 1) throw UsageError("augment multiplier must be >= 1");
  std::set<std::string> corpus_ids;
  for (const auto& pair : corpus.pairs) corpus_ids.insert(pair.id);
  for (const auto& id : selected_ids) {
    if (!corpus_ids.count(id)) throw DataError("selected id not in corpus: " + id);
  }

  struct Job {
    const DialogPair* parent;
    int variant;
    std::string aug_query, aug_response;
    std::string error;
  };
  std::vector<Job> jobs;
  for (const auto& pair : corpus.pairs) {
    if (!selected_ids.count(pair.id)) continue;
    for (int v = 0; v < multiplier; ++v) {
      jobs.push_back({&pair, v, "", "", ""});
    }
  }

  const int threads =
      std::max(1, std::min<int>(augmenter.max_inflight(),
                                static_cast<int>(jobs.size())));
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= jobs.size()) break;
      Job& job = jobs[i];
      try {
        job.aug_query = augmenter.augment(job.parent->raw_query, job.variant);
        job.aug_response = augmenter.augment(job.parent->raw_response, job.variant);
      } catch (const std::exception& e) {
        job.error = e.what();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::set<std::string> failed;
  for (const auto& job : jobs) {
    if (!job.error.empty()) failed.insert(job.parent->id);
  }
  if (!failed.empty()) {
    std::string ids_joined;
    for (const auto& id : failed) {
      if (!ids_joined.empty()) ids_joined += ", ";
      ids_joined += id;
    }
    throw ServiceError("augmentation failed for ids: " + ids_joined);
  }

  AugmentedCorpus out;
  out.originals = corpus;
  out.multiplier = multiplier;
  out.fraction = corpus.empty() ? 0.0
                                : static_cast<double>(selected_ids.size()) /
                                      static_cast<double>(corpus.size());
  for (const auto& job : jobs) {
    AugmentedVariant variant;
    variant.parent_id = job.parent->id;
    variant.variant_index = job.variant;
    DialogPair& p = variant.pair;
    p.id = job.parent->id + ".v" + std::to_string(job.variant);
    p.raw_query = job.aug_query;
    p.raw_response = job.aug_response;
    p.query = tokenize(job.aug_query);
    p.response = tokenize(job.aug_response);
    if (static_cast<int>(p.query.size()) > max_len) p.query.resize(max_len);
    if (static_cast<int>(p.response.size()) > max_len) p.response.resize(max_len);
    if (p.query.empty() || p.response.empty()) {
      throw DataError("augmenter returned empty text for id " + job.parent->id);
    }
    p.parent_id = job.parent->id;
    p.variant_index = job.variant;
    out.variants.push_back(std::move(variant));
  }
  std::sort(out.variants.begin(), out.variants.end(),
            [](const AugmentedVariant& a, const AugmentedVariant& b) {
              if (a.parent_id != b.parent_id) return a.parent_id < b.parent_id;
              return a.variant_index < b.variant_index;
            });
  return out;
}

void save_augmented(const AugmentedCorpus& aug,
                    const std::filesystem::path& path) {
  std::ostringstream ss;
  auto dump_pair = [&](const DialogPair& p, bool with_provenance) {
    nlohmann::json obj;
    obj["id"] = p.id;
    obj["query"] = p.raw_query;
    obj["response"] = p.raw_response;
    if (with_provenance) {
      obj["parent_id"] = p.parent_id;
      obj["variant_index"] = p.variant_index;
    }
    ss << obj.dump() << "\n";
  };
  for (const auto& p : aug.originals.pairs) dump_pair(p, false);
  for (const auto& v : aug.variants) dump_pair(v.pair, true);
  write_text_file(path, ss.str());
}

}  // namespace sda
