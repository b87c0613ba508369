#include "sda/corpus.hpp"

#include <fstream>
#include <set>

#include "doctest.h"
#include "sda/util.hpp"
#include "support.hpp"

using namespace sda;

namespace {

std::filesystem::path write_jsonl(const test::TempDir& dir,
                                  const std::string& content,
                                  const std::string& name = "corpus.jsonl") {
  auto path = dir.path / name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation") {
  auto tokens = tokenize("Hello, World!");
  REQUIRE(tokens.size() == 4);
  CHECK(tokens[0] == "hello");
  CHECK(tokens[1] == ",");
  CHECK(tokens[2] == "world");
  CHECK(tokens[3] == "!");
  CHECK(tokenize("don't") == std::vector<std::string>{"don", "'", "t"});
}

TEST_CASE("load_corpus truncates to max_len keeping the head") {
  test::TempDir dir;
  std::string q25 = "w1";
  for (int i = 2; i <= 25; ++i) q25 += " w" + std::to_string(i);
  auto path = write_jsonl(dir, R"({"query": ")" + q25 +
                                   R"(", "response": "short reply"})" + "\n");
  Corpus corpus = load_corpus(path, 20);
  REQUIRE(corpus.size() == 1);
  CHECK(corpus.pairs[0].query.size() == 20);
  CHECK(corpus.pairs[0].query.front() == "w1");
  CHECK(corpus.pairs[0].query.back() == "w20");

  SUBCASE("short sequences pass through unchanged") {
    CHECK(corpus.pairs[0].response == std::vector<std::string>{"short", "reply"});
  }
}

TEST_CASE("load_corpus deduplicates identical pairs keeping the first") {
  test::TempDir dir;
  auto path = write_jsonl(dir,
                          R"({"query": "hi there", "response": "hello friend"})"
                          "\n"
                          R"({"query": "hi there", "response": "hello friend"})"
                          "\n"
                          R"({"query": "hi there", "response": "different"})"
                          "\n");
  Corpus corpus = load_corpus(path, 20);
  CHECK(corpus.size() == 2);
  CHECK(corpus.pairs[0].id == "p000000");

  SUBCASE("dedup is idempotent") {
    auto path2 = dir.path / "roundtrip.jsonl";
    save_corpus(corpus, path2);
    Corpus again = load_corpus(path2, 20);
    REQUIRE(again.size() == corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) {
      CHECK(again.pairs[i].query == corpus.pairs[i].query);
      CHECK(again.pairs[i].response == corpus.pairs[i].response);
    }
  }
}

TEST_CASE("load_corpus error paths") {
  test::TempDir dir;
  SUBCASE("malformed record names the line") {
    auto path = write_jsonl(dir,
                            R"({"query": "ok", "response": "fine"})"
                            "\nnot json at all\n");
    try {
      load_corpus(path, 20);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("empty file") {
    auto path = write_jsonl(dir, "");
    CHECK_THROWS_AS(load_corpus(path, 20), DataError);
  }
  SUBCASE("empty query") {
    auto path = write_jsonl(dir, R"({"query": "", "response": "x"})" "\n");
    CHECK_THROWS_AS(load_corpus(path, 20), DataError);
  }
}

TEST_CASE("vocabulary basics and round trip") {
  Vocabulary vocab;
  CHECK(vocab.size() == 4);
  CHECK(vocab.encode("anything") == Vocabulary::kUnk);
  int id = vocab.add("hello");
  CHECK(id == 4);
  CHECK(vocab.token(4) == "hello");
  CHECK(vocab.encode(std::vector<std::string>{"hello", "missing"}) ==
        std::vector<int>{4, Vocabulary::kUnk});

  test::TempDir dir;
  vocab.add("world");
  vocab.save(dir.path / "vocab.txt");
  Vocabulary loaded = Vocabulary::load(dir.path / "vocab.txt");
  CHECK(loaded.size() == vocab.size());
  CHECK(loaded.encode("world") == vocab.encode("world"));

  // in-vocabulary text detokenizes to itself
  std::vector<std::string> text{"hello", "world"};
  CHECK(loaded.decode(loaded.encode(text)) == text);
}

TEST_CASE("build_vocab keeps the most frequent tokens") {
  std::vector<std::pair<std::string, std::string>> records;
  // a:5 b:3 c:1 across pairs
  records.push_back({"a a b", "a b c"});
  records.push_back({"a b", "a x1"});
  records.push_back({"x2 x3", "x4 x5"});
  Corpus corpus = corpus_from_records(records, 20);

  SUBCASE("below the cap everything is kept") {
    Vocabulary vocab = build_vocab(corpus, 50000);
    CHECK(vocab.size() == 4 + 8);  // a b c x1..x5
  }
  SUBCASE("cap keeps the top tokens, others map to UNK") {
    Vocabulary vocab = build_vocab(corpus, 2);
    CHECK(vocab.size() == 6);
    CHECK(vocab.contains("a"));
    CHECK(vocab.contains("b"));
    CHECK(vocab.encode("c") == Vocabulary::kUnk);
  }
  SUBCASE("tokens only in removed duplicates are not counted") {
    std::vector<std::pair<std::string, std::string>> dup_records;
    dup_records.push_back({"hello there", "general remark"});
    dup_records.push_back({"hello there", "general remark"});
    Corpus small = corpus_from_records(dup_records, 20);
    Vocabulary vocab = build_vocab(small, 50000);
    CHECK(vocab.size() == 4 + 4);
  }
  SUBCASE("max_size < 1 rejected") {
    CHECK_THROWS_AS(build_vocab(corpus, 0), UsageError);
  }
}

TEST_CASE("split_corpus is exact, exhaustive and deterministic") {
  std::vector<std::pair<std::string, std::string>> records;
  for (int i = 0; i < 100; ++i) {
    records.push_back({"query number " + std::to_string(i), "reply " + std::to_string(i)});
  }
  Corpus corpus = corpus_from_records(records, 20);

  auto splits = split_corpus(corpus, {0.8, 0.1, 0.1}, 17);
  CHECK(splits[0].size() == 80);
  CHECK(splits[1].size() == 10);
  CHECK(splits[2].size() == 10);
  CHECK(splits[0].split_tag == "train");

  SUBCASE("partitions are disjoint and exhaustive") {
    std::set<std::string> ids;
    for (const auto& split : splits) {
      for (const auto& p : split.pairs) ids.insert(p.id);
    }
    CHECK(ids.size() == 100);
  }
  SUBCASE("all-train ratios") {
    auto all = split_corpus(corpus, {1.0, 0.0, 0.0}, 17);
    CHECK(all[0].size() == 100);
    CHECK(all[2].size() == 0);
  }
  SUBCASE("same seed twice gives identical partitions") {
    auto again = split_corpus(corpus, {0.8, 0.1, 0.1}, 17);
    for (int k = 0; k < 3; ++k) {
      REQUIRE(again[k].size() == splits[k].size());
      for (size_t i = 0; i < again[k].size(); ++i) {
        CHECK(again[k].pairs[i].id == splits[k].pairs[i].id);
      }
    }
  }
  SUBCASE("negative ratio rejected") {
    CHECK_THROWS_AS(split_corpus(corpus, {1.2, -0.2, 0.0}, 17), UsageError);
  }
  SUBCASE("ratios must sum to one") {
    CHECK_THROWS_AS(split_corpus(corpus, {0.5, 0.1, 0.1}, 17), UsageError);
  }
}
