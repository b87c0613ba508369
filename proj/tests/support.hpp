#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace sda::test {

// Scratch directory cleaned up on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("sda_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

// Central finite differences against an analytic gradient. eval() must
// recompute the scalar objective from the current parameter values.
template <typename F>
void fd_check(Eigen::MatrixXd& param, F eval, const Eigen::MatrixXd& analytic,
              double tol = 1e-4, double h = 1e-5) {
  REQUIRE(analytic.rows() == param.rows());
  REQUIRE(analytic.cols() == param.cols());
  for (long j = 0; j < param.cols(); ++j) {
    for (long i = 0; i < param.rows(); ++i) {
      const double saved = param(i, j);
      param(i, j) = saved + h;
      const double fp = eval();
      param(i, j) = saved - h;
      const double fm = eval();
      param(i, j) = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic(i, j);
      const double rel =
          std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-2);
      if (rel > tol) {
        CAPTURE(i);
        CAPTURE(j);
        CAPTURE(a);
        CAPTURE(numeric);
      }
      REQUIRE(rel <= tol);
    }
  }
}

// Laplace-expansion determinant; the independent oracle for the DPP checks.
inline double laplace_det(const Eigen::MatrixXd& m) {
  const long n = m.rows();
  if (n == 0) return 1.0;  // det over the empty matrix
  if (n == 1) return m(0, 0);
  double det = 0.0;
  for (long j = 0; j < n; ++j) {
    Eigen::MatrixXd minor(n - 1, n - 1);
    for (long r = 1; r < n; ++r) {
      long mc = 0;
      for (long c = 0; c < n; ++c) {
        if (c == j) continue;
        minor(r - 1, mc++) = m(r, c);
      }
    }
    det += ((j % 2 == 0) ? 1.0 : -1.0) * m(0, j) * laplace_det(minor);
  }
  return det;
}

inline Eigen::MatrixXd submatrix_of(const Eigen::MatrixXd& m,
                                    const std::vector<int>& idx) {
  Eigen::MatrixXd out(idx.size(), idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    for (size_t j = 0; j < idx.size(); ++j) {
      out(static_cast<long>(i), static_cast<long>(j)) = m(idx[i], idx[j]);
    }
  }
  return out;
}

// Synthetic dialog corpus: coherent templated pairs plus trivial-copy pairs
// whose response repeats the query. Responses stay >= 10 tokens so the
// default decoder bounds can reproduce them.
inline std::string toy_corpus_jsonl(int n_templated, int n_copies,
                                    unsigned seed) {
  static const std::vector<std::string> cities = {
      "paris", "tokyo", "berlin", "oslo", "madrid", "dublin", "vienna", "cairo"};
  static const std::vector<std::string> topics = {
      "music",   "football", "cooking", "painting",
      "history", "gardens",  "movies",  "sailing"};
  static const std::vector<std::string> adjectives = {
      "interesting", "boring", "exciting", "strange",
      "wonderful",   "tricky", "peaceful", "lively"};
  static const std::vector<std::string> items = {
      "apples", "books", "stamps", "tickets", "flowers", "maps", "pens", "tools"};
  static const std::vector<std::string> words = {
      "harbor", "lantern", "meadow", "copper", "violet", "thunder", "marble",
      "willow", "ember",   "quartz", "cedar",  "falcon", "amber",   "juniper",
      "breeze", "pepper",  "saffron", "indigo", "walnut", "coral"};

  std::mt19937 rng(seed);
  auto pick = [&](const std::vector<std::string>& v) {
    return v[rng() % v.size()];
  };
  std::ostringstream out;
  for (int i = 0; i < n_templated; ++i) {
    // trailing ordinal keeps every pair unique through deduplication; the
    // detail words are unpredictable from the query, so these pairs stay
    // hard for the generator while the copies below stay trivial
    std::string tag = std::to_string(i);
    std::string q, r;
    switch (i % 4) {
      case 0: {
        auto city = pick(cities);
        q = "how is the weather in " + city + " today my friend " + tag;
        r = "the weather in " + city + " today mostly brings traces of " +
            pick(words) + " and " + pick(words);
        break;
      }
      case 1: {
        auto topic = pick(topics);
        q = "what do you think about " + topic + " these days " + tag;
        r = "i think " + topic + " these days is mostly about " + pick(words) +
            " and " + pick(words);
        break;
      }
      case 2: {
        auto item = pick(items);
        q = "where can i buy some " + item + " around here " + tag;
        r = "you can buy " + item + " around the corner close to the " +
            pick(words) + " " + pick(words);
        break;
      }
      default: {
        auto topic = pick(topics);
        q = "do you like " + topic + " or something else " + tag;
        r = "yes i like " + topic + " mostly because of the " + pick(words) +
            " and " + pick(words);
        break;
      }
    }
    out << R"({"query": ")" << q << R"(", "response": ")" << r << "\"}\n";
  }
  for (int i = 0; i < n_copies; ++i) {
    // unique (w1, w2) combinations; trivially copyable with no rare tokens
    size_t a = static_cast<size_t>(i) % words.size();
    size_t b = (a + 1 + static_cast<size_t>(i) / words.size()) % words.size();
    std::string line = "please repeat the words " + words[a] + " and " +
                       words[b] + " one more time please";
    out << R"({"query": ")" << line << R"(", "response": ")" << line << "\"}\n";
  }
  return out.str();
}

}  // namespace sda::test
