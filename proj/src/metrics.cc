#include "sda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "sda/util.hpp"

namespace sda {

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings: " + path.string());
  EmbeddingTable out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (word.empty() || values.empty()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": malformed embedding line");
    }
    if (out.dim_ == 0) out.dim_ = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != out.dim_) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": inconsistent embedding dimension");
    }
    Eigen::VectorXd vec(out.dim_);
    for (int i = 0; i < out.dim_; ++i) vec(i) = values[static_cast<size_t>(i)];
    out.table_[word] = std::move(vec);
  }
  if (out.table_.empty()) throw DataError("empty embedding file: " + path.string());
  return out;
}

EmbeddingTable EmbeddingTable::from_entries(
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& entries) {
  EmbeddingTable out;
  for (const auto& [word, vec] : entries) {
    if (out.dim_ == 0) out.dim_ = static_cast<int>(vec.size());
    if (vec.size() != out.dim_) throw DataError("inconsistent embedding dimension");
    out.table_[word] = vec;
  }
  return out;
}

Eigen::VectorXd EmbeddingTable::lookup(const std::string& word) const {
  auto it = table_.find(word);
  if (it != table_.end()) return it->second;
  return Eigen::VectorXd::Zero(dim_);
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, long>;

NgramCounts ngrams(const TokenSeq& tokens, int n) {
  NgramCounts out;
  if (static_cast<int>(tokens.size()) < n) return out;
  for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
    std::vector<std::string> gram(tokens.begin() + static_cast<long>(i),
                                  tokens.begin() + static_cast<long>(i) + n);
    ++out[gram];
  }
  return out;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

// In-table vectors of a sequence; OOV tokens are skipped when the sequence
// has at least one table hit.
std::vector<Eigen::VectorXd> table_vectors(const TokenSeq& tokens,
                                           const EmbeddingTable& table) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& tok : tokens) {
    if (table.contains(tok)) out.push_back(table.lookup(tok));
  }
  return out;
}

void warn_all_oov() {
  std::cerr << "warning: both sides entirely out of the embedding table; "
               "metric defined as 0.0\n";
}

}  // namespace

double distinct_n(const std::vector<TokenSeq>& hypotheses, int n) {
  if (n < 1) throw UsageError("distinct_n: n must be >= 1");
  std::set<std::vector<std::string>> unique;
  long total = 0;
  for (const auto& hyp : hypotheses) {
    for (auto& [gram, count] : ngrams(hyp, n)) {
      unique.insert(gram);
      total += count;
    }
  }
  if (total == 0) {
    throw DataError("distinct_n: no n-grams of order " + std::to_string(n));
  }
  return static_cast<double>(unique.size()) / static_cast<double>(total);
}

namespace {

double corpus_bleu(const std::vector<TokenSeq>& hypotheses,
                   const std::vector<TokenSeq>& references, int n) {
  constexpr double kEps = 0.1;  // smoothing for zero counts at orders >= 2
  std::vector<double> matched(static_cast<size_t>(n), 0.0);
  std::vector<double> total(static_cast<size_t>(n), 0.0);
  long hyp_len = 0, ref_len = 0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    hyp_len += static_cast<long>(hypotheses[i].size());
    ref_len += static_cast<long>(references[i].size());
    for (int k = 1; k <= n; ++k) {
      NgramCounts hg = ngrams(hypotheses[i], k);
      NgramCounts rg = ngrams(references[i], k);
      for (const auto& [gram, count] : hg) {
        total[static_cast<size_t>(k - 1)] += static_cast<double>(count);
        auto it = rg.find(gram);
        if (it != rg.end()) {
          matched[static_cast<size_t>(k - 1)] +=
              static_cast<double>(std::min(count, it->second));
        }
      }
    }
  }
  double log_prec = 0;
  for (int k = 1; k <= n; ++k) {
    double m = matched[static_cast<size_t>(k - 1)];
    double t = total[static_cast<size_t>(k - 1)];
    if (m == 0.0) {
      if (k == 1) return 0.0;
      m = kEps;
    }
    if (t == 0.0) t = 1.0;
    log_prec += std::log(m / t) / static_cast<double>(n);
  }
  double bp = 1.0;
  if (hyp_len < ref_len && hyp_len > 0) {
    bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  }
  return std::min(1.0, bp * std::exp(log_prec));
}

}  // namespace

double bleu_n(const std::vector<TokenSeq>& hypotheses,
              const std::vector<TokenSeq>& references, int n) {
  if (n < 1 || n > 4) throw UsageError("bleu_n: n must be in 1..4");
  if (hypotheses.size() != references.size() || hypotheses.empty()) {
    throw DataError("bleu_n: hypothesis/reference length mismatch");
  }
  return corpus_bleu(hypotheses, references, n);
}

double sentence_bleu(const TokenSeq& hypothesis, const TokenSeq& reference,
                     int n) {
  return bleu_n({hypothesis}, {reference}, n);
}

double emb_average(const TokenSeq& hyp, const TokenSeq& ref,
                   const EmbeddingTable& table) {
  auto hv = table_vectors(hyp, table);
  auto rv = table_vectors(ref, table);
  if (hv.empty() && rv.empty()) {
    warn_all_oov();
    return 0.0;
  }
  Eigen::VectorXd hm = Eigen::VectorXd::Zero(table.dim());
  Eigen::VectorXd rm = Eigen::VectorXd::Zero(table.dim());
  for (const auto& v : hv) hm += v;
  if (!hv.empty()) hm /= static_cast<double>(hv.size());
  for (const auto& v : rv) rm += v;
  if (!rv.empty()) rm /= static_cast<double>(rv.size());
  return cosine(hm, rm);
}

double emb_extrema(const TokenSeq& hyp, const TokenSeq& ref,
                   const EmbeddingTable& table) {
  auto hv = table_vectors(hyp, table);
  auto rv = table_vectors(ref, table);
  if (hv.empty() && rv.empty()) {
    warn_all_oov();
    return 0.0;
  }
  auto extrema = [&](const std::vector<Eigen::VectorXd>& vs) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(table.dim());
    for (const auto& v : vs) {
      for (int j = 0; j < table.dim(); ++j) {
        double cur = out(j), cand = v(j);
        if (std::abs(cand) > std::abs(cur) ||
            (std::abs(cand) == std::abs(cur) && cand > cur)) {
          out(j) = cand;
        }
      }
    }
    return out;
  };
  return cosine(extrema(hv), extrema(rv));
}

double emb_greedy(const TokenSeq& hyp, const TokenSeq& ref,
                  const EmbeddingTable& table) {
  auto hv = table_vectors(hyp, table);
  auto rv = table_vectors(ref, table);
  if (hv.empty() && rv.empty()) {
    warn_all_oov();
    return 0.0;
  }
  if (hv.empty() || rv.empty()) return 0.0;
  auto directional = [](const std::vector<Eigen::VectorXd>& from,
                        const std::vector<Eigen::VectorXd>& to) {
    double total = 0;
    for (const auto& f : from) {
      double best = -1.0;
      for (const auto& t : to) best = std::max(best, cosine(f, t));
      total += best;
    }
    return total / static_cast<double>(from.size());
  };
  return 0.5 * (directional(hv, rv) + directional(rv, hv));
}

MetricsReport evaluate_responses(const std::vector<TokenSeq>& hypotheses,
                                 const std::vector<TokenSeq>& references,
                                 const EmbeddingTable& table) {
  if (hypotheses.size() != references.size() || hypotheses.empty()) {
    throw DataError("evaluate_responses: hypothesis/reference mismatch");
  }
  MetricsReport report;
  report.n_samples = static_cast<long>(hypotheses.size());
  report.dist_1 = distinct_n(hypotheses, 1);
  report.dist_2 = distinct_n(hypotheses, 2);
  report.dist_3 = distinct_n(hypotheses, 3);
  report.bleu_1 = bleu_n(hypotheses, references, 1);
  report.bleu_2 = bleu_n(hypotheses, references, 2);
  report.bleu_3 = bleu_n(hypotheses, references, 3);
  report.bleu_4 = bleu_n(hypotheses, references, 4);
  double avg = 0, ext = 0, gre = 0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    avg += emb_average(hypotheses[i], references[i], table);
    ext += emb_extrema(hypotheses[i], references[i], table);
    gre += emb_greedy(hypotheses[i], references[i], table);
  }
  report.emb_average = avg / static_cast<double>(hypotheses.size());
  report.emb_extrema = ext / static_cast<double>(hypotheses.size());
  report.emb_greedy = gre / static_cast<double>(hypotheses.size());
  return report;
}

void write_report_json(const MetricsReport& report,
                       const std::string& config_hash,
                       const std::filesystem::path& path) {
  nlohmann::json obj;
  obj["dist_1"] = report.dist_1;
  obj["dist_2"] = report.dist_2;
  obj["dist_3"] = report.dist_3;
  obj["bleu_1"] = report.bleu_1;
  obj["bleu_2"] = report.bleu_2;
  obj["bleu_3"] = report.bleu_3;
  obj["bleu_4"] = report.bleu_4;
  obj["emb_average"] = report.emb_average;
  obj["emb_extrema"] = report.emb_extrema;
  obj["emb_greedy"] = report.emb_greedy;
  obj["n_samples"] = report.n_samples;
  obj["config_hash"] = config_hash;
  write_text_file(path, obj.dump(2) + "\n");
}

DiagnosticReport selected_vs_unselected_report(
    const std::map<std::string, double>& gen_bleu_by_id,
    const std::map<std::string, double>& recon_bleu_by_id,
    const std::set<std::string>& selected_ids) {
  DiagnosticReport out;
  double sel_gen = 0, unsel_gen = 0, sel_rec = 0, unsel_rec = 0;
  for (const auto& [id, gen_bleu] : gen_bleu_by_id) {
    auto it = recon_bleu_by_id.find(id);
    if (it == recon_bleu_by_id.end()) {
      throw DataError("diagnostic report: missing reconstruction BLEU for " + id);
    }
    if (selected_ids.count(id)) {
      ++out.n_selected;
      sel_gen += gen_bleu;
      sel_rec += it->second;
    } else {
      ++out.n_unselected;
      unsel_gen += gen_bleu;
      unsel_rec += it->second;
    }
  }
  if (out.n_selected == 0 || out.n_unselected == 0) {
    throw DataError("diagnostic report: empty partition");
  }
  out.selected_gen_bleu = sel_gen / static_cast<double>(out.n_selected);
  out.selected_recon_bleu = sel_rec / static_cast<double>(out.n_selected);
  out.unselected_gen_bleu = unsel_gen / static_cast<double>(out.n_unselected);
  out.unselected_recon_bleu = unsel_rec / static_cast<double>(out.n_unselected);
  return out;
}

std::string diagnostic_csv(const DiagnosticReport& report) {
  std::ostringstream ss;
  ss << "partition,n,gen_bleu,recon_bleu\n";
  ss << "selected," << report.n_selected << ',' << report.selected_gen_bleu
     << ',' << report.selected_recon_bleu << '\n';
  ss << "unselected," << report.n_unselected << ',' << report.unselected_gen_bleu
     << ',' << report.unselected_recon_bleu << '\n';
  return ss.str();
}

namespace {

// Regularized incomplete beta via continued fraction (Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 200;
  constexpr double kEps = 3e-14, kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double incbeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
              a * std::log(x) + b * std::log(1.0 - x);
  double front = std::exp(ln);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double paired_ttest_pvalue(const std::vector<double>& a,
                           const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw DataError("paired t-test: need two aligned samples of size >= 2");
  }
  const size_t n = a.size();
  double mean = 0;
  for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double var = 0;
  for (size_t i = 0; i < n; ++i) {
    double d = a[i] - b[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);
  if (var == 0.0) return mean == 0.0 ? 1.0 : 0.0;
  double t = mean / std::sqrt(var / static_cast<double>(n));
  double df = static_cast<double>(n - 1);
  return incbeta(df / 2.0, 0.5, df / (df + t * t));
}

}  // namespace sda
