#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace sda {

using TokenSeq = std::vector<std::string>;

// Word vectors loaded from a text file, one "word v1 ... vd" per line.
// Out-of-vocabulary words fall back to the zero vector.
class EmbeddingTable {
 public:
  static EmbeddingTable load(const std::filesystem::path& path);
  static EmbeddingTable from_entries(
      const std::vector<std::pair<std::string, Eigen::VectorXd>>& entries);

  int dim() const { return dim_; }
  bool contains(const std::string& word) const { return table_.count(word) > 0; }
  // Zero vector for unknown words.
  Eigen::VectorXd lookup(const std::string& word) const;

 private:
  int dim_ = 0;
  std::unordered_map<std::string, Eigen::VectorXd> table_;
};

// Unique n-grams across all hypotheses divided by the total n-gram count.
double distinct_n(const std::vector<TokenSeq>& hypotheses, int n);

// Corpus-level BLEU with brevity penalty, uniform weights over orders 1..n
// and add-epsilon smoothing (0.1) for zero counts at orders >= 2.
double bleu_n(const std::vector<TokenSeq>& hypotheses,
              const std::vector<TokenSeq>& references, int n);

double sentence_bleu(const TokenSeq& hypothesis, const TokenSeq& reference,
                     int n);

// Cosine of the mean in-table word vectors.
double emb_average(const TokenSeq& hyp, const TokenSeq& ref,
                   const EmbeddingTable& table);
// Per-dimension value of largest magnitude (positive wins ties), then cosine.
double emb_extrema(const TokenSeq& hyp, const TokenSeq& ref,
                   const EmbeddingTable& table);
// Mean best-match cosine per token, averaged over both directions.
double emb_greedy(const TokenSeq& hyp, const TokenSeq& ref,
                  const EmbeddingTable& table);

struct MetricsReport {
  double dist_1 = 0, dist_2 = 0, dist_3 = 0;
  double bleu_1 = 0, bleu_2 = 0, bleu_3 = 0, bleu_4 = 0;
  double emb_average = 0, emb_extrema = 0, emb_greedy = 0;
  long n_samples = 0;
};

MetricsReport evaluate_responses(const std::vector<TokenSeq>& hypotheses,
                                 const std::vector<TokenSeq>& references,
                                 const EmbeddingTable& table);

void write_report_json(const MetricsReport& report,
                       const std::string& config_hash,
                       const std::filesystem::path& path);

struct DiagnosticReport {
  double selected_gen_bleu = 0, unselected_gen_bleu = 0;
  double selected_recon_bleu = 0, unselected_recon_bleu = 0;
  size_t n_selected = 0, n_unselected = 0;
};

// Mean generation-BLEU and reconstruction-BLEU for the selected vs
// unselected partitions; both partitions must be non-empty.
DiagnosticReport selected_vs_unselected_report(
    const std::map<std::string, double>& gen_bleu_by_id,
    const std::map<std::string, double>& recon_bleu_by_id,
    const std::set<std::string>& selected_ids);

// CSV rows: partition,n,gen_bleu,recon_bleu (selected row first).
std::string diagnostic_csv(const DiagnosticReport& report);

// Two-tailed paired t-test; returns the p-value. Utility, not a gate.
double paired_ttest_pvalue(const std::vector<double>& a,
                           const std::vector<double>& b);

}  // namespace sda
