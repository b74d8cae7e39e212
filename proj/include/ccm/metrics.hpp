#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ccm {

using Tokens = std::vector<std::string>;

// Lowercases, splits on whitespace and strips trailing punctuation from each
// token. All text metrics expect their inputs to have gone through this.
Tokens tokenize(std::string_view text);

struct EvalPair {
  Tokens candidate;
  std::vector<Tokens> references;  // 1..R, all nonempty
};

// Sentence BLEU-n: clipped modified precisions with add-one smoothing on
// orders above 1, brevity penalty against the closest reference length.
double bleu_sentence(const EvalPair& pair, int n);

// Corpus BLEU-n: precisions pooled over all pairs, unsmoothed; any zero
// pooled precision zeroes the score.
double bleu_corpus(const std::vector<EvalPair>& corpus, int n);

// LCS-based F-score, recall-weighted by beta; max over references.
double rouge_l(const EvalPair& pair, double beta = 1.2);

// Exact-match METEOR: leftmost greedy alignment, F = 10PR/(R+9P), cubic
// fragmentation penalty. Stemming and synonym stages are intentionally
// absent, so scores are lower bounds of full METEOR.
double meteor_exact(const EvalPair& pair);

struct CiderResult {
  std::vector<double> scores;  // one per pair, in [0, 10]
  double mean = 0.0;
};

// Clipped tf-idf n-gram cosine averaged over n = 1..n_max, x10. The idf table
// comes from the reference corpus, so at least two pairs are required.
CiderResult cider(const std::vector<EvalPair>& corpus, int n_max = 4);

struct SpearmanResult {
  double rho = 0.0;
  bool degenerate = false;  // a side had zero variance; rho reported as 0
};

// Spearman rank correlation with average-rank tie handling.
SpearmanResult spearman_rank(const std::vector<double>& x, const std::vector<double>& y);

struct KendallResult {
  double tau = 0.0;
  bool degenerate = false;  // a side had zero variance; tau reported as 0
};

// Kendall tau-b with tie correction, selectable in place of Spearman for
// attention ranking.
KendallResult kendall_rank(const std::vector<double>& x, const std::vector<double>& y);

struct FriedmanResult {
  std::vector<double> mean_ranks;  // per model; rank 1 = best (highest score)
  double chi2 = 0.0;
  double p_value = 1.0;
  double cd = 0.0;  // Nemenyi critical difference at the requested alpha
};

// Friedman test over a k-models x N-conditions score matrix plus the Nemenyi
// critical difference. alpha must be 0.05 or 0.10; k in [2, 10].
FriedmanResult friedman_nemenyi(const std::vector<std::vector<double>>& scores,
                                double alpha = 0.05);

// Studentized-range q constant behind the Nemenyi CD.
double nemenyi_q(int k, double alpha);

}  // namespace ccm
