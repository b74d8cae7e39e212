#pragma once

// Brute-force reference implementations of every text and rank metric, kept
// deliberately naive (nested loops, exact enumeration, no shared code with
// src/). Tests compare the production implementations against these.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace metric_oracle {

using Tokens = std::vector<std::string>;

inline std::map<Tokens, int> ngram_counts(const Tokens& s, int n) {
  std::map<Tokens, int> out;
  if (static_cast<int>(s.size()) < n) return out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= s.size(); ++i)
    out[Tokens(s.begin() + static_cast<std::ptrdiff_t>(i),
               s.begin() + static_cast<std::ptrdiff_t>(i) + n)]++;
  return out;
}

// Clipped n-gram matches of one candidate against the max reference count.
inline int clipped_matches(const Tokens& cand, const std::vector<Tokens>& refs, int n) {
  const auto cc = ngram_counts(cand, n);
  int total = 0;
  for (const auto& [gram, count] : cc) {
    int best_ref = 0;
    for (const auto& ref : refs) {
      const auto rc = ngram_counts(ref, n);
      const auto it = rc.find(gram);
      if (it != rc.end()) best_ref = std::max(best_ref, it->second);
    }
    total += std::min(count, best_ref);
  }
  return total;
}

inline int ngram_total(const Tokens& cand, int n) {
  return std::max(0, static_cast<int>(cand.size()) - n + 1);
}

// Closest reference length; ties go to the shorter reference.
inline int closest_ref_len(const Tokens& cand, const std::vector<Tokens>& refs) {
  int best = static_cast<int>(refs.front().size());
  for (const auto& ref : refs) {
    const int len = static_cast<int>(ref.size());
    const int c = static_cast<int>(cand.size());
    if (std::abs(len - c) < std::abs(best - c) ||
        (std::abs(len - c) == std::abs(best - c) && len < best))
      best = len;
  }
  return best;
}

inline double brevity_penalty(int cand_len, int ref_len) {
  if (cand_len == 0) return 0.0;
  if (cand_len > ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / cand_len);
}

// Sentence BLEU-n with add-one smoothing on orders above 1.
inline double bleu_sentence(const Tokens& cand, const std::vector<Tokens>& refs, int n) {
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const int match = clipped_matches(cand, refs, k);
    const int total = ngram_total(cand, k);
    double p;
    if (k == 1)
      p = total == 0 ? 0.0 : static_cast<double>(match) / total;
    else
      p = static_cast<double>(match + 1) / (total + 1);
    if (p == 0.0) return 0.0;
    log_sum += std::log(p) / n;
  }
  return brevity_penalty(static_cast<int>(cand.size()), closest_ref_len(cand, refs)) *
         std::exp(log_sum);
}

// Corpus BLEU-n: pooled counts, no smoothing, zero precision zeroes the score.
inline double bleu_corpus(const std::vector<Tokens>& cands,
                          const std::vector<std::vector<Tokens>>& refs, int n) {
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    long match = 0, total = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      match += clipped_matches(cands[i], refs[i], k);
      total += ngram_total(cands[i], k);
    }
    if (match == 0 || total == 0) return 0.0;
    log_sum += std::log(static_cast<double>(match) / static_cast<double>(total)) / n;
  }
  long cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    cand_len += static_cast<long>(cands[i].size());
    ref_len += closest_ref_len(cands[i], refs[i]);
  }
  return brevity_penalty(static_cast<int>(cand_len), static_cast<int>(ref_len)) *
         std::exp(log_sum);
}

inline int lcs_length(const Tokens& a, const Tokens& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                      : std::max(dp[i - 1][j], dp[i][j - 1]);
  return dp[n][m];
}

inline double rouge_l(const Tokens& cand, const std::vector<Tokens>& refs,
                      double beta = 1.2) {
  double best = 0.0;
  for (const auto& ref : refs) {
    const int l = lcs_length(cand, ref);
    if (l == 0) continue;
    const double p = static_cast<double>(l) / static_cast<double>(cand.size());
    const double r = static_cast<double>(l) / static_cast<double>(ref.size());
    const double b2 = beta * beta;
    best = std::max(best, (1.0 + b2) * p * r / (r + b2 * p));
  }
  return best;
}

// Exact-match METEOR: leftmost greedy alignment, harmonic F weighted 9:1
// towards recall, cubic fragmentation penalty.
inline double meteor_exact(const Tokens& cand, const std::vector<Tokens>& refs) {
  double best = 0.0;
  for (const auto& ref : refs) {
    std::vector<int> align(cand.size(), -1);
    std::vector<bool> used(ref.size(), false);
    int m = 0;
    for (std::size_t i = 0; i < cand.size(); ++i)
      for (std::size_t j = 0; j < ref.size(); ++j)
        if (!used[j] && cand[i] == ref[j]) {
          align[i] = static_cast<int>(j);
          used[j] = true;
          ++m;
          break;
        }
    if (m == 0) continue;
    int chunks = 0;
    int prev_i = -2, prev_j = -2;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (align[i] < 0) continue;
      if (static_cast<int>(i) != prev_i + 1 || align[i] != prev_j + 1) ++chunks;
      prev_i = static_cast<int>(i);
      prev_j = align[i];
    }
    const double p = static_cast<double>(m) / static_cast<double>(cand.size());
    const double r = static_cast<double>(m) / static_cast<double>(ref.size());
    const double f = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(chunks) / m;
    best = std::max(best, f * (1.0 - 0.5 * frag * frag * frag));
  }
  return best;
}

// CIDEr with count clipping and idf over the reference corpus, score x10.
inline std::vector<double> cider(const std::vector<Tokens>& cands,
                                 const std::vector<std::vector<Tokens>>& refs,
                                 int n_max = 4) {
  if (cands.size() < 2) throw std::invalid_argument("cider oracle: corpus too small");
  const auto N = static_cast<double>(cands.size());
  std::vector<double> scores(cands.size(), 0.0);
  for (int n = 1; n <= n_max; ++n) {
    // Document frequency: number of instances whose reference set has the gram.
    std::map<Tokens, int> df;
    for (const auto& ref_set : refs) {
      std::map<Tokens, bool> seen;
      for (const auto& ref : ref_set)
        for (const auto& [gram, count] : ngram_counts(ref, n)) seen[gram] = true;
      for (const auto& [gram, present] : seen)
        if (present) df[gram]++;
    }
    auto idf = [&](const Tokens& gram) {
      const auto it = df.find(gram);
      const int d = it == df.end() ? 0 : it->second;
      return std::log(N / std::max(d, 1));
    };
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const auto cc = ngram_counts(cands[i], n);
      double pair_sim = 0.0;
      for (const auto& ref : refs[i]) {
        const auto rc = ngram_counts(ref, n);
        double dot = 0.0, cnorm = 0.0, rnorm = 0.0;
        for (const auto& [gram, count] : cc) {
          const double w = idf(gram);
          const auto it = rc.find(gram);
          const double cv = count * w;
          const double rv = it == rc.end() ? 0.0 : it->second * w;
          dot += std::min(cv, rv) * rv;
          cnorm += cv * cv;
        }
        for (const auto& [gram, count] : rc) {
          const double rv = count * idf(gram);
          rnorm += rv * rv;
        }
        if (cnorm > 0.0 && rnorm > 0.0)
          pair_sim += dot / (std::sqrt(cnorm) * std::sqrt(rnorm));
      }
      scores[i] += pair_sim / static_cast<double>(refs[i].size()) / n_max * 10.0;
    }
  }
  return scores;
}

// Spearman rho by the direct definition: average ranks, then Pearson.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> ranks(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    int less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (x[j] < x[i]) ++less;
      if (x[j] == x[i]) ++equal;
    }
    ranks[i] = less + (equal + 1) / 2.0;
  }
  return ranks;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  if (vx == 0.0 || vy == 0.0) return 0.0;
  return cov / std::sqrt(vx * vy);
}

// Friedman chi-square over a k-models x N-conditions score matrix, ranking
// high scores best (rank 1) with average ties, plus the Nemenyi CD.
struct FriedmanOracle {
  std::vector<double> mean_ranks;
  double chi2;
  double cd;
};

inline FriedmanOracle friedman_nemenyi(const std::vector<std::vector<double>>& scores,
                                       double q_alpha) {
  const std::size_t k = scores.size();
  const std::size_t N = scores.front().size();
  std::vector<double> mean_ranks(k, 0.0);
  for (std::size_t c = 0; c < N; ++c) {
    std::vector<double> col(k);
    for (std::size_t m = 0; m < k; ++m) col[m] = scores[m][c];
    // Rank descending: negate and reuse the ascending average-rank helper.
    std::vector<double> neg(k);
    for (std::size_t m = 0; m < k; ++m) neg[m] = -col[m];
    const auto ranks = average_ranks(neg);
    for (std::size_t m = 0; m < k; ++m) mean_ranks[m] += ranks[m] / static_cast<double>(N);
  }
  double sum_sq = 0.0;
  for (double r : mean_ranks) sum_sq += r * r;
  const auto kd = static_cast<double>(k);
  const auto Nd = static_cast<double>(N);
  const double chi2 =
      12.0 * Nd / (kd * (kd + 1.0)) * (sum_sq - kd * (kd + 1.0) * (kd + 1.0) / 4.0);
  const double cd = q_alpha * std::sqrt(kd * (kd + 1.0) / (6.0 * Nd));
  return {mean_ranks, chi2, cd};
}

}  // namespace metric_oracle
