#include "ccm/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>

#include <boost/math/distributions/chi_squared.hpp>

namespace ccm {

namespace {

void require_pair(const EvalPair& pair, const char* who) {
  if (pair.candidate.empty())
    throw std::invalid_argument(std::string(who) + ": empty candidate");
  if (pair.references.empty())
    throw std::invalid_argument(std::string(who) + ": no references");
  for (const Tokens& ref : pair.references)
    if (ref.empty()) throw std::invalid_argument(std::string(who) + ": empty reference");
}

// N-grams are keyed by their tokens joined with an unprintable separator;
// tokens never contain whitespace or control characters after tokenize().
using GramCounts = std::unordered_map<std::string, int>;

GramCounts gram_counts(const Tokens& s, int n) {
  GramCounts out;
  const int len = static_cast<int>(s.size());
  for (int i = 0; i + n <= len; ++i) {
    std::string key = s[static_cast<std::size_t>(i)];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += s[static_cast<std::size_t>(i + j)];
    }
    ++out[key];
  }
  return out;
}

// Per-gram maximum count over all references.
GramCounts max_ref_counts(const std::vector<Tokens>& refs, int n) {
  GramCounts out;
  for (const Tokens& ref : refs)
    for (const auto& [gram, count] : gram_counts(ref, n)) {
      auto [it, fresh] = out.try_emplace(gram, count);
      if (!fresh) it->second = std::max(it->second, count);
    }
  return out;
}

struct PrecisionCounts {
  int64_t matched = 0;
  int64_t total = 0;
};

PrecisionCounts clipped_precision(const Tokens& cand, const std::vector<Tokens>& refs,
                                  int n) {
  const GramCounts cc = gram_counts(cand, n);
  const GramCounts rc = max_ref_counts(refs, n);
  PrecisionCounts pc;
  for (const auto& [gram, count] : cc) {
    pc.total += count;
    const auto it = rc.find(gram);
    if (it != rc.end()) pc.matched += std::min(count, it->second);
  }
  return pc;
}

int closest_ref_len(const Tokens& cand, const std::vector<Tokens>& refs) {
  const int c = static_cast<int>(cand.size());
  int best = static_cast<int>(refs.front().size());
  for (const Tokens& ref : refs) {
    const int len = static_cast<int>(ref.size());
    const int d = std::abs(len - c);
    const int bd = std::abs(best - c);
    if (d < bd || (d == bd && len < best)) best = len;
  }
  return best;
}

double brevity_penalty(int64_t cand_len, int64_t ref_len) {
  if (cand_len == 0) return 0.0;
  if (cand_len > ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
}

void require_order(int n, const char* who) {
  if (n < 1 || n > 4)
    throw std::invalid_argument(std::string(who) + ": order must be in [1, 4]");
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  auto flush = [&] {
    while (!current.empty()) {
      const char c = current.back();
      if (c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':')
        current.pop_back();
      else
        break;
    }
    if (!current.empty()) out.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  flush();
  return out;
}

double bleu_sentence(const EvalPair& pair, int n) {
  require_pair(pair, "bleu_sentence");
  require_order(n, "bleu_sentence");
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const PrecisionCounts pc = clipped_precision(pair.candidate, pair.references, k);
    double p;
    if (k == 1)
      p = pc.total == 0 ? 0.0 : static_cast<double>(pc.matched) / static_cast<double>(pc.total);
    else
      p = static_cast<double>(pc.matched + 1) / static_cast<double>(pc.total + 1);
    if (p == 0.0) return 0.0;
    log_sum += std::log(p) / n;
  }
  const int64_t cand_len = static_cast<int64_t>(pair.candidate.size());
  return brevity_penalty(cand_len, closest_ref_len(pair.candidate, pair.references)) *
         std::exp(log_sum);
}

double bleu_corpus(const std::vector<EvalPair>& corpus, int n) {
  if (corpus.empty()) throw std::invalid_argument("bleu_corpus: empty corpus");
  require_order(n, "bleu_corpus");
  for (const EvalPair& pair : corpus) require_pair(pair, "bleu_corpus");

  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    PrecisionCounts pooled;
    for (const EvalPair& pair : corpus) {
      const PrecisionCounts pc = clipped_precision(pair.candidate, pair.references, k);
      pooled.matched += pc.matched;
      pooled.total += pc.total;
    }
    if (pooled.matched == 0 || pooled.total == 0) return 0.0;
    log_sum += std::log(static_cast<double>(pooled.matched) /
                        static_cast<double>(pooled.total)) / n;
  }
  int64_t cand_len = 0, ref_len = 0;
  for (const EvalPair& pair : corpus) {
    cand_len += static_cast<int64_t>(pair.candidate.size());
    ref_len += closest_ref_len(pair.candidate, pair.references);
  }
  return brevity_penalty(cand_len, ref_len) * std::exp(log_sum);
}

double rouge_l(const EvalPair& pair, double beta) {
  require_pair(pair, "rouge_l");
  if (beta <= 0.0) throw std::invalid_argument("rouge_l: beta must be positive");
  const Tokens& cand = pair.candidate;
  double best = 0.0;
  std::vector<int> prev, curr;
  for (const Tokens& ref : pair.references) {
    // Rolling two-row LCS table.
    prev.assign(ref.size() + 1, 0);
    curr.assign(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= cand.size(); ++i) {
      for (std::size_t j = 1; j <= ref.size(); ++j) {
        curr[j] = cand[i - 1] == ref[j - 1] ? prev[j - 1] + 1
                                            : std::max(prev[j], curr[j - 1]);
      }
      std::swap(prev, curr);
      std::fill(curr.begin(), curr.end(), 0);
    }
    const int lcs = prev[ref.size()];
    if (lcs == 0) continue;
    const double p = static_cast<double>(lcs) / static_cast<double>(cand.size());
    const double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
    const double b2 = beta * beta;
    best = std::max(best, (1.0 + b2) * p * r / (r + b2 * p));
  }
  return best;
}

double meteor_exact(const EvalPair& pair) {
  require_pair(pair, "meteor_exact");
  const Tokens& cand = pair.candidate;
  double best = 0.0;
  for (const Tokens& ref : pair.references) {
    std::vector<bool> used(ref.size(), false);
    std::vector<int> align(cand.size(), -1);
    int matches = 0;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (used[j] || cand[i] != ref[j]) continue;
        align[i] = static_cast<int>(j);
        used[j] = true;
        ++matches;
        break;
      }
    }
    if (matches == 0) continue;
    int chunks = 0, prev_i = -2, prev_j = -2;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (align[i] < 0) continue;
      if (static_cast<int>(i) != prev_i + 1 || align[i] != prev_j + 1) ++chunks;
      prev_i = static_cast<int>(i);
      prev_j = align[i];
    }
    const double p = static_cast<double>(matches) / static_cast<double>(cand.size());
    const double r = static_cast<double>(matches) / static_cast<double>(ref.size());
    const double f = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(chunks) / static_cast<double>(matches);
    best = std::max(best, f * (1.0 - 0.5 * frag * frag * frag));
  }
  return best;
}

CiderResult cider(const std::vector<EvalPair>& corpus, int n_max) {
  if (corpus.size() < 2)
    throw std::invalid_argument(
        "cider: idf needs a corpus of at least 2 pairs; use sentence-level metrics "
        "for single pairs");
  require_order(n_max, "cider");
  for (const EvalPair& pair : corpus) require_pair(pair, "cider");

  CiderResult result;
  result.scores.assign(corpus.size(), 0.0);
  const double n_docs = static_cast<double>(corpus.size());

  for (int n = 1; n <= n_max; ++n) {
    // Document frequency over reference sets.
    GramCounts df;
    for (const EvalPair& pair : corpus) {
      GramCounts seen;
      for (const Tokens& ref : pair.references)
        for (const auto& [gram, count] : gram_counts(ref, n)) seen.try_emplace(gram, 1);
      for (const auto& [gram, one] : seen) df[gram] += one;
    }
    auto idf = [&](const std::string& gram) {
      const auto it = df.find(gram);
      return std::log(n_docs / std::max(it == df.end() ? 0 : it->second, 1));
    };

    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const GramCounts cc = gram_counts(corpus[i].candidate, n);
      double cnorm_sq = 0.0;
      for (const auto& [gram, count] : cc) {
        const double v = count * idf(gram);
        cnorm_sq += v * v;
      }
      double sim_sum = 0.0;
      for (const Tokens& ref : corpus[i].references) {
        const GramCounts rc = gram_counts(ref, n);
        double rnorm_sq = 0.0, dot = 0.0;
        for (const auto& [gram, count] : rc) {
          const double w = idf(gram);
          const double rv = count * w;
          rnorm_sq += rv * rv;
          const auto it = cc.find(gram);
          if (it != cc.end()) dot += std::min(it->second * w, rv) * rv;
        }
        if (cnorm_sq > 0.0 && rnorm_sq > 0.0)
          sim_sum += dot / (std::sqrt(cnorm_sq) * std::sqrt(rnorm_sq));
      }
      result.scores[i] += sim_sum / static_cast<double>(corpus[i].references.size()) /
                          n_max * 10.0;
    }
  }
  for (double s : result.scores) result.mean += s / n_docs;
  return result;
}

SpearmanResult spearman_rank(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("spearman_rank: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman_rank: need at least 2 points");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
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
  if (vx == 0.0 || vy == 0.0) return {0.0, true};
  return {cov / std::sqrt(vx * vy), false};
}

KendallResult kendall_rank(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("kendall_rank: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("kendall_rank: need at least 2 points");
  const std::size_t n = x.size();
  double concordant = 0.0, discordant = 0.0, ties_x = 0.0, ties_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) {
        ties_x += 1.0;
        ties_y += 1.0;
      } else if (dx == 0.0) {
        ties_x += 1.0;
      } else if (dy == 0.0) {
        ties_y += 1.0;
      } else if (dx * dy > 0.0) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double den_x = pairs - ties_x;
  const double den_y = pairs - ties_y;
  if (den_x == 0.0 || den_y == 0.0) return {0.0, true};
  return {(concordant - discordant) / std::sqrt(den_x * den_y), false};
}

double nemenyi_q(int k, double alpha) {
  // Studentized-range q / sqrt(2) constants for the Nemenyi test, models
  // k = 2..10, two significance levels.
  static constexpr double kQ05[] = {1.960, 2.343, 2.569, 2.728, 2.850,
                                    2.949, 3.031, 3.102, 3.164};
  static constexpr double kQ10[] = {1.645, 2.052, 2.291, 2.459, 2.589,
                                    2.693, 2.780, 2.855, 2.920};
  if (k < 2 || k > 10)
    throw std::invalid_argument("nemenyi_q: k must be in [2, 10]");
  if (alpha == 0.05) return kQ05[k - 2];
  if (alpha == 0.10) return kQ10[k - 2];
  throw std::invalid_argument("nemenyi_q: alpha must be 0.05 or 0.10");
}

FriedmanResult friedman_nemenyi(const std::vector<std::vector<double>>& scores,
                                double alpha) {
  const std::size_t k = scores.size();
  if (k < 2) throw std::invalid_argument("friedman_nemenyi: need at least 2 models");
  const std::size_t n_cond = scores.front().size();
  if (n_cond < 2)
    throw std::invalid_argument("friedman_nemenyi: need at least 2 conditions");
  for (const auto& row : scores)
    if (row.size() != n_cond)
      throw std::invalid_argument("friedman_nemenyi: ragged score matrix");

  FriedmanResult result;
  result.mean_ranks.assign(k, 0.0);
  std::vector<double> column(k);
  for (std::size_t c = 0; c < n_cond; ++c) {
    // Negate so that the ascending rank helper gives rank 1 to the best score.
    for (std::size_t m = 0; m < k; ++m) column[m] = -scores[m][c];
    const std::vector<double> ranks = average_ranks(column);
    for (std::size_t m = 0; m < k; ++m)
      result.mean_ranks[m] += ranks[m] / static_cast<double>(n_cond);
  }

  double sum_sq = 0.0;
  for (double r : result.mean_ranks) sum_sq += r * r;
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n_cond);
  result.chi2 = 12.0 * nd / (kd * (kd + 1.0)) *
                (sum_sq - kd * (kd + 1.0) * (kd + 1.0) / 4.0);
  // Rank averaging can push the statistic a hair below zero on all-tied data.
  result.chi2 = std::max(result.chi2, 0.0);
  const boost::math::chi_squared dist(kd - 1.0);
  result.p_value = 1.0 - boost::math::cdf(dist, result.chi2);
  result.cd = nemenyi_q(static_cast<int>(k), alpha) *
              std::sqrt(kd * (kd + 1.0) / (6.0 * nd));
  return result;
}

}  // namespace ccm
