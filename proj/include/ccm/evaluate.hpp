#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccm/metrics.hpp"
#include "ccm/model.hpp"
#include "ccm/toyvqa.hpp"

namespace ccm {

inline constexpr int kMaxDecodeLen = 12;

// Inference output for one instance. The decoder is conditioned on the
// model's own predicted answer, not the ground truth.
struct Inference {
  int predicted = 0;
  std::vector<int> explanation;  // greedy tokens, end token stripped
  std::vector<double> alpha;
};

// Runs encode, attention, answer prediction and greedy decoding on one bound
// model. Rewindable: records only onto the caller's tape.
Inference infer_instance(ad::Tape& tape, const CcmModel::Bound& bound,
                         const EncodedInstance& inst, int max_len = kMaxDecodeLen);

// Renders id sequences to words for scoring, dropping end tokens. An empty
// hypothesis becomes a single unknown token so corpus metrics stay defined.
EvalPair scoring_pair(std::span<const int> hyp, std::span<const int> ref,
                      const TokenTable& table);

struct MetricRow {
  std::string metric;
  double score = 0.0;
};

struct RankRow {
  int id = 0;
  double rho = 0.0;
  bool degenerate = false;
};

// Attention ranks use Spearman by default; Kendall tau-b is the flag-selected
// alternative.
enum class RankMethod { kSpearman, kKendall };

struct EvalReport {
  std::vector<MetricRow> metrics;  // bleu1..4, meteor, rouge_l, cider, accuracy, <rank>_mean
  std::vector<RankRow> ranks;      // one per instance, alpha vs gt attention
  std::vector<std::string> explanations;  // rendered hypothesis per instance
  std::string rank_metric;         // "spearman" or "kendall"
};

// Scores greedy explanations against the references and answers against the
// labels. The model and dataset must share a vocabulary checksum.
EvalReport evaluate_model(const CcmModel& model,
                          const std::vector<EncodedInstance>& data,
                          const Vocabulary& vocab,
                          RankMethod rank_method = RankMethod::kSpearman);

// CSV renderings: header `model,metric,score` under a comment stamping the
// METEOR simplification, then one row per metric plus a literal `spice,n/a`
// row; ranks render as `id,<rank metric>,degenerate`.
std::string metrics_to_csv(const EvalReport& report, std::string_view model_name);
std::string ranks_to_csv(const EvalReport& report);

}  // namespace ccm
