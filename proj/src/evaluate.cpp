#include "ccm/evaluate.hpp"

#include <algorithm>
#include <stdexcept>

#include "ccm/metrics.hpp"
#include "ccm/textio.hpp"

namespace ccm {

namespace {

Tokens render(std::span<const int> ids, const TokenTable& table) {
  Tokens out;
  out.reserve(ids.size());
  for (int id : ids)
    if (id != kEndId) out.push_back(table.token_of(id));
  return out;
}

std::string join(const Tokens& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

}  // namespace

EvalPair scoring_pair(std::span<const int> hyp, std::span<const int> ref,
                      const TokenTable& table) {
  EvalPair pair{render(hyp, table), {render(ref, table)}};
  if (pair.candidate.empty()) pair.candidate.push_back(table.token_of(kUnkId));
  return pair;
}

Inference infer_instance(ad::Tape& tape, const CcmModel::Bound& bound,
                         const EncodedInstance& inst, int max_len) {
  Inference out;
  ad::Var g_q = encode_question(tape, inst.question, bound.enc);
  const auto att = attention_fuse(tape, tape.leaf(inst.features), g_q, bound.enc);
  out.alpha.assign(att.alpha.values().begin(), att.alpha.values().end());

  ad::Var logits = predict_answer(tape, att.fused, bound.head);
  const auto lv = logits.values();
  out.predicted = static_cast<int>(std::max_element(lv.begin(), lv.end()) - lv.begin());

  std::vector<double> onehot(lv.size(), 0.0);
  onehot[static_cast<std::size_t>(out.predicted)] = 1.0;
  ad::Var g_y = answer_embedding(tape, bound.dec.ans_emb,
                                 tape.leaf({static_cast<int>(lv.size())}, onehot));
  const auto dec = decode_explanation_greedy(tape, att.fused, g_y, bound.dec, max_len);
  for (int t : dec.tokens)
    if (t != kEndId) out.explanation.push_back(t);
  return out;
}

EvalReport evaluate_model(const CcmModel& model,
                          const std::vector<EncodedInstance>& data,
                          const Vocabulary& vocab, RankMethod rank_method) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (model.vocab_checksum() != vocab.checksum())
    throw std::invalid_argument(
        "evaluate: model was trained with vocabulary checksum " +
        std::to_string(model.vocab_checksum()) + " but the dataset has " +
        std::to_string(vocab.checksum()));

  EvalReport report;
  report.rank_metric = rank_method == RankMethod::kKendall ? "kendall" : "spearman";
  std::vector<EvalPair> pairs;
  pairs.reserve(data.size());
  int correct = 0;
  double rho_sum = 0.0;

  ad::Tape tape;
  const auto bound = model.bind(tape, false, false);
  const auto base = tape.mark();
  for (const auto& inst : data) {
    tape.rewind(base);
    const Inference inf = infer_instance(tape, bound, inst);
    if (inf.predicted == inst.answer) ++correct;

    pairs.push_back(scoring_pair(inf.explanation, inst.explanation, vocab.explanation));
    report.explanations.push_back(join(render(inf.explanation, vocab.explanation)));

    RankRow row{inst.id, 0.0, false};
    if (rank_method == RankMethod::kKendall) {
      const auto kt = kendall_rank(inf.alpha, inst.gt_attention);
      row.rho = kt.tau;
      row.degenerate = kt.degenerate;
    } else {
      const auto sp = spearman_rank(inf.alpha, inst.gt_attention);
      row.rho = sp.rho;
      row.degenerate = sp.degenerate;
    }
    report.ranks.push_back(row);
    rho_sum += row.rho;
  }

  for (int n = 1; n <= 4; ++n)
    report.metrics.push_back({"bleu" + std::to_string(n), bleu_corpus(pairs, n)});
  double meteor_sum = 0.0, rouge_sum = 0.0;
  for (const auto& p : pairs) {
    meteor_sum += meteor_exact(p);
    rouge_sum += rouge_l(p);
  }
  const double n_inst = static_cast<double>(data.size());
  report.metrics.push_back({"meteor", meteor_sum / n_inst});
  report.metrics.push_back({"rouge_l", rouge_sum / n_inst});
  report.metrics.push_back(
      {"cider", pairs.size() >= 2 ? cider(pairs).mean : 0.0});
  report.metrics.push_back({"accuracy", correct / n_inst});
  report.metrics.push_back({report.rank_metric + "_mean", rho_sum / n_inst});
  return report;
}

std::string metrics_to_csv(const EvalReport& report, std::string_view model_name) {
  std::string out = "# meteor is exact-match only (no stem or synonym stages)\n";
  out += "model,metric,score\n";
  for (const auto& row : report.metrics) {
    out += model_name;
    out += ',';
    out += row.metric;
    out += ',';
    out += format_csv_number(row.score);
    out += '\n';
  }
  out += model_name;
  out += ",spice,n/a\n";
  return out;
}

std::string ranks_to_csv(const EvalReport& report) {
  std::string out = "id," +
      (report.rank_metric.empty() ? std::string("spearman") : report.rank_metric) +
      ",degenerate\n";
  for (const auto& row : report.ranks) {
    out += std::to_string(row.id);
    out += ',';
    out += format_csv_number(row.rho);
    out += ',';
    out += row.degenerate ? '1' : '0';
    out += '\n';
  }
  return out;
}

}  // namespace ccm
