#include "ccm/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>

#include "ccm/lstm.hpp"
#include "ccm/vocab.hpp"

namespace ccm {

namespace {

struct DecoderState {
  ad::Var h;
  ad::Var c;
};

DecoderState decoder_init(ad::Tape& tape, ad::Var g_f, ad::Var g_y,
                          const DecoderVars& p) {
  const int two_h = p.init_proj.shape()[0];
  if (two_h % 2 != 0)
    throw std::invalid_argument("decoder: init projection rows must be even");
  const int hidden = two_h / 2;
  const ad::Var parts[] = {g_f, g_y};
  ad::Var state = tape.matmul(p.init_proj, tape.concat(parts));
  return {tape.slice(state, 0, hidden), tape.slice(state, hidden, two_h)};
}

void require_token(int id, int vocab) {
  if (id < 0 || id >= vocab)
    throw std::out_of_range("decoder: token id " + std::to_string(id) +
                            " outside explanation vocabulary of size " +
                            std::to_string(vocab));
}

double log_prob_of(std::span<const double> logits, int token) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - peak);
  return logits[static_cast<std::size_t>(token)] - peak - std::log(total);
}

}  // namespace

ad::Var predict_answer(ad::Tape& tape, ad::Var g_f, const AnswerHeadVars& p) {
  if (p.hidden.shape()[1] != g_f.shape()[0])
    throw std::invalid_argument("predict_answer: feature length " +
                                std::to_string(g_f.shape()[0]) +
                                " does not match head input width " +
                                std::to_string(p.hidden.shape()[1]));
  return tape.relu(tape.matmul(p.out, tape.relu(tape.matmul(p.hidden, g_f))));
}

ad::Var answer_loss(ad::Tape& tape, ad::Var logits, int label) {
  const int classes = logits.shape()[0];
  if (label < 0 || label >= classes)
    throw std::out_of_range("answer_loss: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(classes) + ")");
  return tape.cross_entropy_logits(logits, label);
}

ad::Var answer_embedding(ad::Tape& tape, ad::Var ans_emb, ad::Var answer_vec) {
  return tape.matmul(ans_emb, answer_vec);
}

TeacherForcedResult decode_explanation_teacher_forced(ad::Tape& tape, ad::Var g_f,
                                                      ad::Var g_y,
                                                      const DecoderVars& p,
                                                      std::span<const int> target) {
  if (target.empty())
    throw std::invalid_argument("decoder: empty target sequence");
  if (target.back() != kEndId)
    throw std::invalid_argument("decoder: target does not end with the <end> token");
  const int vocab = p.word_emb.shape()[0];

  auto [h, c] = decoder_init(tape, g_f, g_y, p);
  ad::Var x = tape.take_row(p.word_emb, kPadId);
  std::vector<ad::Var> losses;
  losses.reserve(target.size());
  for (std::size_t t = 0; t < target.size(); ++t) {
    require_token(target[t], vocab);
    std::tie(h, c) = lstm_step(x, h, c, p.lstm_w, p.lstm_b);
    ad::Var logits = tape.add(tape.matmul(p.out_proj, h), p.out_bias);
    losses.push_back(tape.cross_entropy_logits(logits, target[t]));
    if (t + 1 < target.size()) x = tape.take_row(p.word_emb, target[t]);
  }
  return {tape.mean(tape.concat(losses)), h};
}

DecodeResult decode_explanation_greedy(ad::Tape& tape, ad::Var g_f, ad::Var g_y,
                                       const DecoderVars& p, int max_len) {
  if (max_len < 1)
    throw std::invalid_argument("decoder: max_len must be at least 1");

  auto [h, c] = decoder_init(tape, g_f, g_y, p);
  ad::Var x = tape.take_row(p.word_emb, kPadId);
  DecodeResult result;
  for (int step = 0; step < max_len; ++step) {
    std::tie(h, c) = lstm_step(x, h, c, p.lstm_w, p.lstm_b);
    ad::Var logits = tape.add(tape.matmul(p.out_proj, h), p.out_bias);
    const auto vals = logits.values();
    const int token = static_cast<int>(
        std::max_element(vals.begin(), vals.end()) - vals.begin());
    result.tokens.push_back(token);
    result.log_probs.push_back(log_prob_of(vals, token));
    if (token == kEndId) {
      result.terminated = true;
      break;
    }
    x = tape.take_row(p.word_emb, token);
  }
  return result;
}

}  // namespace ccm
