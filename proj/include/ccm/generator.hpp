#pragma once

#include <span>
#include <vector>

#include "ccm/tape.hpp"

namespace ccm {

// Two-layer ReLU answer head: logits = relu(out * relu(hidden * g_f)).
struct AnswerHeadVars {
  ad::Var hidden;  // [L1, P]
  ad::Var out;     // [V_a, L1]
};

// Answer-conditioned explanation decoder. The answer vector (one-hot ground
// truth or predicted softmax) is embedded through ans_emb, concatenated with
// the attended feature, and projected to the initial hidden and cell states.
// Decoding starts from the <pad> token and stops at <end>.
struct DecoderVars {
  ad::Var word_emb;   // [V_e, E]
  ad::Var ans_emb;    // [B, V_a]
  ad::Var init_proj;  // [2H, P+B]
  ad::Var lstm_w;     // [4H, E+H]
  ad::Var lstm_b;     // [4H]
  ad::Var out_proj;   // [V_e, H]
  ad::Var out_bias;   // [V_e]
};

struct TeacherForcedResult {
  ad::Var loss;          // scalar mean per-token cross-entropy
  ad::Var final_hidden;  // [H] decoder state after the last step
};

struct DecodeResult {
  std::vector<int> tokens;        // includes <end> when emitted
  std::vector<double> log_probs;  // log-probability of each emitted token
  bool terminated = false;        // true when <end> was produced
};

ad::Var predict_answer(ad::Tape& tape, ad::Var g_f, const AnswerHeadVars& p);

// Cross-entropy of the answer logits against the labelled class.
ad::Var answer_loss(ad::Tape& tape, ad::Var logits, int label);

// Embeds an answer distribution or one-hot vector [V_a] into the decoder
// conditioning space [B].
ad::Var answer_embedding(ad::Tape& tape, ad::Var ans_emb, ad::Var answer_vec);

// Runs the decoder with teacher forcing over `target` (which must end with
// the <end> token) and returns the mean per-token cross-entropy plus the
// final hidden state.
TeacherForcedResult decode_explanation_teacher_forced(ad::Tape& tape, ad::Var g_f,
                                                      ad::Var g_y,
                                                      const DecoderVars& p,
                                                      std::span<const int> target);

// Greedy argmax decoding, ties broken by lowest token id.
DecodeResult decode_explanation_greedy(ad::Tape& tape, ad::Var g_f, ad::Var g_y,
                                       const DecoderVars& p, int max_len);

}  // namespace ccm
