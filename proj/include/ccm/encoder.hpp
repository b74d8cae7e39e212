#pragma once

#include <span>

#include "ccm/tape.hpp"

namespace ccm {

// Tape variables for the question encoder and the attention fusion graph.
// One struct serves training and frozen evaluation; whether gradients flow
// is decided by how the variables were bound.
struct EncoderVars {
  ad::Var word_emb;      // [V_q, E]  question word embeddings
  ad::Var lstm_w;        // [4H, E+H] packed question LSTM gates
  ad::Var lstm_b;        // [4H]
  ad::Var img_proj;      // [P, C]    per-region feature projection
  ad::Var q_proj;        // [P, H]    question projection
  ad::Var att_hidden;    // [A, P]    attention hidden layer
  ad::Var att_hidden_b;  // [A]
  ad::Var att_score;     // [A]       attention scoring vector
};

struct AttentionOutput {
  ad::Var fused;  // [P] attended feature
  ad::Var alpha;  // [N] region weights, nonnegative, summing to 1
};

// Embeds the token sequence and runs the question LSTM from a zero state,
// returning the final hidden state [H].
ad::Var encode_question(ad::Tape& tape, std::span<const int> tokens,
                        const EncoderVars& p);

// Fuses a region feature grid `features` [N, C] with an encoded question
// g_q [H]. Each region is projected, gated against the projected question,
// scored through the attention layers, and pooled by the softmax weights:
//
//   q    = q_proj * g_q
//   v_j  = img_proj * features[j]
//   f_j  = tanh(v_j . q)
//   s_j  = att_score * sigmoid(att_hidden * l2norm(signed_sqrt(f_j)) + b)
//   alpha = softmax(s), fused = (sum_j alpha_j v_j) . q
AttentionOutput attention_fuse(ad::Tape& tape, ad::Var features, ad::Var g_q,
                               const EncoderVars& p);

}  // namespace ccm
