#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccm/tape.hpp"

namespace ccm {

// Model variants. Baseline trains the generator alone; the others add a
// discriminator over answers (CAM), explanations (CEM), both independently
// (AECM), or one joint scorer over the pair (CCM).
enum class Variant { kBaseline, kCam, kCem, kAecm, kCcm };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);  // throws listing valid names

// Discriminator parameter slots. Real answers pass through a one-hot
// embedding and FC stack; real explanations through their own embedding and
// LSTM. Fake sides arrive directly as generator features (answer logits and
// the decoder's final hidden state), so the answer path output dim equals
// V_a and the explanation LSTM hidden equals the decoder hidden.
struct DiscriminatorVars {
  ad::Var ans_emb;      // [l_aw, V_a] one-hot answer embedding
  ad::Var ans_fc;       // [l_a, l_aw]
  ad::Var exp_emb;      // [V_e, E_d]
  ad::Var exp_lstm_w;   // [4H_d, E_d+H_d]
  ad::Var exp_lstm_b;   // [4H_d]
  ad::Var ans_head_proj;   // [l_a, l_a]   answer-only scorer (CAM, AECM)
  ad::Var ans_head_score;  // [l_a]
  ad::Var ans_head_bias;   // [1]
  ad::Var exp_head_proj;   // [H_d, H_d]   explanation-only scorer (CEM, AECM)
  ad::Var exp_head_score;  // [H_d]
  ad::Var exp_head_bias;   // [1]
  ad::Var joint_ans_proj;  // [l_a, l_a]   joint scorer (CCM)
  ad::Var joint_exp_proj;  // [H_d, H_d]
  ad::Var joint_fc;        // [J, l_a+H_d] bias-free
  ad::Var joint_score;     // [J]
  ad::Var joint_bias;      // [1]
};

// g_da = relu(ans_fc * relu(ans_emb * onehot(label))), dim l_a.
ad::Var embed_real_answer(ad::Tape& tape, int label, const DiscriminatorVars& p);

// Final hidden state of the explanation LSTM over embedded tokens, dim H_d.
ad::Var embed_real_explanation(ad::Tape& tape, std::span<const int> tokens,
                               const DiscriminatorVars& p);

// g_dj = joint_fc * tanh(concat(joint_ans_proj * g_da, joint_exp_proj * g_de)).
ad::Var joint_embed(ad::Tape& tape, ad::Var g_da, ad::Var g_de,
                    const DiscriminatorVars& p);

// Scores the presented sides per variant and returns probabilities in (0,1):
// one for CAM/CEM/CCM, the (answer, explanation) pair for AECM. An invalid
// Var marks an absent side; a required absent side is an error, as is
// Baseline.
std::vector<ad::Var> discriminate(ad::Tape& tape, Variant variant,
                                  ad::Var answer_side, ad::Var explanation_side,
                                  const DiscriminatorVars& p);

struct AdversarialLosses {
  ad::Var l_c;             // mean log D(real) + mean log(1 - D(fake))
  ad::Var generator_term;  // mean log(1 - D(fake)), or -mean log D(fake)
};

// Batch-mean adversarial objective. Probabilities are clamped to
// [1e-7, 1 - 1e-7] before the logs. With non_saturating the generator term
// becomes -mean log D(fake).
AdversarialLosses adversarial_losses(ad::Tape& tape,
                                     std::span<const ad::Var> real_probs,
                                     std::span<const ad::Var> fake_probs,
                                     bool non_saturating = false);

// L = L_y + L_e - eta * L_c.
ad::Var total_loss(ad::Tape& tape, ad::Var l_y, ad::Var l_e, ad::Var l_c,
                   double eta);

}  // namespace ccm
