#include "ccm/discriminator.hpp"

#include <stdexcept>
#include <tuple>

#include "ccm/lstm.hpp"

namespace ccm {

namespace {

constexpr double kProbFloor = 1e-7;

ad::Var head_prob(ad::Tape& tape, ad::Var input, ad::Var proj, ad::Var score,
                  ad::Var bias) {
  const int width = score.shape()[0];
  ad::Var hidden = tape.tanh(tape.matmul(proj, input));
  ad::Var logit = tape.add(tape.matmul(tape.reshape(score, {1, width}), hidden), bias);
  return tape.sigmoid(logit);
}

ad::Var require_side(ad::Var side, const char* which) {
  if (!side.valid())
    throw std::invalid_argument(std::string("discriminate: variant requires the ") +
                                which + " side");
  return side;
}

ad::Var mean_log(ad::Tape& tape, std::span<const ad::Var> probs, bool complement) {
  std::vector<ad::Var> logs;
  logs.reserve(probs.size());
  ad::Var one = tape.scalar_leaf(1.0);
  for (ad::Var p : probs) {
    ad::Var clamped = tape.clamp(p, kProbFloor, 1.0 - kProbFloor);
    logs.push_back(tape.log(complement ? tape.sub(one, clamped) : clamped));
  }
  return tape.mean(tape.concat(logs));
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kCam: return "cam";
    case Variant::kCem: return "cem";
    case Variant::kAecm: return "aecm";
    case Variant::kCcm: return "ccm";
  }
  throw std::logic_error("variant_name: unknown variant");
}

Variant parse_variant(std::string_view name) {
  if (name == "baseline") return Variant::kBaseline;
  if (name == "cam") return Variant::kCam;
  if (name == "cem") return Variant::kCem;
  if (name == "aecm") return Variant::kAecm;
  if (name == "ccm") return Variant::kCcm;
  throw std::invalid_argument("unknown variant '" + std::string(name) +
                              "' (expected baseline, cam, cem, aecm or ccm)");
}

ad::Var embed_real_answer(ad::Tape& tape, int label, const DiscriminatorVars& p) {
  const int classes = p.ans_emb.shape()[1];
  if (label < 0 || label >= classes)
    throw std::out_of_range("embed_real_answer: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(classes) + ")");
  std::vector<double> onehot(static_cast<std::size_t>(classes), 0.0);
  onehot[static_cast<std::size_t>(label)] = 1.0;
  ad::Var a = tape.leaf({classes}, onehot);
  return tape.relu(tape.matmul(p.ans_fc, tape.relu(tape.matmul(p.ans_emb, a))));
}

ad::Var embed_real_explanation(ad::Tape& tape, std::span<const int> tokens,
                               const DiscriminatorVars& p) {
  if (tokens.empty())
    throw std::invalid_argument("embed_real_explanation: empty token sequence");
  const int vocab = p.exp_emb.shape()[0];
  const int hidden = p.exp_lstm_b.shape()[0] / 4;
  const std::vector<double> zeros(static_cast<std::size_t>(hidden), 0.0);
  ad::Var h = tape.leaf({hidden}, zeros);
  ad::Var c = tape.leaf({hidden}, zeros);
  for (int id : tokens) {
    if (id < 0 || id >= vocab)
      throw std::out_of_range("embed_real_explanation: token id " +
                              std::to_string(id) + " outside vocabulary of size " +
                              std::to_string(vocab));
    ad::Var x = tape.take_row(p.exp_emb, id);
    std::tie(h, c) = lstm_step(x, h, c, p.exp_lstm_w, p.exp_lstm_b);
  }
  return h;
}

ad::Var joint_embed(ad::Tape& tape, ad::Var g_da, ad::Var g_de,
                    const DiscriminatorVars& p) {
  if (p.joint_ans_proj.shape()[1] != g_da.shape()[0] ||
      p.joint_exp_proj.shape()[1] != g_de.shape()[0])
    throw std::invalid_argument("joint_embed: side dims do not match projections");
  const ad::Var parts[] = {tape.matmul(p.joint_ans_proj, g_da),
                           tape.matmul(p.joint_exp_proj, g_de)};
  ad::Var gated = tape.tanh(tape.concat(parts));
  if (p.joint_fc.shape()[1] != gated.shape()[0])
    throw std::invalid_argument("joint_embed: joint projection expects width " +
                                std::to_string(p.joint_fc.shape()[1]) + ", got " +
                                std::to_string(gated.shape()[0]));
  return tape.matmul(p.joint_fc, gated);
}

std::vector<ad::Var> discriminate(ad::Tape& tape, Variant variant,
                                  ad::Var answer_side, ad::Var explanation_side,
                                  const DiscriminatorVars& p) {
  switch (variant) {
    case Variant::kBaseline:
      throw std::invalid_argument("discriminate: baseline has no discriminator");
    case Variant::kCam:
      return {head_prob(tape, require_side(answer_side, "answer"), p.ans_head_proj,
                        p.ans_head_score, p.ans_head_bias)};
    case Variant::kCem:
      return {head_prob(tape, require_side(explanation_side, "explanation"),
                        p.exp_head_proj, p.exp_head_score, p.exp_head_bias)};
    case Variant::kAecm:
      return {head_prob(tape, require_side(answer_side, "answer"), p.ans_head_proj,
                        p.ans_head_score, p.ans_head_bias),
              head_prob(tape, require_side(explanation_side, "explanation"),
                        p.exp_head_proj, p.exp_head_score, p.exp_head_bias)};
    case Variant::kCcm: {
      ad::Var g_dj = joint_embed(tape, require_side(answer_side, "answer"),
                                 require_side(explanation_side, "explanation"), p);
      const int width = p.joint_score.shape()[0];
      ad::Var logit = tape.add(
          tape.matmul(tape.reshape(p.joint_score, {1, width}), g_dj), p.joint_bias);
      return {tape.sigmoid(logit)};
    }
  }
  throw std::logic_error("discriminate: unknown variant");
}

AdversarialLosses adversarial_losses(ad::Tape& tape,
                                     std::span<const ad::Var> real_probs,
                                     std::span<const ad::Var> fake_probs,
                                     bool non_saturating) {
  if (real_probs.empty() || fake_probs.empty())
    throw std::invalid_argument("adversarial_losses: empty probability batch");
  ad::Var real_term = mean_log(tape, real_probs, false);
  ad::Var fake_term = mean_log(tape, fake_probs, true);
  ad::Var gen_term = non_saturating
                         ? tape.scale(mean_log(tape, fake_probs, false), -1.0)
                         : fake_term;
  return {tape.add(real_term, fake_term), gen_term};
}

ad::Var total_loss(ad::Tape& tape, ad::Var l_y, ad::Var l_e, ad::Var l_c,
                   double eta) {
  return tape.add(tape.add(l_y, l_e), tape.scale(l_c, -eta));
}

}  // namespace ccm
