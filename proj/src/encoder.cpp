#include "ccm/encoder.hpp"

#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "ccm/lstm.hpp"

namespace ccm {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

ad::Var encode_question(ad::Tape& tape, std::span<const int> tokens,
                        const EncoderVars& p) {
  require(!tokens.empty(), "encode_question: empty token sequence");
  const Shape emb_shape = p.word_emb.shape();
  require(emb_shape.size() == 2, "encode_question: word embedding must be rank 2");
  const int vocab = emb_shape[0];
  const int hidden = p.lstm_b.shape()[0] / 4;

  const std::vector<double> zeros(static_cast<std::size_t>(hidden), 0.0);
  ad::Var h = tape.leaf({hidden}, zeros);
  ad::Var c = tape.leaf({hidden}, zeros);
  for (int id : tokens) {
    if (id < 0 || id >= vocab)
      throw std::out_of_range("encode_question: token id " + std::to_string(id) +
                              " outside vocabulary of size " + std::to_string(vocab));
    ad::Var x = tape.take_row(p.word_emb, id);
    std::tie(h, c) = lstm_step(x, h, c, p.lstm_w, p.lstm_b);
  }
  return h;
}

AttentionOutput attention_fuse(ad::Tape& tape, ad::Var features, ad::Var g_q,
                               const EncoderVars& p) {
  const Shape fs = features.shape();
  require(fs.size() == 2, "attention_fuse: features must be a rank-2 [regions, channels] grid");
  const int regions = fs[0];
  const int channels = fs[1];
  const Shape ip = p.img_proj.shape();
  const Shape qp_shape = p.q_proj.shape();
  require(ip[1] == channels,
          "attention_fuse: image projection expects " + std::to_string(ip[1]) +
              " channels, features have " + std::to_string(channels));
  require(qp_shape[0] == ip[0],
          "attention_fuse: projection dims differ (" + std::to_string(qp_shape[0]) +
              " vs " + std::to_string(ip[0]) + ")");
  require(g_q.shape()[0] == qp_shape[1],
          "attention_fuse: question vector length " + std::to_string(g_q.shape()[0]) +
              " does not match projection columns " + std::to_string(qp_shape[1]));
  const int att = p.att_hidden.shape()[0];
  require(p.att_hidden.shape()[1] == ip[0],
          "attention_fuse: attention hidden layer expects width " +
              std::to_string(p.att_hidden.shape()[1]) + ", projection dim is " +
              std::to_string(ip[0]));
  require(p.att_score.shape()[0] == att,
          "attention_fuse: score vector length does not match attention width");

  ad::Var q = tape.matmul(p.q_proj, g_q);
  ad::Var score_row = tape.reshape(p.att_score, {1, att});

  std::vector<ad::Var> projected;
  std::vector<ad::Var> scores;
  projected.reserve(static_cast<std::size_t>(regions));
  scores.reserve(static_cast<std::size_t>(regions));
  for (int j = 0; j < regions; ++j) {
    ad::Var v = tape.matmul(p.img_proj, tape.take_row(features, j));
    projected.push_back(v);
    ad::Var gated = tape.tanh(tape.mul(v, q));
    ad::Var normed = tape.l2_normalize(tape.signed_sqrt(gated));
    ad::Var hid = tape.sigmoid(tape.add(tape.matmul(p.att_hidden, normed), p.att_hidden_b));
    scores.push_back(tape.matmul(score_row, hid));
  }

  ad::Var alpha = tape.softmax(tape.concat(scores));
  ad::Var stacked = tape.reshape(tape.concat(projected), {regions, ip[0]});
  ad::Var pooled =
      tape.reshape(tape.matmul(tape.reshape(alpha, {1, regions}), stacked), {ip[0]});
  return {tape.mul(pooled, q), alpha};
}

}  // namespace ccm
