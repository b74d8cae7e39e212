#include "ccm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ccm/rng.hpp"
#include "ccm/textio.hpp"

namespace ccm {

namespace {

void validate(const TrainConfig& cfg, const CcmModel& model, std::size_t n) {
  if (n == 0) throw std::invalid_argument("train: empty dataset");
  if (cfg.variant != model.variant())
    throw std::invalid_argument(
        std::string("train: config variant '") +
        std::string(variant_name(cfg.variant)) + "' does not match model variant '" +
        std::string(variant_name(model.variant())) + "'");
  if (cfg.eta < 0.0) throw std::invalid_argument("train: eta must be >= 0");
  if (cfg.disc_iters < 1) throw std::invalid_argument("train: disc_iters must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (cfg.clip <= 0.0) throw std::invalid_argument("train: clip must be positive");
  if (cfg.lr_decay_interval < 1)
    throw std::invalid_argument("train: lr_decay_interval must be >= 1");
  if (cfg.lr_decay_factor <= 0.0 || cfg.lr_decay_factor > 1.0)
    throw std::invalid_argument("train: lr_decay_factor must be in (0, 1]");
}

void require_finite(double v, const char* term, int epoch) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("training diverged: non-finite ") + term +
                             " at epoch " + std::to_string(epoch));
}

ad::Var onehot_leaf(ad::Tape& tape, int hot, int size) {
  std::vector<double> values(static_cast<std::size_t>(size), 0.0);
  values[static_cast<std::size_t>(hot)] = 1.0;
  return tape.leaf({size}, values);
}

int argmax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) -
                          values.begin());
}

std::vector<int> shuffled_indices(std::size_t n, uint64_t seed) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = rng.uniform_u32(static_cast<uint32_t>(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

void clip_subset(ParamSet& ps, std::span<const int> ids, double bound) {
  for (int id : ids)
    for (double& v : ps.at(id).values) v = std::clamp(v, -bound, bound);
}

// Mean of the generator's adversarial objective over the fake batch:
// log(1 - D) when saturating, -log D otherwise.
ad::Var generator_term(ad::Tape& tape, std::span<const ad::Var> fake_probs,
                       bool non_saturating) {
  ad::Var one = tape.scalar_leaf(1.0);
  std::vector<ad::Var> logs;
  logs.reserve(fake_probs.size());
  for (ad::Var p : fake_probs) {
    ad::Var clamped = tape.clamp(p, 1e-7, 1.0 - 1e-7);
    logs.push_back(non_saturating ? tape.scale(tape.log(clamped), -1.0)
                                  : tape.log(tape.sub(one, clamped)));
  }
  return tape.mean(tape.concat(logs));
}

struct SideNeeds {
  bool answer = false;
  bool explanation = false;
};

SideNeeds sides_for(Variant v) {
  switch (v) {
    case Variant::kCam: return {true, false};
    case Variant::kCem: return {false, true};
    case Variant::kAecm:
    case Variant::kCcm: return {true, true};
    case Variant::kBaseline: break;
  }
  throw std::logic_error("sides_for: variant has no discriminator");
}

}  // namespace

InstanceForward forward_instance(ad::Tape& tape, const CcmModel::Bound& bound,
                                 const EncodedInstance& inst, bool condition_on_gt) {
  InstanceForward out;
  ad::Var g_q = encode_question(tape, inst.question, bound.enc);
  const auto att = attention_fuse(tape, tape.leaf(inst.features), g_q, bound.enc);
  out.alpha = att.alpha;
  out.logits = predict_answer(tape, att.fused, bound.head);
  out.predicted = argmax(out.logits.values());
  out.l_y = answer_loss(tape, out.logits, inst.answer);

  const int classes = out.logits.shape()[0];
  ad::Var ans_vec = condition_on_gt ? onehot_leaf(tape, inst.answer, classes)
                                    : tape.softmax(out.logits);
  ad::Var g_y = answer_embedding(tape, bound.dec.ans_emb, ans_vec);
  const auto tf =
      decode_explanation_teacher_forced(tape, att.fused, g_y, bound.dec, inst.explanation);
  out.l_e = tf.loss;
  out.dec_hidden = tf.final_hidden;
  return out;
}

FakeFeatures fake_features(ad::Tape& tape, const CcmModel::Bound& bound,
                           const EncodedInstance& inst, bool condition_on_gt,
                           bool need_answer, bool need_explanation) {
  FakeFeatures out;
  if (!need_answer && !need_explanation) return out;

  ad::Var g_q = encode_question(tape, inst.question, bound.enc);
  const auto att = attention_fuse(tape, tape.leaf(inst.features), g_q, bound.enc);

  ad::Var logits;
  if (need_answer || !condition_on_gt) {
    logits = predict_answer(tape, att.fused, bound.head);
    if (need_answer) out.answer = logits;
  }
  if (need_explanation) {
    const int classes = bound.head.out.shape()[0];
    ad::Var ans_vec = condition_on_gt ? onehot_leaf(tape, inst.answer, classes)
                                      : tape.softmax(logits);
    ad::Var g_y = answer_embedding(tape, bound.dec.ans_emb, ans_vec);
    const auto tf = decode_explanation_teacher_forced(tape, att.fused, g_y,
                                                      bound.dec, inst.explanation);
    out.explanation = tf.final_hidden;
  }
  return out;
}

TrainHistory train(CcmModel& model, const std::vector<EncodedInstance>& data,
                   const TrainConfig& cfg) {
  const std::size_t n = data.size();
  validate(cfg, model, n);
  const bool adversarial = model.variant() != Variant::kBaseline && cfg.eta > 0.0;
  const SideNeeds needs = adversarial ? sides_for(model.variant()) : SideNeeds{};

  AdamState gen_state;
  gen_state.init(model.params());
  SgdState disc_state;
  disc_state.init(model.params());

  if (adversarial) clip_subset(model.params(), model.discriminator_ids(), cfg.clip);
  const uint64_t cam_guard =
      model.variant() == Variant::kCam ? model.prefix_hash("disc.exp.") : 0;
  const uint64_t cem_guard =
      model.variant() == Variant::kCem ? model.prefix_hash("disc.ans.") : 0;

  TrainHistory history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));
  ad::Tape tape;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr =
        decayed_lr(cfg.gen_opt.lr, epoch, cfg.lr_decay_factor, cfg.lr_decay_interval);
    AdamHyper gen_hp = cfg.gen_opt;
    gen_hp.lr = lr;

    const auto order = shuffled_indices(n, derive_seed(cfg.seed, "shuffle", epoch));
    Rng disc_rng(derive_seed(cfg.seed, "disc", epoch));
    Rng gen_rng(derive_seed(cfg.seed, "genbatch", epoch));

    double sum_l_y = 0.0, sum_l_e = 0.0, sum_l_c = 0.0;
    int correct = 0, disc_steps = 0;

    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const int> batch(order.data() + start, stop - start);

      if (adversarial) {
        const uint64_t gen_guard = model.prefix_hash("gen.");
        for (int k = 0; k < cfg.disc_iters; ++k) {
          tape.reset();
          const auto bound = model.bind(tape, false, true);
          std::vector<ad::Var> real_probs, fake_probs;
          for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto& inst = data[disc_rng.uniform_u32(static_cast<uint32_t>(n))];
            ad::Var real_a, real_e;
            if (needs.answer) real_a = embed_real_answer(tape, inst.answer, bound.disc);
            if (needs.explanation)
              real_e = embed_real_explanation(tape, inst.explanation, bound.disc);
            for (ad::Var p :
                 discriminate(tape, model.variant(), real_a, real_e, bound.disc))
              real_probs.push_back(p);
          }
          for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto& inst = data[disc_rng.uniform_u32(static_cast<uint32_t>(n))];
            const auto fake = fake_features(tape, bound, inst, cfg.condition_on_gt,
                                            needs.answer, needs.explanation);
            for (ad::Var p : discriminate(tape, model.variant(), fake.answer,
                                          fake.explanation, bound.disc))
              fake_probs.push_back(p);
          }
          const auto losses =
              adversarial_losses(tape, real_probs, fake_probs, cfg.non_saturating);
          const double l_c = losses.l_c.scalar();
          require_finite(l_c, "discriminator loss", epoch);
          sum_l_c += l_c;
          ++disc_steps;

          tape.backward(tape.scale(losses.l_c, -1.0));
          GradView grads(static_cast<std::size_t>(model.params().count()));
          for (int id : model.discriminator_ids()) grads[static_cast<std::size_t>(id)] =
              bound.by_id[static_cast<std::size_t>(id)].grad();
          sgd_momentum_step(model.params(), grads, disc_state, cfg.disc_opt);
          clip_subset(model.params(), model.discriminator_ids(), cfg.clip);
        }
        if (model.prefix_hash("gen.") != gen_guard)
          throw std::logic_error(
              "parameter partition violated: discriminator step changed generator "
              "parameters");
      }

      const uint64_t disc_guard = adversarial ? model.prefix_hash("disc.") : 0;
      tape.reset();
      const auto bound = model.bind(tape, true, false);
      std::vector<ad::Var> l_y_terms, l_e_terms;
      std::vector<ad::Var> reuse_answer, reuse_explanation;
      for (int idx : batch) {
        const auto fwd = forward_instance(tape, bound, data[static_cast<std::size_t>(idx)],
                                          cfg.condition_on_gt);
        l_y_terms.push_back(fwd.l_y);
        l_e_terms.push_back(fwd.l_e);
        sum_l_y += fwd.l_y.scalar();
        sum_l_e += fwd.l_e.scalar();
        if (fwd.predicted == data[static_cast<std::size_t>(idx)].answer) ++correct;
        if (adversarial && cfg.reuse_gen_batch) {
          reuse_answer.push_back(fwd.logits);
          reuse_explanation.push_back(fwd.dec_hidden);
        }
      }
      ad::Var mean_l_y = tape.mean(tape.concat(l_y_terms));
      ad::Var mean_l_e = tape.mean(tape.concat(l_e_terms));
      require_finite(mean_l_y.scalar(), "answer loss", epoch);
      require_finite(mean_l_e.scalar(), "explanation loss", epoch);
      ad::Var objective = tape.add(mean_l_y, mean_l_e);

      if (adversarial) {
        std::vector<ad::Var> fake_probs;
        if (cfg.reuse_gen_batch) {
          for (std::size_t i = 0; i < reuse_answer.size(); ++i)
            for (ad::Var p : discriminate(tape, model.variant(), reuse_answer[i],
                                          reuse_explanation[i], bound.disc))
              fake_probs.push_back(p);
        } else {
          for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto& inst = data[gen_rng.uniform_u32(static_cast<uint32_t>(n))];
            const auto fake = fake_features(tape, bound, inst, cfg.condition_on_gt,
                                            needs.answer, needs.explanation);
            for (ad::Var p : discriminate(tape, model.variant(), fake.answer,
                                          fake.explanation, bound.disc))
              fake_probs.push_back(p);
          }
        }
        ad::Var adv = generator_term(tape, fake_probs, cfg.non_saturating);
        require_finite(adv.scalar(), "adversarial generator term", epoch);
        objective = tape.add(objective, tape.scale(adv, cfg.eta));
      }

      tape.backward(objective);
      GradView grads(static_cast<std::size_t>(model.params().count()));
      for (int id : model.generator_ids())
        grads[static_cast<std::size_t>(id)] = bound.by_id[static_cast<std::size_t>(id)].grad();
      adam_step(model.params(), grads, gen_state, gen_hp);

      if (adversarial && model.prefix_hash("disc.") != disc_guard)
        throw std::logic_error(
            "parameter partition violated: generator step changed discriminator "
            "parameters");
    }

    if (model.variant() == Variant::kCam && model.prefix_hash("disc.exp.") != cam_guard)
      throw std::logic_error("cam must not update explanation discriminator parameters");
    if (model.variant() == Variant::kCem && model.prefix_hash("disc.ans.") != cem_guard)
      throw std::logic_error("cem must not update answer discriminator parameters");

    EpochStats stats;
    stats.epoch = epoch;
    stats.l_y = sum_l_y / static_cast<double>(n);
    stats.l_e = sum_l_e / static_cast<double>(n);
    stats.l_c = disc_steps > 0 ? sum_l_c / disc_steps : 0.0;
    stats.d_loss = -stats.l_c;
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    stats.lr = lr;
    history.push_back(stats);
  }
  return history;
}

std::string history_to_csv(const TrainHistory& history) {
  std::string out = "epoch,L_y,L_e,L_c,D_loss,acc,lr\n";
  for (const auto& s : history) {
    out += std::to_string(s.epoch);
    out += ',';
    out += format_csv_number(s.l_y);
    out += ',';
    out += format_csv_number(s.l_e);
    out += ',';
    out += format_csv_number(s.l_c);
    out += ',';
    out += format_csv_number(s.d_loss);
    out += ',';
    out += format_csv_number(s.accuracy);
    out += ',';
    out += format_csv_number(s.lr);
    out += '\n';
  }
  return out;
}

}  // namespace ccm
