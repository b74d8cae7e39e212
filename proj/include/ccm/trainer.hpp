#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccm/model.hpp"
#include "ccm/optim.hpp"
#include "ccm/toyvqa.hpp"

namespace ccm {

struct TrainConfig {
  Variant variant = Variant::kCcm;
  double eta = 0.1;          // adversarial weight; 0 disables the discriminator
  int disc_iters = 1;        // inner discriminator steps per generator step
  int batch_size = 16;
  int epochs = 50;
  uint64_t seed = 1;
  AdamHyper gen_opt;         // generator optimizer
  SgdHyper disc_opt;         // discriminator optimizer
  double clip = 1.0;         // discriminator weight bound
  double lr_decay_factor = 0.9;
  int lr_decay_interval = 10;
  bool reuse_gen_batch = false;   // score the supervised batch's own features
                                  // instead of sampling a fresh fake batch
  bool non_saturating = false;    // generator maximizes log D instead of
                                  // minimizing log(1 - D)
  bool condition_on_gt = true;    // decoder conditioning during training
};

struct EpochStats {
  int epoch = 0;
  double l_y = 0.0;      // mean answer loss over the epoch
  double l_e = 0.0;      // mean explanation loss
  double l_c = 0.0;      // mean adversarial objective over discriminator steps
  double d_loss = 0.0;   // -l_c, what the discriminator descends
  double accuracy = 0.0; // answer accuracy on the training pass
  double lr = 0.0;       // generator lr after decay
};

using TrainHistory = std::vector<EpochStats>;

// One row per epoch under the header `epoch,L_y,L_e,L_c,D_loss,acc,lr`.
std::string history_to_csv(const TrainHistory& history);

// One instance through the generator: question encoding, attention fusion,
// answer head and teacher-forced decoder.
struct InstanceForward {
  ad::Var logits;
  ad::Var alpha;
  ad::Var l_y;
  ad::Var l_e;
  ad::Var dec_hidden;  // teacher-forced final hidden state
  int predicted = 0;
};

InstanceForward forward_instance(ad::Tape& tape, const CcmModel::Bound& bound,
                                 const EncodedInstance& inst, bool condition_on_gt);

// Generator features presented to the discriminator as the fake side. Only
// the requested sides are computed; answer is the logits vector and
// explanation the teacher-forced decoder's final hidden state.
struct FakeFeatures {
  ad::Var answer;
  ad::Var explanation;
};

FakeFeatures fake_features(ad::Tape& tape, const CcmModel::Bound& bound,
                           const EncodedInstance& inst, bool condition_on_gt,
                           bool need_answer, bool need_explanation);

// Adversarial training loop. Per generator batch: K discriminator ascent
// steps on L_c over freshly sampled real and fake batches (SGD + momentum,
// weights clipped to [-clip, clip] after each step), then one Adam descent
// step on mean L_y + mean L_e + eta * mean log(1 - D(fakes)). Baseline or
// eta = 0 trains the generator supervision alone and consumes no extra
// randomness, so those runs are bit-identical to each other per seed.
TrainHistory train(CcmModel& model, const std::vector<EncodedInstance>& data,
                   const TrainConfig& cfg);

}  // namespace ccm
