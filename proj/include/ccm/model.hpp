#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccm/discriminator.hpp"
#include "ccm/encoder.hpp"
#include "ccm/generator.hpp"
#include "ccm/params.hpp"

namespace ccm {

// Layer widths. The question and explanation vocabulary sizes come from the
// dataset; everything else has a desk-scale default. The discriminator's
// answer-path output width is answer_vocab and its explanation LSTM hidden is
// dec_hidden, so real embeddings and generator features share each scorer's
// input space.
struct ModelDims {
  int question_vocab = 0;
  int explanation_vocab = 0;
  int answer_vocab = 9;
  int channels = 16;
  int word_emb = 32;
  int question_hidden = 64;
  int proj = 64;
  int att_hidden = 32;
  int answer_hidden = 64;
  int dec_emb = 32;
  int dec_hidden = 64;
  int ans_cond = 32;
  int disc_ans_emb = 32;
  int disc_exp_emb = 32;
  int disc_joint = 64;
};

// Full model: generator parameters always, discriminator parameters for every
// variant except baseline. Serializes to a "CCMLAB1" container of named
// parameter records; round-trips are byte-exact.
class CcmModel {
 public:
  CcmModel(Variant variant, const ModelDims& dims, uint64_t vocab_checksum,
           uint64_t init_seed);

  static CcmModel load(const std::string& path);
  void save(const std::string& path) const;
  std::string serialize() const;

  Variant variant() const { return variant_; }
  const ModelDims& dims() const { return dims_; }
  uint64_t vocab_checksum() const { return vocab_checksum_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  std::span<const int> generator_ids() const { return gen_ids_; }
  std::span<const int> discriminator_ids() const { return disc_ids_; }

  // FNV hash over name, shape and value bits of parameters whose name starts
  // with the prefix. An empty prefix covers everything.
  uint64_t prefix_hash(std::string_view prefix) const;

  // All parameters bound onto one tape as typed bundles. Gradient flow is
  // controlled per side, so a generator step can freeze the discriminator
  // and vice versa. disc fields are valid only when the variant has one.
  struct Bound {
    EncoderVars enc;
    AnswerHeadVars head;
    DecoderVars dec;
    DiscriminatorVars disc;
    std::vector<ad::Var> by_id;
  };
  Bound bind(ad::Tape& tape, bool gen_grad, bool disc_grad) const;

 private:
  CcmModel() = default;
  void build_inventory();

  Variant variant_ = Variant::kBaseline;
  ModelDims dims_;
  uint64_t vocab_checksum_ = 0;
  ParamSet params_;
  std::vector<int> gen_ids_;
  std::vector<int> disc_ids_;
};

}  // namespace ccm
