#include "ccm/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "ccm/rng.hpp"

namespace ccm {

namespace {

constexpr std::string_view kMagic = "CCMLAB1";

void require_positive(int v, const char* what) {
  if (v < 1)
    throw std::invalid_argument(std::string("model dims: ") + what +
                                " must be positive");
}

const Param* find_record(const std::vector<Param>& records, std::string_view name) {
  for (const Param& p : records)
    if (p.name == name) return &p;
  return nullptr;
}

const Shape& record_shape(const std::vector<Param>& records, std::string_view name,
                          std::size_t rank) {
  const Param* p = find_record(records, name);
  if (!p)
    throw std::runtime_error("model file missing parameter '" + std::string(name) +
                             "'");
  if (p->shape.size() != rank)
    throw std::runtime_error("model file parameter '" + std::string(name) +
                             "' has rank " + std::to_string(p->shape.size()) +
                             ", expected " + std::to_string(rank));
  return p->shape;
}

double meta_value(const std::vector<Param>& records, std::string_view name) {
  const Param* p = find_record(records, name);
  if (!p)
    throw std::runtime_error("model file missing record '" + std::string(name) + "'");
  if (p->values.size() != 1)
    throw std::runtime_error("model file record '" + std::string(name) +
                             "' must hold a single value");
  return p->values[0];
}

}  // namespace

CcmModel::CcmModel(Variant variant, const ModelDims& dims, uint64_t vocab_checksum,
                   uint64_t init_seed)
    : variant_(variant), dims_(dims), vocab_checksum_(vocab_checksum) {
  build_inventory();
  init_params(params_, init_seed);
  // The answer head is relu(w1 * relu(w2 * g_f)) with no bias, so a logit
  // whose pre-activation starts negative has zero gradient and its class can
  // never surface. Folding w1 to non-negative keeps every logit live at the
  // start; training may still move entries negative later.
  for (double& v : params_.at(params_.find("gen.ans.w1")).values) v = std::fabs(v);
}

void CcmModel::build_inventory() {
  const ModelDims& d = dims_;
  require_positive(d.question_vocab, "question vocabulary");
  require_positive(d.explanation_vocab, "explanation vocabulary");
  require_positive(d.answer_vocab, "answer vocabulary");
  require_positive(d.channels, "channels");
  require_positive(d.word_emb, "word embedding");
  require_positive(d.question_hidden, "question hidden");
  require_positive(d.proj, "projection");
  require_positive(d.att_hidden, "attention hidden");
  require_positive(d.answer_hidden, "answer hidden");
  require_positive(d.dec_emb, "decoder embedding");
  require_positive(d.dec_hidden, "decoder hidden");
  require_positive(d.ans_cond, "answer conditioning");

  auto gen = [&](std::string name, Shape s) {
    gen_ids_.push_back(params_.add(std::move(name), std::move(s)));
  };
  gen("gen.q.emb", {d.question_vocab, d.word_emb});
  gen("gen.q.lstm.w", {4 * d.question_hidden, d.word_emb + d.question_hidden});
  gen("gen.q.lstm.b", {4 * d.question_hidden});
  gen("gen.att.img_proj", {d.proj, d.channels});
  gen("gen.att.q_proj", {d.proj, d.question_hidden});
  gen("gen.att.hidden", {d.att_hidden, d.proj});
  gen("gen.att.hidden_b", {d.att_hidden});
  gen("gen.att.score", {d.att_hidden});
  gen("gen.ans.w2", {d.answer_hidden, d.proj});
  gen("gen.ans.w1", {d.answer_vocab, d.answer_hidden});
  gen("gen.dec.emb", {d.explanation_vocab, d.dec_emb});
  gen("gen.dec.ans_emb", {d.ans_cond, d.answer_vocab});
  gen("gen.dec.init", {2 * d.dec_hidden, d.proj + d.ans_cond});
  gen("gen.dec.lstm.w", {4 * d.dec_hidden, d.dec_emb + d.dec_hidden});
  gen("gen.dec.lstm.b", {4 * d.dec_hidden});
  gen("gen.dec.out", {d.explanation_vocab, d.dec_hidden});
  gen("gen.dec.out_b", {d.explanation_vocab});

  if (variant_ == Variant::kBaseline) return;
  require_positive(d.disc_ans_emb, "discriminator answer embedding");
  require_positive(d.disc_exp_emb, "discriminator explanation embedding");
  require_positive(d.disc_joint, "discriminator joint");
  auto disc = [&](std::string name, Shape s) {
    disc_ids_.push_back(params_.add(std::move(name), std::move(s)));
  };
  disc("disc.ans.emb", {d.disc_ans_emb, d.answer_vocab});
  disc("disc.ans.fc", {d.answer_vocab, d.disc_ans_emb});
  disc("disc.exp.emb", {d.explanation_vocab, d.disc_exp_emb});
  disc("disc.exp.lstm.w", {4 * d.dec_hidden, d.disc_exp_emb + d.dec_hidden});
  disc("disc.exp.lstm.b", {4 * d.dec_hidden});
  disc("disc.ahead.proj", {d.answer_vocab, d.answer_vocab});
  disc("disc.ahead.score", {d.answer_vocab});
  disc("disc.ahead.bias", {1});
  disc("disc.ehead.proj", {d.dec_hidden, d.dec_hidden});
  disc("disc.ehead.score", {d.dec_hidden});
  disc("disc.ehead.bias", {1});
  disc("disc.joint.pa", {d.answer_vocab, d.answer_vocab});
  disc("disc.joint.pe", {d.dec_hidden, d.dec_hidden});
  disc("disc.joint.w", {d.disc_joint, d.answer_vocab + d.dec_hidden});
  disc("disc.joint.score", {d.disc_joint});
  disc("disc.joint.bias", {1});
}

std::string CcmModel::serialize() const {
  std::string out(kMagic);
  for (const Param& p : params_) write_param_record(out, p);
  Param variant_rec{"meta.variant", {1},
                    {static_cast<double>(static_cast<int>(variant_))}};
  write_param_record(out, variant_rec);
  Param checksum_rec{"meta.vocab_checksum", {1},
                     {std::bit_cast<double>(vocab_checksum_)}};
  write_param_record(out, checksum_rec);
  return out;
}

void CcmModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  const std::string data = serialize();
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("failed writing model file: " + path);
}

CcmModel CcmModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  const std::string data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());

  if (data.size() < kMagic.size() || std::string_view(data).substr(0, kMagic.size()) != kMagic)
    throw std::runtime_error("not a model file (bad magic): " + path);

  std::vector<Param> records;
  std::size_t off = kMagic.size();
  Param rec;
  while (read_param_record(data, off, rec)) records.push_back(rec);

  const double variant_raw = meta_value(records, "meta.variant");
  const auto variant_int = static_cast<int>(std::llround(variant_raw));
  if (variant_int < 0 || variant_int > 4 ||
      static_cast<double>(variant_int) != variant_raw)
    throw std::runtime_error("model file has an invalid variant record");
  const auto variant = static_cast<Variant>(variant_int);
  const uint64_t checksum =
      std::bit_cast<uint64_t>(meta_value(records, "meta.vocab_checksum"));

  ModelDims dims;
  {
    const Shape& q_emb = record_shape(records, "gen.q.emb", 2);
    dims.question_vocab = q_emb[0];
    dims.word_emb = q_emb[1];
    dims.question_hidden = record_shape(records, "gen.q.lstm.b", 1)[0] / 4;
    const Shape& img = record_shape(records, "gen.att.img_proj", 2);
    dims.proj = img[0];
    dims.channels = img[1];
    dims.att_hidden = record_shape(records, "gen.att.hidden", 2)[0];
    dims.answer_hidden = record_shape(records, "gen.ans.w2", 2)[0];
    dims.answer_vocab = record_shape(records, "gen.ans.w1", 2)[0];
    const Shape& dec_emb = record_shape(records, "gen.dec.emb", 2);
    dims.explanation_vocab = dec_emb[0];
    dims.dec_emb = dec_emb[1];
    dims.dec_hidden = record_shape(records, "gen.dec.lstm.b", 1)[0] / 4;
    dims.ans_cond = record_shape(records, "gen.dec.ans_emb", 2)[0];
    if (variant != Variant::kBaseline) {
      dims.disc_ans_emb = record_shape(records, "disc.ans.emb", 2)[0];
      dims.disc_exp_emb = record_shape(records, "disc.exp.emb", 2)[1];
      dims.disc_joint = record_shape(records, "disc.joint.w", 2)[0];
    }
  }

  CcmModel model;
  model.variant_ = variant;
  model.dims_ = dims;
  model.vocab_checksum_ = checksum;
  model.build_inventory();

  if (records.size() != static_cast<std::size_t>(model.params_.count()) + 2) {
    for (const Param& r : records)
      if (!r.name.starts_with("meta.") && model.params_.find(r.name) < 0)
        throw std::runtime_error("model file has an unknown parameter record '" +
                                 r.name + "'");
    throw std::runtime_error("model file has " + std::to_string(records.size()) +
                             " records, expected " +
                             std::to_string(model.params_.count() + 2));
  }
  for (Param& p : model.params_) {
    const Param* r = find_record(records, p.name);
    if (!r)
      throw std::runtime_error("model file missing parameter '" + p.name + "'");
    if (r->shape != p.shape)
      throw std::runtime_error("model file parameter '" + p.name +
                               "' has shape " + shape_str(r->shape) +
                               ", expected " + shape_str(p.shape));
    p.values = r->values;
  }
  return model;
}

uint64_t CcmModel::prefix_hash(std::string_view prefix) const {
  uint64_t h = kFnvBasis;
  for (const Param& p : params_) {
    if (!std::string_view(p.name).starts_with(prefix)) continue;
    h = fnv1a(p.name, h);
    for (int d : p.shape) h = fnv1a_u64(static_cast<uint64_t>(d), h);
    h = fnv1a_bytes(p.values.data(), p.values.size() * sizeof(double), h);
  }
  return h;
}

CcmModel::Bound CcmModel::bind(ad::Tape& tape, bool gen_grad, bool disc_grad) const {
  Bound b;
  b.by_id.reserve(static_cast<std::size_t>(params_.count()));
  for (int i = 0; i < params_.count(); ++i) {
    const Param& p = params_.at(i);
    const bool grad = std::string_view(p.name).starts_with("gen.") ? gen_grad : disc_grad;
    b.by_id.push_back(tape.leaf(p.shape, p.values, grad));
  }
  auto v = [&](std::string_view name) {
    return b.by_id[static_cast<std::size_t>(params_.find(name))];
  };
  b.enc.word_emb = v("gen.q.emb");
  b.enc.lstm_w = v("gen.q.lstm.w");
  b.enc.lstm_b = v("gen.q.lstm.b");
  b.enc.img_proj = v("gen.att.img_proj");
  b.enc.q_proj = v("gen.att.q_proj");
  b.enc.att_hidden = v("gen.att.hidden");
  b.enc.att_hidden_b = v("gen.att.hidden_b");
  b.enc.att_score = v("gen.att.score");
  b.head.hidden = v("gen.ans.w2");
  b.head.out = v("gen.ans.w1");
  b.dec.word_emb = v("gen.dec.emb");
  b.dec.ans_emb = v("gen.dec.ans_emb");
  b.dec.init_proj = v("gen.dec.init");
  b.dec.lstm_w = v("gen.dec.lstm.w");
  b.dec.lstm_b = v("gen.dec.lstm.b");
  b.dec.out_proj = v("gen.dec.out");
  b.dec.out_bias = v("gen.dec.out_b");
  if (variant_ != Variant::kBaseline) {
    b.disc.ans_emb = v("disc.ans.emb");
    b.disc.ans_fc = v("disc.ans.fc");
    b.disc.exp_emb = v("disc.exp.emb");
    b.disc.exp_lstm_w = v("disc.exp.lstm.w");
    b.disc.exp_lstm_b = v("disc.exp.lstm.b");
    b.disc.ans_head_proj = v("disc.ahead.proj");
    b.disc.ans_head_score = v("disc.ahead.score");
    b.disc.ans_head_bias = v("disc.ahead.bias");
    b.disc.exp_head_proj = v("disc.ehead.proj");
    b.disc.exp_head_score = v("disc.ehead.score");
    b.disc.exp_head_bias = v("disc.ehead.bias");
    b.disc.joint_ans_proj = v("disc.joint.pa");
    b.disc.joint_exp_proj = v("disc.joint.pe");
    b.disc.joint_fc = v("disc.joint.w");
    b.disc.joint_score = v("disc.joint.score");
    b.disc.joint_bias = v("disc.joint.bias");
  }
  return b;
}

}  // namespace ccm
