#include "ccm/config.hpp"

#include <charconv>
#include <stdexcept>

#include "ccm/discriminator.hpp"
#include "ccm/textio.hpp"

namespace ccm {

namespace {

struct KeyDefault {
  const char* key;
  const char* value;
};

// Registry order doubles as render order. Training keys lead, then the
// dataset geometry, layer widths and finally run plumbing. The learning-rate
// and batch-size defaults are the desk-scale recipe that converges on the
// toy task in minutes; the original large-scale values (lr 7e-4, batch 64)
// remain reachable through these same keys.
constexpr KeyDefault kRegistry[] = {
    {"variant", "ccm"},
    {"seed", "1"},
    {"epochs", "50"},
    {"batch_size", "16"},
    {"disc_iters", "1"},
    {"eta", "0.1"},
    {"gen_lr", "0.01"},
    {"gen_beta1", "0.95"},
    {"gen_beta2", "0.99"},
    {"gen_epsilon", "1e-8"},
    {"disc_lr", "0.005"},
    {"disc_momentum", "0.9"},
    {"clip", "1.0"},
    {"lr_decay_factor", "0.9"},
    {"lr_decay_interval", "10"},
    {"reuse_gen_batch", "false"},
    {"non_saturating", "false"},
    {"condition_on_gt", "true"},
    {"grid_width", "4"},
    {"grid_height", "4"},
    {"channels", "16"},
    {"jitter_sigma", "0.05"},
    {"word_emb", "32"},
    {"question_hidden", "64"},
    {"proj", "64"},
    {"att_hidden", "32"},
    {"answer_hidden", "64"},
    {"dec_emb", "32"},
    {"dec_hidden", "64"},
    {"ans_cond", "32"},
    {"disc_ans_emb", "32"},
    {"disc_exp_emb", "32"},
    {"disc_joint", "64"},
    {"data", ""},
    {"model", ""},
    {"out_dir", "."},
    {"split", "all"},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value,
                            std::string_view why) {
  throw std::invalid_argument("config: key '" + std::string(key) + "' value '" +
                              std::string(value) + "' " + std::string(why));
}

int64_t parse_integer(std::string_view key, std::string_view value) {
  int64_t out = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    bad_value(key, value, "is not an integer");
  return out;
}

uint64_t parse_unsigned(std::string_view key, std::string_view value) {
  uint64_t out = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    bad_value(key, value, "is not an unsigned integer");
  return out;
}

double parse_number(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    bad_value(key, value, "is not a number");
  return out;
}

bool parse_flag(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "is not a boolean (true/false/1/0)");
}

int positive_int(std::string_view key, std::string_view value) {
  const int64_t v = parse_integer(key, value);
  if (v < 1 || v > 1'000'000'000) bad_value(key, value, "must be a positive integer");
  return static_cast<int>(v);
}

double checked_number(std::string_view key, std::string_view value, double lo,
                      double hi, std::string_view why) {
  const double v = parse_number(key, value);
  if (!(v >= lo && v <= hi)) bad_value(key, value, why);
  return v;
}

}  // namespace

RunConfig::RunConfig() {
  values_.reserve(std::size(kRegistry));
  for (const auto& kd : kRegistry) values_.emplace_back(kd.key, kd.value);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    out.reserve(std::size(kRegistry));
    for (const auto& kd : kRegistry) out.emplace_back(kd.key);
    return out;
  }();
  return names;
}

int RunConfig::index_of(std::string_view key) const {
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (values_[i].first == key) return static_cast<int>(i);
  return -1;
}

void RunConfig::apply_text(std::string_view text, std::string_view origin) {
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    ++line_no;
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument(std::string(origin) + ":" +
                                  std::to_string(line_no) +
                                  ": expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const int idx = index_of(key);
    if (idx < 0)
      throw std::invalid_argument(std::string(origin) + ":" +
                                  std::to_string(line_no) + ": unknown key '" +
                                  std::string(key) + "'");
    values_[static_cast<std::size_t>(idx)].second = std::string(value);
  }
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const int idx = index_of(key);
  if (idx < 0)
    throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
  values_[static_cast<std::size_t>(idx)].second = std::string(value);
}

const std::string& RunConfig::get(std::string_view key) const {
  const int idx = index_of(key);
  if (idx < 0)
    throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
  return values_[static_cast<std::size_t>(idx)].second;
}

void RunConfig::validate() const {
  parse_variant(get("variant"));
  parse_unsigned("seed", get("seed"));
  for (const char* key : {"epochs", "batch_size", "disc_iters", "lr_decay_interval",
                          "grid_width", "grid_height", "word_emb",
                          "question_hidden", "proj", "att_hidden", "answer_hidden",
                          "dec_emb", "dec_hidden", "ans_cond", "disc_ans_emb",
                          "disc_exp_emb", "disc_joint"})
    positive_int(key, get(key));
  const int channels = positive_int("channels", get("channels"));
  if (channels < 12)
    bad_value("channels", get("channels"),
              "must be at least 12 to hold every color-shape code");
  checked_number("eta", get("eta"), 0.0, 1e6, "must be nonnegative");
  checked_number("gen_lr", get("gen_lr"), 1e-12, 1e6, "must be positive");
  checked_number("gen_beta1", get("gen_beta1"), 0.0, 0.999999, "must be in [0, 1)");
  checked_number("gen_beta2", get("gen_beta2"), 0.0, 0.999999, "must be in [0, 1)");
  checked_number("gen_epsilon", get("gen_epsilon"), 1e-300, 1.0, "must be positive");
  checked_number("disc_lr", get("disc_lr"), 1e-12, 1e6, "must be positive");
  checked_number("disc_momentum", get("disc_momentum"), 0.0, 0.999999,
                 "must be in [0, 1)");
  checked_number("clip", get("clip"), 1e-12, 1e6, "must be positive");
  checked_number("lr_decay_factor", get("lr_decay_factor"), 1e-12, 1.0,
                 "must be in (0, 1]");
  checked_number("jitter_sigma", get("jitter_sigma"), 0.0, 1e6,
                 "must be nonnegative");
  for (const char* key : {"reuse_gen_batch", "non_saturating", "condition_on_gt"})
    parse_flag(key, get(key));
  const std::string& split = get("split");
  if (split != "all" && split != "train" && split != "val" && split != "test")
    bad_value("split", split, "must be one of all, train, val, test");
}

std::string RunConfig::render() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

uint64_t RunConfig::seed() const { return parse_unsigned("seed", get("seed")); }

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.variant = parse_variant(get("variant"));
  cfg.eta = parse_number("eta", get("eta"));
  cfg.disc_iters = positive_int("disc_iters", get("disc_iters"));
  cfg.batch_size = positive_int("batch_size", get("batch_size"));
  cfg.epochs = positive_int("epochs", get("epochs"));
  cfg.seed = seed();
  cfg.gen_opt.lr = parse_number("gen_lr", get("gen_lr"));
  cfg.gen_opt.beta1 = parse_number("gen_beta1", get("gen_beta1"));
  cfg.gen_opt.beta2 = parse_number("gen_beta2", get("gen_beta2"));
  cfg.gen_opt.epsilon = parse_number("gen_epsilon", get("gen_epsilon"));
  cfg.disc_opt.lr = parse_number("disc_lr", get("disc_lr"));
  cfg.disc_opt.momentum = parse_number("disc_momentum", get("disc_momentum"));
  cfg.clip = parse_number("clip", get("clip"));
  cfg.lr_decay_factor = parse_number("lr_decay_factor", get("lr_decay_factor"));
  cfg.lr_decay_interval = positive_int("lr_decay_interval", get("lr_decay_interval"));
  cfg.reuse_gen_batch = parse_flag("reuse_gen_batch", get("reuse_gen_batch"));
  cfg.non_saturating = parse_flag("non_saturating", get("non_saturating"));
  cfg.condition_on_gt = parse_flag("condition_on_gt", get("condition_on_gt"));
  return cfg;
}

GenOptions RunConfig::gen_options() const {
  GenOptions opt;
  opt.width = positive_int("grid_width", get("grid_width"));
  opt.height = positive_int("grid_height", get("grid_height"));
  opt.channels = positive_int("channels", get("channels"));
  opt.jitter_sigma = parse_number("jitter_sigma", get("jitter_sigma"));
  return opt;
}

ModelDims RunConfig::model_dims(const Vocabulary& vocab) const {
  ModelDims dims;
  dims.question_vocab = vocab.question.size();
  dims.explanation_vocab = vocab.explanation.size();
  dims.answer_vocab = vocab.answer.size();
  dims.channels = positive_int("channels", get("channels"));
  dims.word_emb = positive_int("word_emb", get("word_emb"));
  dims.question_hidden = positive_int("question_hidden", get("question_hidden"));
  dims.proj = positive_int("proj", get("proj"));
  dims.att_hidden = positive_int("att_hidden", get("att_hidden"));
  dims.answer_hidden = positive_int("answer_hidden", get("answer_hidden"));
  dims.dec_emb = positive_int("dec_emb", get("dec_emb"));
  dims.dec_hidden = positive_int("dec_hidden", get("dec_hidden"));
  dims.ans_cond = positive_int("ans_cond", get("ans_cond"));
  dims.disc_ans_emb = positive_int("disc_ans_emb", get("disc_ans_emb"));
  dims.disc_exp_emb = positive_int("disc_exp_emb", get("disc_exp_emb"));
  dims.disc_joint = positive_int("disc_joint", get("disc_joint"));
  return dims;
}

std::string render_manifest(const RunConfig& cfg, uint64_t dataset_checksum) {
  std::string out = "code_version = ";
  out += kCodeVersion;
  out += "\ndataset_checksum = ";
  out += std::to_string(dataset_checksum);
  out += "\n[config]\n";
  out += cfg.render();
  return out;
}

std::string render_timings(const std::vector<std::pair<std::string, double>>& phases) {
  std::string out = "phase = seconds\n";
  for (const auto& [name, seconds] : phases) {
    out += name;
    out += " = ";
    out += format_csv_number(seconds);
    out += '\n';
  }
  return out;
}

}  // namespace ccm
