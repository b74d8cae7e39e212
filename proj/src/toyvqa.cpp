#include "ccm/toyvqa.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ccm/rng.hpp"

namespace ccm {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

enum class QType { Color, Shape, Exists };

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

int take_free_cell(std::vector<int>& free_cells, Rng& rng) {
  const auto k = rng.uniform_u32(static_cast<uint32_t>(free_cells.size()));
  const int cell = free_cells[k];
  free_cells[k] = free_cells.back();
  free_cells.pop_back();
  return cell;
}

// (color, shape) pair index in [0, 12); also the feature code channel.
int pair_code(int color, int shape) { return color * static_cast<int>(kShapes.size()) + shape; }

}  // namespace

VQAInstance generate_instance(uint64_t seed, int index, const GenOptions& opt) {
  const int ncells = opt.width * opt.height;
  const int ncodes = static_cast<int>(kColors.size() * kShapes.size());
  if (opt.channels < ncodes)
    throw std::invalid_argument("generate_instance: channels must be >= " +
                                std::to_string(ncodes));
  if (ncells < 6)
    throw std::invalid_argument("generate_instance: grid too small for distractor placement");

  Rng rng(derive_seed(seed, "instance", static_cast<uint64_t>(index)));

  // One draw fixes both the question type and the answer class, keeping the
  // nine answer classes exactly uniform in expectation.
  const uint32_t pick = rng.uniform_u32(9);
  QType qtype;
  int color = -1, shape = -1;
  bool exists = false;
  if (pick < 4) {
    qtype = QType::Color;
    color = static_cast<int>(pick);
    shape = static_cast<int>(rng.uniform_u32(3));
  } else if (pick < 7) {
    qtype = QType::Shape;
    shape = static_cast<int>(pick - 4);
    color = static_cast<int>(rng.uniform_u32(4));
  } else {
    qtype = QType::Exists;
    exists = pick == 7;
    color = static_cast<int>(rng.uniform_u32(4));
    shape = static_cast<int>(rng.uniform_u32(3));
  }

  ToyScene scene{opt.width, opt.height, {}};
  std::vector<int> free_cells(static_cast<std::size_t>(ncells));
  for (int j = 0; j < ncells; ++j) free_cells[static_cast<std::size_t>(j)] = j;

  int target_cell = -1;
  if (qtype != QType::Exists || exists) {
    target_cell = take_free_cell(free_cells, rng);
    scene.objects.push_back(
        {color, shape, target_cell % opt.width, target_cell / opt.width});
  }

  // Distractors never collide with what makes the question uniquely
  // answerable: color questions keep the target shape unique, shape questions
  // keep the target color unique, existence questions exclude the exact pair.
  const int min_distractors = (qtype == QType::Exists && !exists) ? 1 : 0;
  const int n_distractors = min_distractors + static_cast<int>(rng.uniform_u32(5));
  for (int d = 0; d < n_distractors; ++d) {
    int dcolor = 0, dshape = 0;
    switch (qtype) {
      case QType::Color:
        dcolor = static_cast<int>(rng.uniform_u32(4));
        dshape = static_cast<int>(rng.uniform_u32(2));
        if (dshape >= shape) ++dshape;
        break;
      case QType::Shape:
        dcolor = static_cast<int>(rng.uniform_u32(3));
        if (dcolor >= color) ++dcolor;
        dshape = static_cast<int>(rng.uniform_u32(3));
        break;
      case QType::Exists: {
        const int p = static_cast<int>(rng.uniform_u32(11));
        const int skip = pair_code(color, shape);
        const int code = p >= skip ? p + 1 : p;
        dcolor = code / 3;
        dshape = code % 3;
        break;
      }
    }
    const int cell = take_free_cell(free_cells, rng);
    scene.objects.push_back({dcolor, dshape, cell % opt.width, cell / opt.width});
  }

  VQAInstance inst;
  inst.id = index;
  inst.width = opt.width;
  inst.height = opt.height;
  inst.channels = opt.channels;

  const std::string color_word(kColors[static_cast<std::size_t>(color)]);
  const std::string shape_word(kShapes[static_cast<std::size_t>(shape)]);
  switch (qtype) {
    case QType::Color:
      inst.question = {"what", "color", "is", "the", shape_word};
      inst.answer = color_word;
      inst.explanation = {"because", "the", shape_word, "is", color_word};
      break;
    case QType::Shape:
      inst.question = {"what", "shape", "is", "the", color_word, "object"};
      inst.answer = shape_word;
      inst.explanation = {"because", "the", color_word, "object", "is", "a", shape_word};
      break;
    case QType::Exists:
      inst.question = {"is", "there", "a", color_word, shape_word};
      inst.answer = exists ? "yes" : "no";
      inst.explanation = {"because", "there", "is", exists ? "a" : "no",
                          color_word, shape_word};
      break;
  }

  // Per-cell features: the orthonormal code channel of the (color, shape)
  // pair plus Gaussian jitter on every channel. Empty cells are pure jitter.
  inst.features.assign(static_cast<std::size_t>(ncells * opt.channels), 0.0);
  for (const ToyObject& obj : scene.objects) {
    const int cell = obj.y * opt.width + obj.x;
    inst.features[static_cast<std::size_t>(cell * opt.channels + pair_code(obj.color, obj.shape))] = 1.0;
  }
  for (double& v : inst.features) v += opt.jitter_sigma * rng.normal_quantized();

  if (target_cell >= 0) {
    inst.gt_attention.assign(static_cast<std::size_t>(ncells), 0.0);
    inst.gt_attention[static_cast<std::size_t>(target_cell)] = 1.0;
  } else {
    // "no" answers have no relevant cell; the mask is uniform.
    inst.gt_attention.assign(static_cast<std::size_t>(ncells), 1.0 / ncells);
  }
  return inst;
}

std::vector<VQAInstance> generate_dataset(int n, uint64_t seed, const GenOptions& opt) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  std::vector<VQAInstance> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(generate_instance(seed, i, opt));
  return out;
}

void save_dataset(const std::vector<VQAInstance>& instances, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_dataset: cannot open '" + path + "' for writing");
  out << json{{"version", kFormatVersion}}.dump() << '\n';
  for (const VQAInstance& inst : instances) {
    const int ncells = inst.width * inst.height;
    json features = json::array();
    for (int j = 0; j < ncells; ++j) {
      json row = json::array();
      for (int c = 0; c < inst.channels; ++c)
        row.push_back(inst.features[static_cast<std::size_t>(j * inst.channels + c)]);
      features.push_back(std::move(row));
    }
    const json rec{
        {"id", inst.id},
        {"width", inst.width},
        {"height", inst.height},
        {"channels", inst.channels},
        {"features", std::move(features)},
        {"question", join(inst.question)},
        {"answer", inst.answer},
        {"explanation", join(inst.explanation)},
        {"gt_attention", inst.gt_attention},
    };
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("save_dataset: write to '" + path + "' failed");
}

namespace {

[[noreturn]] void line_error(int line, const std::string& what) {
  throw std::runtime_error("dataset file: line " + std::to_string(line) + ": " + what);
}

template <typename T>
T field(const json& rec, const char* name, int line) {
  if (!rec.contains(name)) line_error(line, std::string("missing field '") + name + "'");
  try {
    return rec.at(name).get<T>();
  } catch (const json::exception&) {
    line_error(line, std::string("field '") + name + "' has the wrong type");
  }
}

}  // namespace

std::vector<VQAInstance> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open '" + path + "'");

  std::string text;
  int line_no = 0;
  if (!std::getline(in, text)) throw std::runtime_error("load_dataset: '" + path + "' is empty");
  ++line_no;
  json header = json::parse(text, nullptr, false);
  if (header.is_discarded() || !header.contains("version"))
    line_error(line_no, "expected a version record");
  if (header.at("version").get<int>() != kFormatVersion)
    line_error(line_no, "unsupported format version");

  std::vector<VQAInstance> out;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) line_error(line_no, "empty line");
    const json rec = json::parse(text, nullptr, false);
    if (rec.is_discarded()) line_error(line_no, "not valid JSON");

    VQAInstance inst;
    inst.id = field<int>(rec, "id", line_no);
    inst.width = field<int>(rec, "width", line_no);
    inst.height = field<int>(rec, "height", line_no);
    inst.channels = field<int>(rec, "channels", line_no);
    if (inst.width < 1 || inst.height < 1 || inst.channels < 1)
      line_error(line_no, "field 'width'/'height'/'channels' must be positive");
    const int ncells = inst.width * inst.height;

    const auto features = field<std::vector<std::vector<double>>>(rec, "features", line_no);
    if (static_cast<int>(features.size()) != ncells)
      line_error(line_no, "field 'features' must have width*height rows");
    inst.features.reserve(static_cast<std::size_t>(ncells * inst.channels));
    for (const auto& row : features) {
      if (static_cast<int>(row.size()) != inst.channels)
        line_error(line_no, "field 'features' row width must equal channels");
      inst.features.insert(inst.features.end(), row.begin(), row.end());
    }

    inst.question = split_words(field<std::string>(rec, "question", line_no));
    if (inst.question.empty()) line_error(line_no, "field 'question' is empty");
    inst.answer = field<std::string>(rec, "answer", line_no);
    if (inst.answer.empty()) line_error(line_no, "field 'answer' is empty");
    inst.explanation = split_words(field<std::string>(rec, "explanation", line_no));
    if (inst.explanation.empty()) line_error(line_no, "field 'explanation' is empty");

    inst.gt_attention = field<std::vector<double>>(rec, "gt_attention", line_no);
    if (static_cast<int>(inst.gt_attention.size()) != ncells)
      line_error(line_no, "field 'gt_attention' must have width*height entries");
    double mass = 0.0;
    for (double v : inst.gt_attention) {
      if (v < 0.0) line_error(line_no, "field 'gt_attention' has a negative entry");
      mass += v;
    }
    if (std::abs(mass - 1.0) > 1e-9)
      line_error(line_no, "field 'gt_attention' must sum to 1");

    out.push_back(std::move(inst));
  }
  return out;
}

Vocabulary build_vocab(const std::vector<VQAInstance>& instances) {
  if (instances.empty()) throw std::invalid_argument("build_vocab: no instances");
  Vocabulary vocab;
  for (const VQAInstance& inst : instances) {
    for (const std::string& w : inst.question) vocab.question.add(w);
    for (const std::string& w : inst.explanation) vocab.explanation.add(w);
    vocab.answer.add(inst.answer);
  }
  return vocab;
}

std::vector<EncodedInstance> encode_instances(const std::vector<VQAInstance>& instances,
                                              const Vocabulary& vocab) {
  std::vector<EncodedInstance> out;
  out.reserve(instances.size());
  for (const VQAInstance& inst : instances) {
    EncodedInstance enc;
    enc.id = inst.id;
    enc.width = inst.width;
    enc.height = inst.height;
    enc.features = Tensor({inst.width * inst.height, inst.channels}, inst.features);
    for (const std::string& w : inst.question) enc.question.push_back(vocab.question.require(w));
    enc.answer = vocab.answer.require(inst.answer);
    for (const std::string& w : inst.explanation)
      enc.explanation.push_back(vocab.explanation.require(w));
    enc.explanation.push_back(kEndId);
    enc.gt_attention = inst.gt_attention;
    out.push_back(std::move(enc));
  }
  return out;
}

DatasetSplits split_dataset(const std::vector<EncodedInstance>& instances,
                            const SplitSizes& sizes) {
  if (sizes.train < 1 || sizes.val < 1 || sizes.test < 1)
    throw std::invalid_argument("split_dataset: all split sizes must be >= 1");
  const std::size_t need =
      static_cast<std::size_t>(sizes.train) + static_cast<std::size_t>(sizes.val) +
      static_cast<std::size_t>(sizes.test);
  if (instances.size() < need)
    throw std::invalid_argument("split_dataset: need " + std::to_string(need) +
                                " instances, have " + std::to_string(instances.size()));
  DatasetSplits s;
  auto it = instances.begin();
  s.train.assign(it, it + sizes.train);
  it += sizes.train;
  s.val.assign(it, it + sizes.val);
  it += sizes.val;
  s.test.assign(it, it + sizes.test);
  return s;
}

}  // namespace ccm
