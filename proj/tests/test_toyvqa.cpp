#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ccm/toyvqa.hpp"
#include "ccm/vocab.hpp"

using ccm::VQAInstance;
using ccm::Vocabulary;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string temp_path(const std::string& name) {
  return std::string("toyvqa_test_") + name;
}

bool same_instance(const VQAInstance& a, const VQAInstance& b) {
  return a.id == b.id && a.width == b.width && a.height == b.height &&
         a.channels == b.channels && a.features == b.features &&
         a.question == b.question && a.answer == b.answer &&
         a.explanation == b.explanation && a.gt_attention == b.gt_attention;
}

// Independent scene reader: recovers objects from the feature grid by nearest
// code, then answers the question from scratch. Used to certify the task is
// solvable from (features, question) alone.
std::string solve_by_nearest_code(const VQAInstance& inst) {
  struct Obj {
    int color, shape;
  };
  std::vector<Obj> objects;
  const int ncells = inst.width * inst.height;
  for (int j = 0; j < ncells; ++j) {
    int best = -1;
    double best_v = 0.5;  // empty-cell threshold: codes are 1, jitter is 0.05
    for (int c = 0; c < 12; ++c) {
      const double v = inst.features[static_cast<std::size_t>(j * inst.channels + c)];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    if (best >= 0) objects.push_back({best / 3, best % 3});
  }

  auto color_index = [](const std::string& w) {
    for (int i = 0; i < 4; ++i)
      if (w == ccm::kColors[static_cast<std::size_t>(i)]) return i;
    return -1;
  };
  auto shape_index = [](const std::string& w) {
    for (int i = 0; i < 3; ++i)
      if (w == ccm::kShapes[static_cast<std::size_t>(i)]) return i;
    return -1;
  };

  const auto& q = inst.question;
  if (q.size() == 5 && q[0] == "what" && q[1] == "color") {
    const int s = shape_index(q[4]);
    for (const Obj& o : objects)
      if (o.shape == s) return std::string(ccm::kColors[static_cast<std::size_t>(o.color)]);
  } else if (q.size() == 6 && q[0] == "what" && q[1] == "shape") {
    const int c = color_index(q[4]);
    for (const Obj& o : objects)
      if (o.color == c) return std::string(ccm::kShapes[static_cast<std::size_t>(o.shape)]);
  } else if (q.size() == 5 && q[0] == "is" && q[1] == "there") {
    const int c = color_index(q[3]);
    const int s = shape_index(q[4]);
    for (const Obj& o : objects)
      if (o.color == c && o.shape == s) return "yes";
    return "no";
  }
  return "";
}

}  // namespace

TEST_CASE("generation is deterministic per (seed, index)") {
  const VQAInstance a = ccm::generate_instance(77, 3);
  const VQAInstance b = ccm::generate_instance(77, 3);
  CHECK(same_instance(a, b));
  const VQAInstance c = ccm::generate_instance(77, 4);
  CHECK_FALSE(same_instance(a, c));
  const VQAInstance d = ccm::generate_instance(78, 3);
  CHECK_FALSE(same_instance(a, d));
}

TEST_CASE("ground-truth attention is a distribution focused on the target") {
  int onehot = 0, uniform = 0;
  for (int i = 0; i < 200; ++i) {
    const VQAInstance inst = ccm::generate_instance(5, i);
    double mass = 0.0, peak = 0.0;
    for (double v : inst.gt_attention) {
      CHECK(v >= 0.0);
      mass += v;
      peak = std::max(peak, v);
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    if (inst.answer == "no") {
      CHECK(peak == doctest::Approx(1.0 / 16).epsilon(1e-12));
      ++uniform;
    } else {
      CHECK(peak == 1.0);
      ++onehot;
    }
  }
  CHECK(onehot > 0);
  CHECK(uniform > 0);
}

TEST_CASE("answer classes are close to uniform over a large census") {
  std::map<std::string, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[ccm::generate_instance(123, i).answer]++;
  REQUIRE(counts.size() == 9);
  for (const auto& [answer, count] : counts) {
    INFO("answer ", answer, " count ", count);
    CHECK(count > n / 9.0 * 0.7);
    CHECK(count < n / 9.0 * 1.3);
  }
}

TEST_CASE("the task is solvable from features and question alone") {
  int correct = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const VQAInstance inst = ccm::generate_instance(31, i);
    if (solve_by_nearest_code(inst) == inst.answer) ++correct;
  }
  CHECK(correct >= n * 99 / 100);
}

TEST_CASE("save and load round-trip and produce identical bytes") {
  const auto data = ccm::generate_dataset(100, 9);
  const std::string path = temp_path("roundtrip.jsonl");
  ccm::save_dataset(data, path);
  const std::string bytes1 = read_file(path);
  ccm::save_dataset(data, path);
  CHECK(read_file(path) == bytes1);

  const auto back = ccm::load_dataset(path);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(same_instance(data[i], back[i]));
  std::remove(path.c_str());
}

TEST_CASE("malformed files report the offending line") {
  const auto data = ccm::generate_dataset(3, 2);
  const std::string path = temp_path("malformed.jsonl");
  ccm::save_dataset(data, path);

  std::string text = read_file(path);
  // Truncate in the middle of the last record (line 4).
  std::ofstream(path, std::ios::binary) << text.substr(0, text.size() - 30);
  CHECK_THROWS_WITH_AS(ccm::load_dataset(path), doctest::Contains("line 4"),
                       std::runtime_error);

  // Damage a field on line 2.
  std::istringstream lines(text);
  std::string header, rec;
  std::getline(lines, header);
  std::getline(lines, rec);
  const auto pos = rec.find("\"question\"");
  REQUIRE(pos != std::string::npos);
  std::string damaged = rec;
  damaged.replace(pos, 10, "\"queXtion\"");
  std::ofstream(path, std::ios::binary) << header << '\n' << damaged << '\n';
  CHECK_THROWS_WITH_AS(ccm::load_dataset(path), doctest::Contains("question"),
                       std::runtime_error);

  // Missing version record.
  std::ofstream(path, std::ios::binary) << rec << '\n';
  CHECK_THROWS_WITH_AS(ccm::load_dataset(path), doctest::Contains("version"),
                       std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("vocabulary has stable reserved ids and first-appearance order") {
  const auto data = ccm::generate_dataset(200, 4);
  const Vocabulary vocab = ccm::build_vocab(data);
  CHECK(vocab.question.token_of(ccm::kPadId) == "<pad>");
  CHECK(vocab.question.token_of(ccm::kEndId) == "<end>");
  CHECK(vocab.question.token_of(ccm::kUnkId) == "<unk>");
  CHECK(vocab.explanation.token_of(ccm::kUnkId) == "<unk>");
  CHECK(vocab.answer.size() == 9);

  // Round-trip: every question word encodes then decodes to itself.
  for (const auto& inst : data)
    for (const auto& w : inst.question)
      CHECK(vocab.question.token_of(vocab.question.require(w)) == w);

  // Reversed corpus covers the same tokens, ids may differ.
  auto reversed = data;
  std::reverse(reversed.begin(), reversed.end());
  const Vocabulary rvocab = ccm::build_vocab(reversed);
  CHECK(rvocab.question.size() == vocab.question.size());
  CHECK(rvocab.explanation.size() == vocab.explanation.size());
  for (int id = 0; id < vocab.question.size(); ++id)
    CHECK(rvocab.question.id_of(vocab.question.token_of(id)) >= 0);

  CHECK_THROWS_AS(ccm::build_vocab({}), std::invalid_argument);

  // Checksums separate distinct vocabularies.
  CHECK(vocab.checksum() != rvocab.checksum());
  CHECK(vocab.checksum() == ccm::build_vocab(data).checksum());
}

TEST_CASE("encoding uses ids, appends the end marker and validates tokens") {
  const auto data = ccm::generate_dataset(50, 8);
  const Vocabulary vocab = ccm::build_vocab(data);
  const auto encoded = ccm::encode_instances(data, vocab);
  REQUIRE(encoded.size() == data.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const auto& enc = encoded[i];
    CHECK(enc.question.size() == data[i].question.size());
    CHECK(enc.explanation.size() == data[i].explanation.size() + 1);
    CHECK(enc.explanation.back() == ccm::kEndId);
    CHECK(enc.features.shape == ccm::Shape{16, 16});
    CHECK(vocab.answer.token_of(enc.answer) == data[i].answer);
    for (int t : enc.explanation)
      CHECK(t < vocab.explanation.size());
  }

  // A token missing from the vocabulary is a hard error.
  auto broken = data;
  broken[0].question[0] = "unseen";
  Vocabulary small = ccm::build_vocab(data);
  CHECK_THROWS_WITH_AS(ccm::encode_instances(broken, small), doctest::Contains("unseen"),
                       std::runtime_error);
}

TEST_CASE("splits are contiguous and size-checked") {
  const auto data = ccm::generate_dataset(20, 6);
  const auto encoded = ccm::encode_instances(data, ccm::build_vocab(data));
  ccm::SplitSizes sizes{10, 5, 5};
  const auto splits = ccm::split_dataset(encoded, sizes);
  CHECK(splits.train.size() == 10);
  CHECK(splits.val.size() == 5);
  CHECK(splits.test.size() == 5);
  CHECK(splits.train.front().id == 0);
  CHECK(splits.val.front().id == 10);
  CHECK(splits.test.front().id == 15);
  ccm::SplitSizes too_big{18, 5, 5};
  CHECK_THROWS_AS(ccm::split_dataset(encoded, too_big), std::invalid_argument);
}
