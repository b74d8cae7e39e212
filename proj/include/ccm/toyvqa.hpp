#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ccm/tensor.hpp"
#include "ccm/vocab.hpp"

namespace ccm {

inline constexpr std::array<std::string_view, 4> kColors{"red", "green", "blue", "yellow"};
inline constexpr std::array<std::string_view, 3> kShapes{"circle", "square", "triangle"};

struct ToyObject {
  int color;  // index into kColors
  int shape;  // index into kShapes
  int x;
  int y;
};

struct ToyScene {
  int width;
  int height;
  std::vector<ToyObject> objects;  // at most one per cell, cells unique
};

// One dataset record in its on-disk (string token) form. Feature rows are
// cell-major: row j describes cell (x, y) with j = y*width + x.
struct VQAInstance {
  int id = 0;
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> features;           // [width*height, channels] row-major
  std::vector<std::string> question;
  std::string answer;
  std::vector<std::string> explanation;   // end marker is added at encode time
  std::vector<double> gt_attention;       // length width*height, sums to 1
};

// Generation defaults. Channels must cover the 12 (color, shape) codes.
struct GenOptions {
  int width = 4;
  int height = 4;
  int channels = 16;
  double jitter_sigma = 0.05;
};

// Deterministic per (seed, index): each instance draws from its own derived
// stream, so generation order and parallelism cannot change any instance.
VQAInstance generate_instance(uint64_t seed, int index, const GenOptions& opt = {});
std::vector<VQAInstance> generate_dataset(int n, uint64_t seed, const GenOptions& opt = {});

// Line-delimited JSON with a version record on line 1. Same instances always
// serialize to the same bytes.
void save_dataset(const std::vector<VQAInstance>& instances, const std::string& path);
std::vector<VQAInstance> load_dataset(const std::string& path);

// First-appearance vocabulary over the whole instance list (file order).
Vocabulary build_vocab(const std::vector<VQAInstance>& instances);

// Model-facing view: ids instead of strings, features as a tensor, and the
// explanation terminated with the end id.
struct EncodedInstance {
  int id = 0;
  int width = 0;
  int height = 0;
  Tensor features;                 // [N, C]
  std::vector<int> question;
  int answer = 0;
  std::vector<int> explanation;    // ends with kEndId
  std::vector<double> gt_attention;
};

std::vector<EncodedInstance> encode_instances(const std::vector<VQAInstance>& instances,
                                              const Vocabulary& vocab);

struct SplitSizes {
  int train = 1000;
  int val = 200;
  int test = 200;
};

struct DatasetSplits {
  std::vector<EncodedInstance> train;
  std::vector<EncodedInstance> val;
  std::vector<EncodedInstance> test;
};

// Contiguous index split: [0, train), [train, train+val), then test.
DatasetSplits split_dataset(const std::vector<EncodedInstance>& instances,
                            const SplitSizes& sizes);

}  // namespace ccm
