#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccm/model.hpp"
#include "ccm/rng.hpp"
#include "ccm/tensor.hpp"
#include "ccm/toyvqa.hpp"
#include "ccm/vocab.hpp"

namespace ccm {

enum class PerturbKind {
  kGaussianFeature,
  kMaskWords,
  kReplaceWords,
  kBlur,
  kCombined,
};

std::string_view perturb_kind_name(PerturbKind kind);
PerturbKind parse_perturb_kind(std::string_view name);

// Adds i.i.d. noise drawn from Normal(mean, (alpha*stddev)^2) to every value.
// The two-argument overload uses the instance's own statistics: the sample
// mean and population standard deviation of the feature values, so alpha=0
// still shifts every value by that mean. Pass mean 0 for centered noise or
// corpus-level statistics for corpus-wide scaling.
Tensor gaussian_feature_noise(const Tensor& features, double alpha, Rng& rng);
Tensor gaussian_feature_noise(const Tensor& features, double alpha, Rng& rng,
                              double mean, double stddev);

// Replaces each token independently with the unknown id at probability p.
std::vector<int> mask_question_words(std::span<const int> tokens, double p, Rng& rng);

// Replaces each token independently at probability p by a uniform draw from
// the non-reserved part of the question vocabulary.
std::vector<int> replace_question_words(std::span<const int> tokens, double p,
                                        const TokenTable& vocab, Rng& rng);

// Per-channel spatial Gaussian blur of the [width*height, channels] grid:
// normalized kernel of radius ceil(3*sigma), half-sample symmetric borders,
// applied separably along x then y. sigma=0 returns the input unchanged.
Tensor blur_feature_grid(const Tensor& features, int width, int height, double sigma);

struct SweepSpec {
  PerturbKind kind = PerturbKind::kGaussianFeature;
  std::vector<double> intensities;  // alpha, p or sigma depending on kind
  std::vector<double> mask_probs;   // combined only: masking schedule, same length
  int samples = 50;
  uint64_t seed = 1;
  std::string metric = "bleu1";
};

struct SweepRow {
  PerturbKind kind = PerturbKind::kGaussianFeature;
  double intensity = 0.0;
  std::string metric;
  double mean = 0.0;
  double std_dev = 0.0;  // population std over samples; 0 when samples == 1
  int samples = 0;
  uint64_t seed = 0;
};

using SweepResult = std::vector<SweepRow>;

// For each intensity, decodes the whole perturbed dataset `samples` times and
// scores the corpus metric per pass. Sample r at intensity index i draws from
// the stream derive_seed(seed, "sweep", i, r), so removing a sample never
// changes the others. The combined kind applies feature noise at
// intensities[i] and word masking at mask_probs[i] in that order.
SweepResult robustness_sweep(const CcmModel& model,
                             const std::vector<EncodedInstance>& data,
                             const Vocabulary& vocab, const SweepSpec& spec);

// CSV rendering with header `kind,intensity,metric,mean,std,samples,seed`.
std::string sweep_to_csv(const SweepResult& result);

}  // namespace ccm
