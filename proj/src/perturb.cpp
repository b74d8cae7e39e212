#include "ccm/perturb.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "ccm/evaluate.hpp"
#include "ccm/textio.hpp"

namespace ccm {

namespace {

constexpr std::array<std::string_view, 5> kKindNames{
    "gaussian_feature", "mask_words", "replace_words", "blur", "combined"};

struct FeatureStats {
  double mean = 0.0;
  double stddev = 0.0;
};

FeatureStats instance_stats(const Tensor& features) {
  const double n = static_cast<double>(features.values.size());
  double sum = 0.0;
  for (double v : features.values) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : features.values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / n)};
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double v = std::exp(-(k * k) / (2.0 * sigma * sigma));
    w[static_cast<std::size_t>(k + radius)] = v;
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

// Half-sample symmetric index: ...2 1 0 | 0 1 2 ... n-1 | n-1 n-2...
int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

double corpus_score(const std::string& metric, const std::vector<EvalPair>& pairs) {
  if (metric == "bleu1") return bleu_corpus(pairs, 1);
  if (metric == "bleu2") return bleu_corpus(pairs, 2);
  if (metric == "bleu3") return bleu_corpus(pairs, 3);
  if (metric == "bleu4") return bleu_corpus(pairs, 4);
  double sum = 0.0;
  if (metric == "meteor") {
    for (const auto& p : pairs) sum += meteor_exact(p);
    return sum / static_cast<double>(pairs.size());
  }
  if (metric == "rouge_l") {
    for (const auto& p : pairs) sum += rouge_l(p);
    return sum / static_cast<double>(pairs.size());
  }
  if (metric == "cider") return cider(pairs).mean;
  throw std::invalid_argument(
      "sweep: unknown metric '" + metric +
      "' (expected bleu1..bleu4, meteor, rouge_l or cider)");
}

constexpr std::array<std::string_view, 7> kSweepMetrics{
    "bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l", "cider"};

void validate(const SweepSpec& spec, std::size_t data_size) {
  if (data_size == 0) throw std::invalid_argument("sweep: empty dataset");
  if (std::find(kSweepMetrics.begin(), kSweepMetrics.end(), spec.metric) ==
      kSweepMetrics.end())
    throw std::invalid_argument(
        "sweep: unknown metric '" + spec.metric +
        "' (expected bleu1..bleu4, meteor, rouge_l or cider)");
  if (spec.intensities.empty())
    throw std::invalid_argument("sweep: no intensities given");
  if (!std::is_sorted(spec.intensities.begin(), spec.intensities.end()))
    throw std::invalid_argument("sweep: intensities must be nondecreasing");
  for (double v : spec.intensities)
    if (v < 0.0) throw std::invalid_argument("sweep: intensities must be >= 0");
  if (spec.samples < 1) throw std::invalid_argument("sweep: samples must be >= 1");
  if (spec.kind == PerturbKind::kCombined &&
      spec.mask_probs.size() != spec.intensities.size())
    throw std::invalid_argument(
        "sweep: combined kind needs one mask probability per intensity");
}

}  // namespace

std::string_view perturb_kind_name(PerturbKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

PerturbKind parse_perturb_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<PerturbKind>(i);
  throw std::invalid_argument(
      "unknown perturbation kind '" + std::string(name) +
      "' (expected gaussian_feature, mask_words, replace_words, blur or combined)");
}

Tensor gaussian_feature_noise(const Tensor& features, double alpha, Rng& rng,
                              double mean, double stddev) {
  if (alpha < 0.0)
    throw std::invalid_argument("gaussian_feature_noise: alpha must be >= 0");
  Tensor out = features;
  const double scale = alpha * stddev;
  for (double& v : out.values) v += mean + scale * rng.normal_quantized();
  return out;
}

Tensor gaussian_feature_noise(const Tensor& features, double alpha, Rng& rng) {
  const FeatureStats st = instance_stats(features);
  return gaussian_feature_noise(features, alpha, rng, st.mean, st.stddev);
}

std::vector<int> mask_question_words(std::span<const int> tokens, double p, Rng& rng) {
  if (p < 0.0 || p > 1.0)
    throw std::invalid_argument("mask_question_words: p must be in [0, 1]");
  std::vector<int> out(tokens.begin(), tokens.end());
  for (int& t : out)
    if (rng.uniform_real() < p) t = kUnkId;
  return out;
}

std::vector<int> replace_question_words(std::span<const int> tokens, double p,
                                        const TokenTable& vocab, Rng& rng) {
  if (p < 0.0 || p > 1.0)
    throw std::invalid_argument("replace_question_words: p must be in [0, 1]");
  const int first = vocab.has_reserved() ? kUnkId + 1 : 0;
  const int pool = vocab.size() - first;
  if (pool <= 0)
    throw std::invalid_argument(
        "replace_question_words: vocabulary has no replacement tokens");
  std::vector<int> out(tokens.begin(), tokens.end());
  for (int& t : out)
    if (rng.uniform_real() < p)
      t = first + static_cast<int>(rng.uniform_u32(static_cast<uint32_t>(pool)));
  return out;
}

Tensor blur_feature_grid(const Tensor& features, int width, int height, double sigma) {
  if (sigma < 0.0)
    throw std::invalid_argument("blur_feature_grid: sigma must be >= 0");
  if (features.shape.size() != 2 ||
      features.shape[0] != width * height)
    throw std::invalid_argument("blur_feature_grid: features are not a " +
                                std::to_string(width) + "x" +
                                std::to_string(height) + " grid");
  if (sigma == 0.0) return features;

  const int channels = features.shape[1];
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const auto at = [&](const std::vector<double>& buf, int x, int y, int c) {
    return buf[static_cast<std::size_t>((y * width + x) * channels + c)];
  };

  std::vector<double> pass_x(features.values.size(), 0.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 at(features.values, reflect(x + k, width), y, c);
        pass_x[static_cast<std::size_t>((y * width + x) * channels + c)] = acc;
      }

  Tensor out = features;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 at(pass_x, x, reflect(y + k, height), c);
        out.values[static_cast<std::size_t>((y * width + x) * channels + c)] = acc;
      }
  return out;
}

SweepResult robustness_sweep(const CcmModel& model,
                             const std::vector<EncodedInstance>& data,
                             const Vocabulary& vocab, const SweepSpec& spec) {
  validate(spec, data.size());
  if (model.vocab_checksum() != vocab.checksum())
    throw std::invalid_argument(
        "sweep: model was trained with vocabulary checksum " +
        std::to_string(model.vocab_checksum()) + " but the dataset has " +
        std::to_string(vocab.checksum()));

  ad::Tape tape;
  const auto bound = model.bind(tape, false, false);
  const auto base = tape.mark();

  SweepResult result;
  result.reserve(spec.intensities.size());
  for (std::size_t i = 0; i < spec.intensities.size(); ++i) {
    const double intensity = spec.intensities[i];
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(spec.samples));
    for (int r = 0; r < spec.samples; ++r) {
      try {
        Rng rng(derive_seed(spec.seed, "sweep", i, static_cast<uint64_t>(r)));
        std::vector<EvalPair> pairs;
        pairs.reserve(data.size());
        for (const auto& inst : data) {
          EncodedInstance view = inst;
          switch (spec.kind) {
            case PerturbKind::kGaussianFeature:
              view.features = gaussian_feature_noise(inst.features, intensity, rng);
              break;
            case PerturbKind::kMaskWords:
              view.question = mask_question_words(inst.question, intensity, rng);
              break;
            case PerturbKind::kReplaceWords:
              view.question =
                  replace_question_words(inst.question, intensity, vocab.question, rng);
              break;
            case PerturbKind::kBlur:
              view.features =
                  blur_feature_grid(inst.features, inst.width, inst.height, intensity);
              break;
            case PerturbKind::kCombined:
              view.features = gaussian_feature_noise(inst.features, intensity, rng);
              view.question =
                  mask_question_words(inst.question, spec.mask_probs[i], rng);
              break;
          }
          tape.rewind(base);
          const Inference inf = infer_instance(tape, bound, view);
          pairs.push_back(scoring_pair(inf.explanation, inst.explanation,
                                       vocab.explanation));
        }
        scores.push_back(corpus_score(spec.metric, pairs));
      } catch (const std::exception& e) {
        throw std::runtime_error("sweep at intensity " + std::to_string(intensity) +
                                 " sample " + std::to_string(r) + ": " + e.what());
      }
    }

    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(scores.size());

    result.push_back({spec.kind, intensity, spec.metric, mean, std::sqrt(var),
                      spec.samples, spec.seed});
  }
  return result;
}

std::string sweep_to_csv(const SweepResult& result) {
  std::string out = "kind,intensity,metric,mean,std,samples,seed\n";
  for (const auto& row : result) {
    out += perturb_kind_name(row.kind);
    out += ',';
    out += format_csv_number(row.intensity);
    out += ',';
    out += row.metric;
    out += ',';
    out += format_csv_number(row.mean);
    out += ',';
    out += format_csv_number(row.std_dev);
    out += ',';
    out += std::to_string(row.samples);
    out += ',';
    out += std::to_string(row.seed);
    out += '\n';
  }
  return out;
}

}  // namespace ccm
