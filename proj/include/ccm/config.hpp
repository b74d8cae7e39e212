#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ccm/model.hpp"
#include "ccm/toyvqa.hpp"
#include "ccm/trainer.hpp"

namespace ccm {

inline constexpr std::string_view kCodeVersion = "ccmlab 1.0.0";

// Flat `key = value` run configuration with a closed key set. Defaults come
// first, then file entries, then single-key overrides from CLI flags; the
// resolved merge renders canonically so a manifest can freeze it. Unknown
// keys fail at parse time and validate() checks every value before a command
// touches the filesystem.
class RunConfig {
 public:
  RunConfig();

  // Registry order; also the render order.
  static const std::vector<std::string>& keys();

  // Applies file content. Lines hold `key = value`; '#' starts a comment and
  // blank lines are skipped. origin names the file in error messages.
  void apply_text(std::string_view text, std::string_view origin);

  void set(std::string_view key, std::string_view value);
  const std::string& get(std::string_view key) const;

  // Range and format checks over the whole key set.
  void validate() const;

  // Canonical `key = value` block over all keys.
  std::string render() const;

  uint64_t seed() const;
  TrainConfig train_config() const;
  GenOptions gen_options() const;
  ModelDims model_dims(const Vocabulary& vocab) const;

  std::string data_path() const { return get("data"); }
  std::string model_path() const { return get("model"); }
  std::string out_dir() const { return get("out_dir"); }
  std::string split() const { return get("split"); }

 private:
  int index_of(std::string_view key) const;  // -1 when unknown

  std::vector<std::pair<std::string, std::string>> values_;
};

// Audit header written before training starts and never touched again:
// code version, input digest and the frozen configuration. Wall-clock phase
// timings change run to run, so they live in a separate timings file and
// every other artifact stays byte-stable.
std::string render_manifest(const RunConfig& cfg, uint64_t dataset_checksum);

std::string render_timings(const std::vector<std::pair<std::string, double>>& phases);

}  // namespace ccm
