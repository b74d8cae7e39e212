#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ccm {

// Word-frequency rings over the first five explanation positions: one row
// per (position, preceding words, word) with the number of explanations that
// share it. Rows are ordered by position, then prefix, then word.
std::string sunburst_csv(const std::vector<std::string>& explanations);

struct ScoreMatrix {
  std::vector<std::string> models;
  std::vector<std::string> conditions;
  std::vector<std::vector<double>> scores;  // [model][condition]
};

// Parses a `model,<condition>...` header plus one score row per model.
// Errors carry origin:line context.
ScoreMatrix parse_score_matrix(std::string_view text, std::string_view origin);

// Mean rank per model from the Friedman ranking, closed by a
// `CD,<value>,p,<value>` footer row for the critical-difference diagram.
std::string cd_csv(const ScoreMatrix& matrix, double alpha = 0.05);

struct NamedSweep {
  std::string model;
  std::string origin;  // path used in error messages
  std::string text;    // sweep CSV content
};

// Robustness curves side by side: every sweep row under one header with the
// model name prepended.
std::string curves_csv(const std::vector<NamedSweep>& sweeps);

}  // namespace ccm
