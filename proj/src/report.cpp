#include "ccm/report.hpp"

#include <charconv>
#include <map>
#include <stdexcept>
#include <tuple>

#include "ccm/metrics.hpp"
#include "ccm/textio.hpp"

namespace ccm {

namespace {

constexpr int kSunburstRings = 5;
constexpr std::string_view kSweepHeader = "kind,intensity,metric,mean,std,samples,seed";

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ') ++end;
    if (end > pos) out.emplace_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

// Splits into lines, dropping the trailing empty piece a final newline makes.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    pos = eol + 1;
  }
  return out;
}

[[noreturn]] void fail_at(std::string_view origin, std::size_t line_no,
                          const std::string& why) {
  throw std::invalid_argument(std::string(origin) + ":" + std::to_string(line_no) +
                              ": " + why);
}

}  // namespace

std::string sunburst_csv(const std::vector<std::string>& explanations) {
  std::map<std::tuple<int, std::string, std::string>, long> counts;
  for (const auto& line : explanations) {
    const auto words = split_words(line);
    const int rings = std::min<int>(kSunburstRings, static_cast<int>(words.size()));
    std::string prefix;
    for (int p = 0; p < rings; ++p) {
      ++counts[{p + 1, prefix, words[static_cast<std::size_t>(p)]}];
      if (p > 0) prefix += ' ';
      prefix += words[static_cast<std::size_t>(p)];
    }
  }
  std::string out = "position,prefix,word,count\n";
  for (const auto& [key, count] : counts) {
    out += std::to_string(std::get<0>(key));
    out += ',';
    out += std::get<1>(key);
    out += ',';
    out += std::get<2>(key);
    out += ',';
    out += std::to_string(count);
    out += '\n';
  }
  return out;
}

ScoreMatrix parse_score_matrix(std::string_view text, std::string_view origin) {
  const auto lines = split_lines(text);
  if (lines.empty()) fail_at(origin, 1, "empty score matrix");

  const auto header = split_fields(lines[0]);
  if (header.size() < 2 || header[0] != "model")
    fail_at(origin, 1, "expected header 'model,<condition>,...'");

  ScoreMatrix matrix;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i].empty()) fail_at(origin, 1, "empty condition name");
    matrix.conditions.emplace_back(header[i]);
  }

  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto fields = split_fields(lines[li]);
    if (fields.size() != header.size())
      fail_at(origin, li + 1,
              "expected " + std::to_string(header.size()) + " fields, got " +
                  std::to_string(fields.size()));
    if (fields[0].empty()) fail_at(origin, li + 1, "empty model name");
    matrix.models.emplace_back(fields[0]);
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t f = 1; f < fields.size(); ++f) {
      double v = 0.0;
      const auto [ptr, ec] =
          std::from_chars(fields[f].data(), fields[f].data() + fields[f].size(), v);
      if (ec != std::errc() || ptr != fields[f].data() + fields[f].size())
        fail_at(origin, li + 1, "invalid number '" + std::string(fields[f]) + "'");
      row.push_back(v);
    }
    matrix.scores.push_back(std::move(row));
  }
  if (matrix.models.size() < 2)
    fail_at(origin, lines.size(), "need at least 2 model rows");
  return matrix;
}

std::string cd_csv(const ScoreMatrix& matrix, double alpha) {
  const FriedmanResult result = friedman_nemenyi(matrix.scores, alpha);
  std::string out = "model,mean_rank\n";
  for (std::size_t i = 0; i < matrix.models.size(); ++i) {
    out += matrix.models[i];
    out += ',';
    out += format_csv_number(result.mean_ranks[i]);
    out += '\n';
  }
  out += "CD,";
  out += format_csv_number(result.cd);
  out += ",p,";
  out += format_csv_number(result.p_value);
  out += '\n';
  return out;
}

std::string curves_csv(const std::vector<NamedSweep>& sweeps) {
  std::string out = "model,";
  out += kSweepHeader;
  out += '\n';
  for (const auto& sweep : sweeps) {
    const auto lines = split_lines(sweep.text);
    if (lines.empty() || lines[0] != kSweepHeader)
      fail_at(sweep.origin, 1,
              "expected sweep header '" + std::string(kSweepHeader) + "'");
    for (std::size_t li = 1; li < lines.size(); ++li) {
      if (lines[li].empty()) continue;
      const auto fields = split_fields(lines[li]);
      if (fields.size() != 7)
        fail_at(sweep.origin, li + 1,
                "expected 7 fields, got " + std::to_string(fields.size()));
      out += sweep.model;
      out += ',';
      out += lines[li];
      out += '\n';
    }
  }
  return out;
}

}  // namespace ccm
