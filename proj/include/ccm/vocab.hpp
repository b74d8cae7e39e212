#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ccm {

// Reserved ids shared by the question and explanation vocabularies. The pad
// id doubles as the decoder start-of-sequence input; the unknown id is the
// mask token used by word-level perturbations.
inline constexpr int kPadId = 0;
inline constexpr int kEndId = 1;
inline constexpr int kUnkId = 2;

// One direction-indexed token table with stable reserved entries. Ids are
// assigned in first-appearance order after the reserved block.
class TokenTable {
 public:
  // `reserved` seeds <pad>/<end>/<unk>; answer tables run without them.
  explicit TokenTable(bool reserved);

  int add(const std::string& token);       // existing id if already present
  int id_of(std::string_view token) const; // -1 when absent
  int require(std::string_view token) const;  // throws on absence
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool has_reserved() const { return reserved_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  bool reserved_;
};

// Question words, explanation words and answers, built over a whole dataset
// in file order so the same file always yields the same ids.
struct Vocabulary {
  Vocabulary() : question(true), explanation(true), answer(false) {}

  TokenTable question;
  TokenTable explanation;
  TokenTable answer;

  // Order-sensitive digest over all three tables; persisted with trained
  // models so evaluation can refuse a mismatched dataset.
  uint64_t checksum() const;
};

}  // namespace ccm
