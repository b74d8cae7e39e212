#include "ccm/vocab.hpp"

#include <stdexcept>

#include "ccm/rng.hpp"

namespace ccm {

TokenTable::TokenTable(bool reserved) : reserved_(reserved) {
  if (reserved_) {
    add("<pad>");
    add("<end>");
    add("<unk>");
  }
}

int TokenTable::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int TokenTable::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

int TokenTable::require(std::string_view token) const {
  const int id = id_of(token);
  if (id < 0) throw std::runtime_error("vocabulary: unknown token '" + std::string(token) + "'");
  return id;
}

const std::string& TokenTable::token_of(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(size()) + ")");
  return tokens_[static_cast<std::size_t>(id)];
}

uint64_t Vocabulary::checksum() const {
  uint64_t h = kFnvBasis;
  for (const TokenTable* table : {&question, &explanation, &answer}) {
    h = fnv1a_u64(static_cast<uint64_t>(table->size()), h);
    for (int id = 0; id < table->size(); ++id) {
      h = fnv1a(table->token_of(id), h);
      h = fnv1a_u64(static_cast<uint64_t>(id), h);
    }
  }
  return h;
}

}  // namespace ccm
