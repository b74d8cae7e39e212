#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccm/tape.hpp"
#include "ccm/tensor.hpp"

namespace ccm {

// One named trainable array. Lives outside any tape; each training step binds
// it onto a fresh tape as a leaf.
struct Param {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Ordered, name-addressable parameter collection. Order is creation order and
// defines the serialized layout, so round-trips are byte-exact.
class ParamSet {
 public:
  int add(std::string name, Shape shape);
  int count() const { return static_cast<int>(items_.size()); }
  Param& at(int id) { return items_[static_cast<std::size_t>(id)]; }
  const Param& at(int id) const { return items_[static_cast<std::size_t>(id)]; }
  int find(std::string_view name) const;  // -1 when absent
  int64_t total_values() const;
  uint64_t content_hash() const;  // over names, shapes and value bits

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<Param> items_;
};

// Uniform init in [-sqrt(3/fan_in), +sqrt(3/fan_in)] for matrices (unit-fan
// variance), zeros for vectors (biases). Each parameter gets its own stream
// derived from the seed and its name, so adding parameters never shifts the
// others' values.
void init_params(ParamSet& ps, uint64_t seed);

// All parameters bound onto one tape, indexable by ParamSet id.
struct BoundParams {
  std::vector<ad::Var> vars;
  ad::Var operator[](int id) const { return vars[static_cast<std::size_t>(id)]; }
};

BoundParams bind_params(ad::Tape& tape, const ParamSet& ps, bool requires_grad);

// Binary parameter-record IO helpers (shared by the model container).
void write_param_record(std::string& out, const Param& p);
// Reads one record starting at `off`; advances `off`. Returns false at EOF.
bool read_param_record(std::string_view data, std::size_t& off, Param& p);

}  // namespace ccm
