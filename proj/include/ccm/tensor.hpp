#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ccm {

// Row-major dimensions. Rank is 1 or 2 everywhere the tape is involved;
// dataset feature grids flatten to [cells, channels] before entering a graph.
using Shape = std::vector<int>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

// Plain value tensor: storage only, no graph state. Graph-bound tensors live
// on a Tape and are addressed through Var handles (see tape.hpp).
struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> v);

  int64_t size() const { return static_cast<int64_t>(values.size()); }
};

}  // namespace ccm
