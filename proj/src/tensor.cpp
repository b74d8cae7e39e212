#include "ccm/tensor.hpp"

#include <stdexcept>

namespace ccm {

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("shape dims must be positive, got " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

Tensor::Tensor(Shape s, double fill)
    : shape(std::move(s)), values(static_cast<std::size_t>(numel(shape)), fill) {}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (numel(shape) != static_cast<int64_t>(values.size()))
    throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape));
}

}  // namespace ccm
