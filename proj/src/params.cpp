#include "ccm/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "ccm/rng.hpp"

namespace ccm {

int ParamSet::add(std::string name, Shape shape) {
  if (find(name) >= 0)
    throw std::invalid_argument("duplicate parameter name: " + name);
  Param p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.values.assign(static_cast<std::size_t>(numel(p.shape)), 0.0);
  items_.push_back(std::move(p));
  return static_cast<int>(items_.size()) - 1;
}

int ParamSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (items_[i].name == name) return static_cast<int>(i);
  return -1;
}

int64_t ParamSet::total_values() const {
  int64_t n = 0;
  for (const Param& p : items_) n += static_cast<int64_t>(p.values.size());
  return n;
}

uint64_t ParamSet::content_hash() const {
  uint64_t h = 14695981039346656037ULL;
  for (const Param& p : items_) {
    h = fnv1a(p.name, h);
    for (int d : p.shape) h = fnv1a_u64(static_cast<uint64_t>(d), h);
    h = fnv1a_bytes(p.values.data(), p.values.size() * sizeof(double), h);
  }
  return h;
}

void init_params(ParamSet& ps, uint64_t seed) {
  for (Param& p : ps) {
    if (p.shape.size() < 2) continue;  // biases stay zero
    Rng rng(derive_seed(seed, "init", fnv1a(p.name)));
    const double limit = std::sqrt(3.0 / static_cast<double>(p.shape[1]));
    for (double& v : p.values) v = rng.uniform_range(-limit, limit);
  }
}

BoundParams bind_params(ad::Tape& tape, const ParamSet& ps, bool requires_grad) {
  BoundParams out;
  out.vars.reserve(static_cast<std::size_t>(ps.count()));
  for (const Param& p : ps)
    out.vars.push_back(tape.leaf(p.shape, p.values, requires_grad));
  return out;
}

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v) {
  const uint64_t bits = std::bit_cast<uint64_t>(v);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

bool get_u32(std::string_view data, std::size_t& off, uint32_t& v) {
  if (off + 4 > data.size()) return false;
  v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(static_cast<unsigned char>(data[off + i])) << (8 * i);
  off += 4;
  return true;
}

bool get_f64(std::string_view data, std::size_t& off, double& v) {
  if (off + 8 > data.size()) return false;
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<uint64_t>(static_cast<unsigned char>(data[off + i])) << (8 * i);
  off += 8;
  v = std::bit_cast<double>(bits);
  return true;
}

}  // namespace

void write_param_record(std::string& out, const Param& p) {
  put_u32(out, static_cast<uint32_t>(p.name.size()));
  out.append(p.name);
  put_u32(out, static_cast<uint32_t>(p.shape.size()));
  for (int d : p.shape) put_u32(out, static_cast<uint32_t>(d));
  for (double v : p.values) put_f64(out, v);
}

bool read_param_record(std::string_view data, std::size_t& off, Param& p) {
  if (off == data.size()) return false;
  uint32_t name_len = 0;
  if (!get_u32(data, off, name_len) || off + name_len > data.size())
    throw std::runtime_error("model file: truncated parameter name");
  p.name.assign(data.substr(off, name_len));
  off += name_len;
  uint32_t rank = 0;
  if (!get_u32(data, off, rank) || rank == 0 || rank > 4)
    throw std::runtime_error("model file: bad rank for parameter " + p.name);
  p.shape.assign(rank, 0);
  int64_t n = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    uint32_t d = 0;
    if (!get_u32(data, off, d) || d == 0)
      throw std::runtime_error("model file: bad shape for parameter " + p.name);
    p.shape[i] = static_cast<int>(d);
    n *= d;
  }
  p.values.assign(static_cast<std::size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i)
    if (!get_f64(data, off, p.values[static_cast<std::size_t>(i)]))
      throw std::runtime_error("model file: truncated values for parameter " + p.name);
  return true;
}

}  // namespace ccm
