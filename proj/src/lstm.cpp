#include "ccm/lstm.hpp"

#include <array>
#include <stdexcept>

namespace ccm {

using ad::Var;

std::pair<Var, Var> lstm_step(Var x, Var h, Var c, Var w, Var b) {
  const Shape ws = w.shape();
  const Shape bs = b.shape();
  if (ws.size() != 2 || bs.size() != 1 || ws[0] != bs[0] || ws[0] % 4 != 0)
    throw std::invalid_argument("lstm_step: weight block must be [4H,X+H] with bias [4H], got " +
                                shape_str(ws) + " and " + shape_str(bs));
  const int hidden = ws[0] / 4;
  const Shape xs = x.shape();
  const Shape hs = h.shape();
  if (hs.size() != 1 || hs[0] != hidden || xs.size() != 1 ||
      xs[0] + hidden != ws[1])
    throw std::invalid_argument("lstm_step: input/state dims do not match weights " +
                                shape_str(ws));

  std::array<Var, 2> zin{x, h};
  Var z = ad::concat(zin);
  Var gates = ad::add(ad::matmul(w, z), b);
  Var i = ad::sigmoid(ad::slice(gates, 0, hidden));
  Var f = ad::sigmoid(ad::slice(gates, hidden, 2 * hidden));
  Var o = ad::sigmoid(ad::slice(gates, 2 * hidden, 3 * hidden));
  Var g = ad::tanh(ad::slice(gates, 3 * hidden, 4 * hidden));
  Var c_next = ad::add(ad::mul(f, c), ad::mul(i, g));
  Var h_next = ad::mul(o, ad::tanh(c_next));
  return {h_next, c_next};
}

}  // namespace ccm
