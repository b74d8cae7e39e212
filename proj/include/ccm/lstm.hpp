#pragma once

#include <utility>

#include "ccm/tape.hpp"

namespace ccm {

// One LSTM cell step built from tape primitives, so gradients flow through
// the whole recurrence. Weights are packed: w is [4H, X+H] over the gate
// order (input, forget, output, candidate), b is [4H]. The forget segment is
// rows [H, 2H), which keeps the forget bias individually addressable.
//
// Given input x [X], previous hidden h [H] and cell c [H]:
//   z = concat(x, h)
//   (i, f, o) = sigmoid of their gate rows of w*z + b,  g = tanh of its rows
//   c' = f . c + i . g
//   h' = o . tanh(c')
// Returns (h', c').
std::pair<ad::Var, ad::Var> lstm_step(ad::Var x, ad::Var h, ad::Var c,
                                      ad::Var w, ad::Var b);

}  // namespace ccm
