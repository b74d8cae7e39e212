#pragma once

// The gradient verification suite: every tape primitive plus the composite
// blocks (LSTM step, fused attention, adversarial probability terms), each
// checked against central finite differences at seeded random points. Shared
// by the unit tests and the acceptance runner.

#include <string>
#include <vector>

#include "ccm/lstm.hpp"
#include "ccm/rng.hpp"
#include "ccm/tape.hpp"
#include "gradcheck.hpp"

namespace grad_suite {

using ccm::Rng;
using ccm::Shape;
using ccm::Tensor;
using ccm::ad::Tape;
using ccm::ad::Var;

struct Case {
  std::string name;
  std::function<std::vector<Tensor>(Rng&)> make_leaves;
  gradcheck::Builder build;
};

// Uniform values in [lo, hi] with a random sign when `signed_range` is set;
// keeps inputs away from non-smooth points (relu/signed_sqrt at 0, clamp
// bounds) so the finite-difference oracle is valid.
inline Tensor rand_tensor(Rng& rng, Shape shape, double lo, double hi,
                          bool signed_range) {
  Tensor t(shape);
  for (double& v : t.values) {
    const double mag = rng.uniform_range(lo, hi);
    v = signed_range && rng.uniform_u32(2) == 0 ? -mag : mag;
  }
  return t;
}

// Reduces any output to a scalar through a fixed weighted sum so every
// component influences the root.
inline Var weighted_scalar(Tape& tape, Var out) {
  Tensor w(out.shape());
  for (std::size_t i = 0; i < w.values.size(); ++i)
    w.values[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
  Var wv = tape.leaf(w, false);
  return ccm::ad::sum(ccm::ad::mul(out, wv));
}

inline std::vector<Case> make_cases() {
  using namespace ccm::ad;
  std::vector<Case> cases;

  auto add_case = [&](std::string name,
                      std::function<std::vector<Tensor>(Rng&)> gen,
                      gradcheck::Builder build) {
    cases.push_back({std::move(name), std::move(gen), std::move(build)});
  };

  add_case(
      "matmul_mat_mat",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {3, 4}, 0.1, 1.0, true),
                                   rand_tensor(r, {4, 2}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, matmul(v[0], v[1]));
      });

  add_case(
      "matmul_mat_vec",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {5, 3}, 0.1, 1.0, true),
                                   rand_tensor(r, {3}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, matmul(v[0], v[1]));
      });

  add_case(
      "add_same_shape",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {6}, 0.1, 1.0, true),
                                   rand_tensor(r, {6}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, add(v[0], v[1]));
      });

  add_case(
      "add_scalar_broadcast",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {6}, 0.1, 1.0, true),
                                   rand_tensor(r, {1}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, add(v[0], v[1]));
      });

  add_case(
      "sub",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {4}, 0.1, 1.0, true),
                                   rand_tensor(r, {4}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, sub(v[0], v[1]));
      });

  add_case(
      "mul_elementwise",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {5}, 0.1, 1.0, true),
                                   rand_tensor(r, {5}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, mul(v[0], v[1]));
      });

  add_case(
      "mul_scalar_broadcast",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {1}, 0.1, 1.0, true),
                                   rand_tensor(r, {5}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, mul(v[0], v[1]));
      });

  add_case(
      "tanh",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {6}, 0.05, 1.5, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, tanh(v[0]));
      });

  add_case(
      "sigmoid",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {6}, 0.05, 2.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, sigmoid(v[0]));
      });

  add_case(
      "relu",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {6}, 0.1, 1.5, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, relu(v[0]));
      });

  add_case(
      "softmax_vector",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {5}, 0.05, 2.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, softmax(v[0]));
      });

  add_case(
      "softmax_matrix_rows",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {3, 4}, 0.05, 2.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, softmax(v[0], 1));
      });

  add_case(
      "softmax_matrix_cols",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {3, 4}, 0.05, 2.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, softmax(v[0], 0));
      });

  add_case(
      "signed_sqrt",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {6}, 0.15, 2.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, signed_sqrt(v[0]));
      });

  add_case(
      "l2_normalize",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {6}, 0.1, 1.5, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, l2_normalize(v[0]));
      });

  add_case(
      "concat",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {3}, 0.1, 1.0, true),
                                   rand_tensor(r, {2}, 0.1, 1.0, true),
                                   rand_tensor(r, {4}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        std::vector<Var> xs(v.begin(), v.end());
        return weighted_scalar(t, concat(xs));
      });

  add_case(
      "log",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {5}, 0.2, 2.0, false)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, log(v[0]));
      });

  add_case(
      "cross_entropy_logits",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {7}, 0.05, 2.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return cross_entropy_logits(v[0], 3);
      });

  add_case(
      "mean",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {3, 3}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) { return mean(v[0]); });

  add_case(
      "sum_scale_add_scalar",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {5}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return sum(add_scalar(scale(v[0], -1.7), 0.4));
      });

  add_case(
      "clamp_interior",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {6}, 0.05, 0.8, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, clamp(v[0], -0.9, 0.9));
      });

  add_case(
      "clamp_saturated",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {6}, 1.2, 2.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, clamp(v[0], -0.9, 0.9));
      });

  add_case(
      "slice",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {8}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, slice(v[0], 2, 6));
      });

  add_case(
      "take_row",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {4, 3}, 0.1, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        return weighted_scalar(t, take_row(v[0], 2));
      });

  add_case(
      "reshape_pool",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {6}, 0.1, 1.0, true),
                                   rand_tensor(r, {2}, 0.05, 1.0, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        Var stacked = reshape(v[0], {2, 3});
        Var weights = reshape(v[1], {1, 2});
        return weighted_scalar(t, reshape(matmul(weights, stacked), {3}));
      });

  add_case(
      "lstm_single_step",
      [](Rng& r) {
        return std::vector<Tensor>{
            rand_tensor(r, {3}, 0.1, 1.0, true),       // x
            rand_tensor(r, {4}, 0.1, 0.8, true),       // h
            rand_tensor(r, {4}, 0.1, 0.8, true),       // c
            rand_tensor(r, {16, 7}, 0.05, 0.6, true),  // w
            rand_tensor(r, {16}, 0.05, 0.5, true)};    // b
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        auto [h, c] = ccm::lstm_step(v[0], v[1], v[2], v[3], v[4]);
        return add(weighted_scalar(t, h), weighted_scalar(t, c));
      });

  add_case(
      "lstm_three_step_rollout",
      [](Rng& r) {
        return std::vector<Tensor>{
            rand_tensor(r, {3, 3}, 0.1, 1.0, true),    // inputs as rows
            rand_tensor(r, {16, 7}, 0.05, 0.6, true),  // w
            rand_tensor(r, {16}, 0.05, 0.5, true)};    // b
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        Tensor zero({4});
        Var h = t.leaf(zero, false);
        Var c = t.leaf(zero, false);
        for (int s = 0; s < 3; ++s) {
          Var x = take_row(v[0], s);
          auto [h2, c2] = ccm::lstm_step(x, h, c, v[1], v[2]);
          h = h2;
          c = c2;
        }
        return weighted_scalar(t, h);
      });

  // Mini fused-attention block: per-region tanh of gated projections,
  // signed sqrt + l2 normalization, scored softmax pooling.
  add_case(
      "attention_block",
      [](Rng& r) {
        return std::vector<Tensor>{
            rand_tensor(r, {4, 5}, 0.2, 1.0, true),   // region features
            rand_tensor(r, {3, 5}, 0.1, 0.8, true),   // region projection
            rand_tensor(r, {3}, 0.2, 1.0, true),      // projected question
            rand_tensor(r, {2, 3}, 0.1, 0.8, true),   // score hidden
            rand_tensor(r, {2}, 0.05, 0.4, true),     // score bias
            rand_tensor(r, {1, 2}, 0.1, 0.8, true)};  // score out
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        const int regions = 4;
        std::vector<Var> scores, projs;
        for (int j = 0; j < regions; ++j) {
          Var rj = take_row(v[0], j);
          Var proj = matmul(v[1], rj);
          Var fj = tanh(mul(proj, v[2]));
          Var fs = l2_normalize(signed_sqrt(fj));
          Var hidden = sigmoid(add(matmul(v[3], fs), v[4]));
          scores.push_back(matmul(v[5], hidden));
          projs.push_back(proj);
        }
        Var alpha = softmax(concat(scores));
        Var stacked = reshape(concat(projs), {regions, 3});
        Var pooled = reshape(matmul(reshape(alpha, {1, regions}), stacked), {3});
        Var fused = mul(pooled, v[2]);
        return weighted_scalar(t, fused);
      });

  // Answer-style head: two relu layers into a cross-entropy loss.
  add_case(
      "relu_head_cross_entropy",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {4}, 0.2, 1.0, true),
                                   rand_tensor(r, {5, 4}, 0.1, 0.8, true),
                                   rand_tensor(r, {3, 5}, 0.1, 0.8, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        Var logits = relu(matmul(v[2], relu(matmul(v[1], v[0]))));
        return cross_entropy_logits(logits, 1);
      });

  // Adversarial probability terms: log D and log(1 - D) through the clamp.
  add_case(
      "adversarial_log_terms",
      [](Rng& r) {
        return std::vector<Tensor>{rand_tensor(r, {4}, 0.1, 1.0, true),
                                   rand_tensor(r, {1, 4}, 0.1, 0.8, true),
                                   rand_tensor(r, {1}, 0.05, 0.4, true)};
      },
      []([[maybe_unused]] Tape& t, std::span<const Var> v) {
        Var p = clamp(sigmoid(add(matmul(v[1], v[0]), v[2])), 1e-7, 1.0 - 1e-7);
        Var real_term = log(p);
        Var fake_term = log(add_scalar(scale(p, -1.0), 1.0));
        return add(real_term, fake_term);
      });

  return cases;
}

struct SuiteResult {
  double max_rel_err = 0.0;
  int points = 0;
  std::string worst_case;
};

// Runs every case at `seeds_per_case` seeded random points.
inline SuiteResult run(int seeds_per_case = 10) {
  SuiteResult out;
  auto cases = make_cases();
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    for (int s = 1; s <= seeds_per_case; ++s) {
      Rng rng(ccm::derive_seed(static_cast<uint64_t>(s), "gradsuite", ci));
      auto leaves = cases[ci].make_leaves(rng);
      auto res = gradcheck::check(std::move(leaves), cases[ci].build);
      out.points += res.checked;
      if (res.max_rel_err > out.max_rel_err) {
        out.max_rel_err = res.max_rel_err;
        out.worst_case = cases[ci].name;
      }
    }
  }
  return out;
}

}  // namespace grad_suite
