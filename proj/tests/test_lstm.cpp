#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ccm/lstm.hpp"
#include "ccm/tape.hpp"

using ccm::ad::Tape;
using ccm::ad::Var;

TEST_CASE("zero weights and bias give zero next state") {
  Tape tape;
  Var x = tape.leaf({3}, std::vector<double>{0.4, -0.2, 0.9});
  Var h = tape.leaf({2}, std::vector<double>{0.1, -0.1});
  Var c = tape.leaf({2}, std::vector<double>{0.5, 0.25});
  Var w = tape.leaf({8, 5}, std::vector<double>(40, 0.0));
  Var b = tape.leaf({8}, std::vector<double>(8, 0.0));
  auto [h2, c2] = ccm::lstm_step(x, h, c, w, b);
  // All gate pre-activations are zero: i = f = o = 0.5, g = 0.
  // c' = 0.5*c, h' = 0.5*tanh(c').
  for (int j = 0; j < 2; ++j) {
    CHECK(c2.values()[static_cast<std::size_t>(j)] ==
          doctest::Approx(0.5 * c.values()[static_cast<std::size_t>(j)]).epsilon(1e-12));
    CHECK(h2.values()[static_cast<std::size_t>(j)] ==
          doctest::Approx(0.5 * std::tanh(0.5 * c.values()[static_cast<std::size_t>(j)]))
              .epsilon(1e-12));
  }
}

TEST_CASE("large forget-gate bias carries cell state nearly unchanged") {
  Tape tape;
  const int hdim = 2;
  Var x = tape.leaf({1}, std::vector<double>{0.3});
  Var h = tape.leaf({hdim}, std::vector<double>(hdim, 0.0));
  Var c = tape.leaf({hdim}, std::vector<double>{1.0, -1.0});
  Var w = tape.leaf({4 * hdim, 1 + hdim}, std::vector<double>(24, 0.0));
  std::vector<double> bias(8, 0.0);
  bias[2] = 10.0;  // forget-gate rows are [H, 2H)
  bias[3] = 10.0;
  Var b = tape.leaf({8}, bias);
  auto [h2, c2] = ccm::lstm_step(x, h, c, w, b);
  CHECK(std::fabs(c2.values()[0] - 1.0) < 1e-4);
  CHECK(std::fabs(c2.values()[1] + 1.0) < 1e-4);
  (void)h2;
}

TEST_CASE("gate order within the packed weight matrix is input, forget, output, candidate") {
  // Drive exactly one gate row block through the bias and observe the effect.
  Tape tape;
  const int hdim = 1;
  auto step_with_bias = [&](int row, double v) {
    Var x = tape.leaf({1}, std::vector<double>{0.0});
    Var h = tape.leaf({hdim}, std::vector<double>(hdim, 0.0));
    Var c = tape.leaf({hdim}, std::vector<double>{0.8});
    Var w = tape.leaf({4, 2}, std::vector<double>(8, 0.0));
    std::vector<double> bias(4, 0.0);
    bias[static_cast<std::size_t>(row)] = v;
    Var b = tape.leaf({4}, bias);
    return ccm::lstm_step(x, h, c, w, b);
  };

  // Candidate row alone cannot move the cell because the input gate is 0.5
  // and g = tanh(bias) shifts c' by 0.5*tanh(v).
  auto [hg, cg] = step_with_bias(3, 2.0);
  CHECK(cg.values()[0] == doctest::Approx(0.5 * 0.8 + 0.5 * std::tanh(2.0)).epsilon(1e-12));

  // Output row only scales h', never c'.
  auto [ho, co] = step_with_bias(2, 5.0);
  CHECK(co.values()[0] == doctest::Approx(0.5 * 0.8).epsilon(1e-12));
  const double sig5 = 1.0 / (1.0 + std::exp(-5.0));
  CHECK(ho.values()[0] == doctest::Approx(sig5 * std::tanh(0.4)).epsilon(1e-12));

  // Forget row saturating towards 1 preserves more of c than the neutral 0.5.
  auto [hf, cf] = step_with_bias(1, 12.0);
  CHECK(cf.values()[0] == doctest::Approx(0.8).epsilon(1e-4));
  (void)hg;
  (void)hf;
}

TEST_CASE("dimension mismatches are rejected") {
  Tape tape;
  Var x = tape.leaf({3}, std::vector<double>(3, 0.0));
  Var h = tape.leaf({2}, std::vector<double>(2, 0.0));
  Var c = tape.leaf({2}, std::vector<double>(2, 0.0));
  Var w_bad_rows = tape.leaf({6, 5}, std::vector<double>(30, 0.0));
  Var b = tape.leaf({8}, std::vector<double>(8, 0.0));
  CHECK_THROWS_AS(ccm::lstm_step(x, h, c, w_bad_rows, b), std::invalid_argument);
  Var w_bad_cols = tape.leaf({8, 4}, std::vector<double>(32, 0.0));
  CHECK_THROWS_AS(ccm::lstm_step(x, h, c, w_bad_cols, b), std::invalid_argument);
  Var w = tape.leaf({8, 5}, std::vector<double>(40, 0.0));
  Var b_bad = tape.leaf({7}, std::vector<double>(7, 0.0));
  CHECK_THROWS_AS(ccm::lstm_step(x, h, c, w, b_bad), std::invalid_argument);
}
