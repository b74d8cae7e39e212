#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ccm/params.hpp"

namespace ccm {

struct AdamHyper {
  double lr = 7e-4;
  double beta1 = 0.95;  // first-moment decay
  double beta2 = 0.99;  // second-moment decay
  double epsilon = 1e-8;
};

struct SgdHyper {
  double lr = 7e-4;
  double momentum = 0.9;
};

// Moment buffers parallel to a ParamSet; t counts completed steps.
struct AdamState {
  std::vector<std::vector<double>> m, v;
  int64_t t = 0;
  void init(const ParamSet& ps);
};

struct SgdState {
  std::vector<std::vector<double>> velocity;
  void init(const ParamSet& ps);
};

using GradView = std::vector<std::span<const double>>;

// Bias-corrected Adam. grads[i] pairs with ps.at(i); an empty span means no
// gradient flowed to that parameter and it is left untouched this step.
void adam_step(ParamSet& ps, const GradView& grads, AdamState& state,
               const AdamHyper& hp);

// Classic momentum: v <- mu*v + g; p <- p - lr*v.
void sgd_momentum_step(ParamSet& ps, const GradView& grads, SgdState& state,
                       const SgdHyper& hp);

// Projects every value into [-bound, bound]. Idempotent.
void clip_weights(ParamSet& ps, double bound);

// Step decay: base * factor^floor(epoch / interval); epoch is zero-based.
double decayed_lr(double base, int epoch, double factor, int interval);

}  // namespace ccm
