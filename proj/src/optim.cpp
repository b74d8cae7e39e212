#include "ccm/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ccm {

void AdamState::init(const ParamSet& ps) {
  m.clear();
  v.clear();
  t = 0;
  for (const Param& p : ps) {
    m.emplace_back(p.values.size(), 0.0);
    v.emplace_back(p.values.size(), 0.0);
  }
}

void SgdState::init(const ParamSet& ps) {
  velocity.clear();
  for (const Param& p : ps) velocity.emplace_back(p.values.size(), 0.0);
}

void adam_step(ParamSet& ps, const GradView& grads, AdamState& state,
               const AdamHyper& hp) {
  if (static_cast<int>(grads.size()) != ps.count() ||
      state.m.size() != grads.size())
    throw std::invalid_argument("adam_step: gradient/state arity mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  for (int i = 0; i < ps.count(); ++i) {
    const auto& g = grads[static_cast<std::size_t>(i)];
    if (g.empty()) continue;
    Param& p = ps.at(i);
    if (g.size() != p.values.size())
      throw std::invalid_argument("adam_step: gradient size mismatch for " + p.name);
    auto& m = state.m[static_cast<std::size_t>(i)];
    auto& v = state.v[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = hp.beta1 * m[j] + (1.0 - hp.beta1) * g[j];
      v[j] = hp.beta2 * v[j] + (1.0 - hp.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.values[j] -= hp.lr * mhat / (std::sqrt(vhat) + hp.epsilon);
    }
  }
}

void sgd_momentum_step(ParamSet& ps, const GradView& grads, SgdState& state,
                       const SgdHyper& hp) {
  if (static_cast<int>(grads.size()) != ps.count() ||
      state.velocity.size() != grads.size())
    throw std::invalid_argument("sgd_momentum_step: gradient/state arity mismatch");
  for (int i = 0; i < ps.count(); ++i) {
    const auto& g = grads[static_cast<std::size_t>(i)];
    if (g.empty()) continue;
    Param& p = ps.at(i);
    if (g.size() != p.values.size())
      throw std::invalid_argument("sgd_momentum_step: gradient size mismatch for " +
                                  p.name);
    auto& vel = state.velocity[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < g.size(); ++j) {
      vel[j] = hp.momentum * vel[j] + g[j];
      p.values[j] -= hp.lr * vel[j];
    }
  }
}

void clip_weights(ParamSet& ps, double bound) {
  if (bound <= 0.0) throw std::invalid_argument("clip_weights: bound must be positive");
  for (Param& p : ps)
    for (double& v : p.values) v = std::min(std::max(v, -bound), bound);
}

double decayed_lr(double base, int epoch, double factor, int interval) {
  if (interval <= 0) throw std::invalid_argument("decayed_lr: interval must be positive");
  return base * std::pow(factor, static_cast<double>(epoch / interval));
}

}  // namespace ccm
