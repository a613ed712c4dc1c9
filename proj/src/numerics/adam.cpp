#include "taksie/numerics/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "taksie/numerics/diagnostics.hpp"

namespace taksie::num {

AdamState AdamState::for_params(const ParameterSet& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

bool adam_step(AdamState& state, ParameterSet& params, const ParameterSet& grads, const AdamConfig& config) {
  if (!(config.lr > 0.0)) throw std::invalid_argument("Adam learning rate must be positive");
  if (!state.m.same_layout(params) || !state.v.same_layout(params) || !grads.same_layout(params)) {
    throw std::invalid_argument("Adam state, parameters and gradients must share a layout");
  }
  if (!grads.all_finite()) {
    ++state.rejected;
    count_warning("adam.non_finite_gradient");
    return false;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  auto m_it = state.m.begin();
  auto v_it = state.v.begin();
  auto g_it = grads.begin();
  for (auto p_it = params.begin(); p_it != params.end(); ++p_it, ++m_it, ++v_it, ++g_it) {
    auto p = p_it->second.data();
    auto m = m_it->second.data();
    auto v = v_it->second.data();
    auto g = g_it->second.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
  return true;
}

double clip_global_norm(ParameterSet& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, t] : grads) {
    for (double v : t.data()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [name, t] : grads) {
      for (double& v : t.data()) v *= s;
    }
  }
  return norm;
}

}  // namespace taksie::num
