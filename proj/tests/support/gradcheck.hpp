#pragma once

// Central finite-difference oracle shared by the gradient tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "taksie/numerics/rng.hpp"
#include "taksie/numerics/tensor.hpp"

namespace taksie::testing {

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
  return std::abs(analytic - numeric) / denom;
}

inline double central_difference(const std::function<double()>& loss, double& coord, double h = 1e-5) {
  const double saved = coord;
  coord = saved + h;
  const double up = loss();
  coord = saved - h;
  const double down = loss();
  coord = saved;
  return (up - down) / (2.0 * h);
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// Compares `analytic` against finite differences of `loss` on `coords`
// randomly chosen coordinates of `params` (every coordinate when coords == 0).
inline GradCheckResult check_parameters(const std::function<double()>& loss, num::ParameterSet& params,
                                        const num::ParameterSet& analytic, num::Rng& rng,
                                        std::size_t coords = 0) {
  std::vector<std::pair<std::size_t, std::size_t>> picks;
  std::size_t e = 0;
  for (auto& [name, t] : params) {
    for (std::size_t i = 0; i < t.size(); ++i) picks.emplace_back(e, i);
    ++e;
  }
  if (coords > 0 && coords < picks.size()) {
    for (std::size_t i = 0; i < coords; ++i) std::swap(picks[i], picks[i + rng.below(picks.size() - i)]);
    picks.resize(coords);
  }
  std::vector<num::Tensor*> tensors;
  std::vector<const num::Tensor*> grads;
  std::vector<std::string> names;
  for (auto& [name, t] : params) {
    tensors.push_back(&t);
    names.push_back(name);
  }
  for (const auto& [name, t] : analytic) grads.push_back(&t);

  GradCheckResult res;
  for (auto [entry, idx] : picks) {
    const double numeric = central_difference(loss, (*tensors[entry])[idx]);
    const double err = relative_error((*grads[entry])[idx], numeric);
    if (err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst = names[entry] + "[" + std::to_string(idx) + "]";
    }
    ++res.checked;
  }
  return res;
}

}  // namespace taksie::testing
