#include "taksie/gen/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace taksie::diffusion {

Schedule::Schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("diffusion schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
    throw std::invalid_argument("betas must satisfy 0 < start <= end < 1");
  }
  betas_.resize(steps);
  alpha_bar_.resize(steps + 1);
  alpha_bar_[0] = 1.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double f = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas_[i] = beta_start + f * (beta_end - beta_start);
    alpha_bar_[i + 1] = alpha_bar_[i] * (1.0 - betas_[i]);
  }
}

std::vector<double> q_sample(const Schedule& s, std::span<const double> x0, std::size_t t,
                             std::span<const double> eps) {
  if (t < 1 || t > s.steps()) throw std::out_of_range("diffusion step " + std::to_string(t) + " outside [1, T]");
  if (x0.size() != eps.size()) throw std::invalid_argument("q_sample: x0 and noise differ in length");
  const double a = std::sqrt(s.alpha_bar(t)), b = std::sqrt(1.0 - s.alpha_bar(t));
  std::vector<double> x(x0.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = a * x0[i] + b * eps[i];
  return x;
}

void ddim_update(std::span<double> x, std::span<const double> eps, double ab_t, double ab_next) {
  if (!(ab_t > 0.0)) throw std::invalid_argument("ddim step with alpha_bar = 0");
  const double st = std::sqrt(ab_t), nt = std::sqrt(1.0 - ab_t);
  const double sn = std::sqrt(ab_next), nn = std::sqrt(1.0 - ab_next);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = (x[i] - nt * eps[i]) / st;
    x[i] = sn * x0 + nn * eps[i];
  }
}

std::vector<double> ddim_step(const Schedule& s, std::span<const double> x_t, std::span<const double> eps,
                              std::size_t t, std::size_t t_next) {
  if (!(t > t_next) || t > s.steps()) throw std::invalid_argument("ddim step needs T >= t > t_next >= 0");
  if (x_t.size() != eps.size()) throw std::invalid_argument("ddim step: x and noise differ in length");
  std::vector<double> x(x_t.begin(), x_t.end());
  ddim_update(x, eps, s.alpha_bar(t), s.alpha_bar(t_next));
  return x;
}

std::vector<std::size_t> ddim_timesteps(std::size_t T, std::size_t count) {
  if (count < 1 || count > T || T % count != 0) {
    throw std::invalid_argument("DDIM step count must divide the training steps");
  }
  const std::size_t stride = T / count;
  std::vector<std::size_t> ts;
  for (std::size_t t = T; t >= stride; t -= stride) ts.push_back(t);
  ts.push_back(0);
  return ts;
}

void timestep_embedding(double t, std::span<double> out) {
  if (out.size() != kTimeEmbDim) throw std::invalid_argument("timestep embedding buffer must hold 32 values");
  constexpr std::size_t half = kTimeEmbDim / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double w = std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(half));
    out[k] = std::sin(t * w);
    out[half + k] = std::cos(t * w);
  }
}

void cfg_combine(std::span<const double> e_uu, std::span<const double> e_iu, std::span<const double> e_it,
                 double s_image, double s_text, std::span<double> out) {
  if (e_uu.size() != e_iu.size() || e_iu.size() != e_it.size() || out.size() != e_it.size()) {
    throw std::invalid_argument("guidance inputs differ in shape");
  }
  // Collected per input so unit scales return e_it bit for bit.
  const double cu = 1.0 - s_image, ci = s_image - s_text;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cu * e_uu[i] + ci * e_iu[i] + s_text * e_it[i];
}

}  // namespace taksie::diffusion
