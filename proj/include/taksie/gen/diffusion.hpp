#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace taksie::diffusion {

// Linear beta schedule. The defaults are the usual 1e-4..0.02 range for 1000
// steps scaled to 100, which leaves alpha_bar(T) near 0 (about 4e-5).
// alpha_bar(0) = 1 by convention (clean sample);
// alpha_bar(t) = prod_{s=1..t} (1 - beta_s) for t in [1, T].
class Schedule {
 public:
  explicit Schedule(std::size_t steps = 100, double beta_start = 1e-3, double beta_end = 0.2);

  std::size_t steps() const { return betas_.size(); }
  double beta(std::size_t t) const { return betas_.at(t - 1); }
  double alpha_bar(std::size_t t) const { return alpha_bar_.at(t); }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;
};

// x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps, t in [1, T].
std::vector<double> q_sample(const Schedule& s, std::span<const double> x0, std::size_t t,
                             std::span<const double> eps);

// Deterministic DDIM update written on the alpha_bar values directly.
void ddim_update(std::span<double> x, std::span<const double> eps, double ab_t, double ab_next);
std::vector<double> ddim_step(const Schedule& s, std::span<const double> x_t, std::span<const double> eps,
                              std::size_t t, std::size_t t_next);

// Descending sampling grid T, T - stride, ..., stride, then 0 as the final
// target; `count` must divide T.
std::vector<std::size_t> ddim_timesteps(std::size_t T, std::size_t count);

inline constexpr std::size_t kTimeEmbDim = 32;
// sin(t w_k), cos(t w_k) with w_k = 10000^(-k/16), k = 0..15.
void timestep_embedding(double t, std::span<double> out);

// e_uu + s_i (e_iu - e_uu) + s_t (e_it - e_iu)
void cfg_combine(std::span<const double> e_uu, std::span<const double> e_iu, std::span<const double> e_it,
                 double s_image, double s_text, std::span<double> out);

}  // namespace taksie::diffusion
