#include "taksie/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "taksie/gen/text.hpp"
#include "taksie/numerics/adam.hpp"
#include "taksie/numerics/diagnostics.hpp"

namespace taksie::policy {

using num::ParameterSet;
using num::Tensor;

num::MlpArch policy_arch() { return {{kInputDim, 256, 256, 256, kChunkDim}}; }

ParameterSet policy_init(std::uint64_t seed) {
  num::Rng rng(num::derive_seed(seed, 0x901));
  return num::mlp_init(policy_arch(), rng, kPrefix);
}

void check_policy(const ParameterSet& p) {
  const auto arch = policy_arch();
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const auto w = num::mlp_weight_name(kPrefix, l);
    if (!p.contains(w) || p.at(w).shape() != std::vector<std::size_t>{arch.widths[l], arch.widths[l + 1]}) {
      throw std::invalid_argument("policy parameters missing or misshapen: " + w);
    }
  }
}

Chunk scale_chunk(std::span<const sim::ActionVec> actions) {
  if (actions.size() != kHorizon) throw std::invalid_argument("action chunk must hold 4 actions");
  Chunk c{};
  for (std::size_t k = 0; k < kHorizon; ++k) {
    for (std::size_t d = 0; d < 3; ++d) c[k * 4 + d] = actions[k][d] * kMotionScale;
    c[k * 4 + 3] = actions[k][3];
  }
  return c;
}

std::array<sim::Action, kHorizon> unscale_chunk(std::span<const double> x) {
  if (x.size() != kChunkDim) throw std::invalid_argument("scaled chunk must hold 16 values");
  std::array<sim::Action, kHorizon> out;
  for (std::size_t k = 0; k < kHorizon; ++k) {
    out[k] = sim::clamp_action({x[k * 4] / kMotionScale, x[k * 4 + 1] / kMotionScale, x[k * 4 + 2] / kMotionScale,
                                x[k * 4 + 3]});
  }
  return out;
}

sim::Trajectory extend_trajectory(const sim::Trajectory& t, std::size_t k_delta) {
  if (t.observations.empty()) throw std::invalid_argument("cannot extend an empty trajectory");
  sim::Trajectory e = t;
  const double grip = t.actions.empty() ? -1.0 : t.actions.back()[3];
  for (std::size_t k = 0; k < k_delta; ++k) {
    e.observations.push_back(t.observations.back());
    e.actions.push_back({0.0, 0.0, 0.0, grip});
  }
  return e;
}

bool sample_window(const sim::Trajectory& ext, const WindowParams& p, num::Rng& rng, WindowSample& out) {
  if (p.k_min < kHorizon || p.k_max < p.k_min) throw std::invalid_argument("window bounds need 4 <= k_min <= k_max");
  const std::size_t n = ext.length();
  if (n < p.k_min + 1) {
    taksie::count_warning("policy.short_trajectory");
    return false;
  }
  const std::size_t hi = std::min(p.k_max, n - 1);
  const std::size_t len = p.k_min + rng.below(hi - p.k_min + 1);
  const std::size_t start = rng.below(n - len);
  out.start_index = start;
  out.length = len;
  out.start = ext.observations[start];
  out.goal = ext.observations[start + len];
  for (std::size_t k = 0; k < kHorizon; ++k) out.actions[k] = ext.actions[start + k];
  return true;
}

std::vector<double> goal_condition(const sim::Observation& goal) {
  const auto s = sim::to_signed(goal);
  return {s.begin(), s.end()};
}

void write_input_row(std::span<const double> x_t, double t, const sim::Observation& start,
                     std::span<const double> cond, std::span<double> row) {
  if (x_t.size() != kChunkDim || cond.size() != sim::kObsDim || row.size() != kInputDim) {
    throw std::invalid_argument("policy input pieces have the wrong sizes");
  }
  std::copy(x_t.begin(), x_t.end(), row.begin());
  for (std::size_t i = 0; i < sim::kObsDim; ++i) row[kStartOff + i] = 2.0 * start[i] - 1.0;
  std::copy(cond.begin(), cond.end(), row.begin() + kGoalOff);
  diffusion::timestep_embedding(t, row.subspan(kTimeOff, diffusion::kTimeEmbDim));
}

PolicyLoss policy_loss(const ParameterSet& params, const diffusion::Schedule& sched,
                       const std::vector<PolicySample>& batch, bool want_grads) {
  if (batch.empty()) throw std::invalid_argument("empty policy batch");
  const std::size_t B = batch.size();
  Tensor in({B, kInputDim});
  for (std::size_t b = 0; b < B; ++b) {
    const auto xt = diffusion::q_sample(sched, batch[b].target, batch[b].t, batch[b].eps);
    write_input_row(xt, static_cast<double>(batch[b].t), batch[b].start, batch[b].cond, in.row(b));
  }
  num::MlpTape tape;
  const Tensor out = num::mlp_forward(params, policy_arch(), in, kPrefix, want_grads ? &tape : nullptr);
  PolicyLoss res;
  const double scale = 1.0 / static_cast<double>(B * kChunkDim);
  Tensor up({B, kChunkDim});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t d = 0; d < kChunkDim; ++d) {
      const double e = out.at(b, d) - batch[b].eps[d];
      res.loss += scale * e * e;
      up.at(b, d) = 2.0 * scale * e;
    }
  }
  if (!want_grads) return res;
  res.grads = params.zeros_like();
  num::mlp_backward_into(params, policy_arch(), tape, up, res.grads, kPrefix, false);
  return res;
}

namespace {

PolicySample to_sample(const WindowSample& w, const std::vector<double>& cond, const diffusion::Schedule& sched,
                       num::Rng& rng) {
  PolicySample s;
  s.start = w.start;
  s.cond = cond;
  s.target = scale_chunk(w.actions);
  s.t = 1 + rng.below(sched.steps());
  s.eps.resize(kChunkDim);
  for (double& e : s.eps) e = rng.normal();
  return s;
}

}  // namespace

PolicyTrainResult train_policy(const std::vector<sim::Trajectory>& trajs, const PolicyTrainConfig& cfg,
                               const ParameterSet* text) {
  if (trajs.empty()) throw std::invalid_argument("policy training needs a nonempty dataset");
  PolicyTrainResult res;
  std::vector<sim::Trajectory> ext;
  std::vector<std::vector<double>> cmd;
  std::vector<std::size_t> train, held;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    auto e = extend_trajectory(trajs[i], cfg.window.k_delta);
    if (e.length() < cfg.window.k_min + 1) {
      taksie::count_warning("policy.short_trajectory");
      ++res.skipped_trajectories;
      continue;
    }
    (sim::is_heldout(i) ? held : train).push_back(ext.size());
    ext.push_back(std::move(e));
    cmd.push_back(text ? text::encode_text(*text, trajs[i].command) : std::vector<double>{});
  }
  if (train.empty()) throw std::invalid_argument("no usable training trajectories for the policy");
  if (held.empty()) held = train;
  const diffusion::Schedule sched(cfg.train_steps_T);

  auto draw = [&](const std::vector<std::size_t>& pool, num::Rng& rng) {
    const std::size_t k = pool[rng.below(pool.size())];
    WindowSample w;
    sample_window(ext[k], cfg.window, rng, w);
    return to_sample(w, text ? cmd[k] : goal_condition(w.goal), sched, rng);
  };

  ParameterSet params = policy_init(cfg.seed);
  num::Rng held_rng(num::derive_seed(cfg.seed, 0x4e1d));
  std::vector<PolicySample> held_batch;
  for (std::size_t k = 0; k < cfg.heldout_samples; ++k) held_batch.push_back(draw(held, held_rng));
  res.heldout_initial = policy_loss(params, sched, held_batch, false).loss;

  num::Rng rng(num::derive_seed(cfg.seed, 0x9017));
  num::AdamState adam = num::AdamState::for_params(params);
  std::vector<PolicySample> batch(cfg.batch);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& s : batch) s = draw(train, rng);
    PolicyLoss lg = policy_loss(params, sched, batch);
    if (!std::isfinite(lg.loss)) throw std::runtime_error("policy training diverged at step " + std::to_string(step));
    if (step % cfg.log_every == 0) res.loss_curve.emplace_back(step, lg.loss);
    const double frac = static_cast<double>(step) / static_cast<double>(cfg.steps);
    const double lr = cfg.lr * (frac < 0.7 ? 1.0 : 1.0 - 0.9 * (frac - 0.7) / 0.3);
    num::adam_step(adam, params, lg.grads, {lr, 0.9, 0.999, 1e-8});
  }
  res.heldout_final = policy_loss(params, sched, held_batch, false).loss;
  res.params = std::move(params);
  return res;
}

std::vector<std::array<sim::Action, kHorizon>> sample_chunks(const ParameterSet& params,
                                                             const std::vector<ChunkRequest>& reqs,
                                                             const diffusion::Schedule& sched,
                                                             std::size_t ddim_steps) {
  check_policy(params);
  const std::size_t B = reqs.size();
  if (B == 0) return {};
  const auto ts = diffusion::ddim_timesteps(sched.steps(), ddim_steps);
  std::vector<std::vector<double>> x(B, std::vector<double>(kChunkDim));
  for (std::size_t r = 0; r < B; ++r) {
    num::Rng rng(reqs[r].seed);
    for (double& v : x[r]) v = rng.normal();
  }
  const auto arch = policy_arch();
  Tensor in({B, kInputDim});
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    for (std::size_t r = 0; r < B; ++r) {
      write_input_row(x[r], static_cast<double>(ts[k]), reqs[r].current, reqs[r].cond, in.row(r));
    }
    const Tensor eps = num::mlp_forward(params, arch, in, kPrefix);
    for (std::size_t r = 0; r < B; ++r) {
      diffusion::ddim_update(x[r], eps.row(r), sched.alpha_bar(ts[k]), sched.alpha_bar(ts[k + 1]));
    }
  }
  std::vector<std::array<sim::Action, kHorizon>> out(B);
  for (std::size_t r = 0; r < B; ++r) out[r] = unscale_chunk(x[r]);
  return out;
}

void ActionBuffer::push(const std::array<sim::Action, kHorizon>& chunk) {
  entries_.push_back({now_, chunk});
  if (entries_.size() > kHorizon) entries_.erase(entries_.begin());
}

sim::Action ActionBuffer::emit() {
  double dx = 0, dy = 0, dz = 0, g = 0;
  std::size_t n = 0;
  for (const Entry& e : entries_) {
    if (e.step > now_ || now_ - e.step >= kHorizon) continue;
    const sim::Action& a = e.chunk[now_ - e.step];
    dx += a.dx, dy += a.dy, dz += a.dz, g += a.grip;
    ++n;
  }
  if (n == 0) throw std::logic_error("action buffer has no prediction for the current step");
  const double inv = 1.0 / static_cast<double>(n);
  ++now_;
  return sim::clamp_action({dx * inv, dy * inv, dz * inv, g * inv});
}

void ActionBuffer::clear() { entries_.clear(); }

sim::Action policy_act(const ParameterSet& params, const sim::Observation& current, const sim::Observation& goal,
                       ActionBuffer& buffer, std::uint64_t seed) {
  const diffusion::Schedule sched;
  buffer.push(sample_chunks(params, {{current, goal_condition(goal), seed}}, sched)[0]);
  return buffer.emit();
}

}  // namespace taksie::policy
