#include "taksie/gen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "taksie/gen/text.hpp"
#include "taksie/numerics/adam.hpp"
#include "taksie/progress/progress.hpp"

namespace taksie::gen {

using num::ParameterSet;
using num::Tensor;

num::MlpArch denoiser_arch() { return {{kInputDim, 256, 256, 256, sim::kObsDim}}; }

GeneratorModels generator_init(std::uint64_t seed) {
  GeneratorModels m;
  num::Rng rng(num::derive_seed(seed, 0x6e4));
  m.gen = num::mlp_init(denoiser_arch(), rng, kPrefix);
  m.prog = progress::progress_encoder_init(seed);
  m.text = text::text_init(seed);
  return m;
}

void check_models(const GeneratorModels& m) {
  const auto arch = denoiser_arch();
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const auto w = num::mlp_weight_name(kPrefix, l);
    if (!m.gen.contains(w) || m.gen.at(w).shape() != std::vector<std::size_t>{arch.widths[l], arch.widths[l + 1]}) {
      throw std::invalid_argument("generator parameters missing or misshapen: " + w);
    }
  }
  const auto dims = num::gru_dims(m.prog, progress::kPrefix);
  if (dims.input != progress::kInput || dims.hidden != progress::kHidden) {
    throw std::invalid_argument("progress encoder has the wrong dimensions");
  }
  if (!m.text.contains(text::kTableName) || !m.text.contains(text::kNullName) ||
      m.text.at(text::kTableName).rows() != text::vocabulary().size()) {
    throw std::invalid_argument("text embedder parameters missing or misshapen");
  }
}

void write_input_row(std::span<const double> x_t, double t, const sim::Observation& image, bool drop_image,
                     std::span<const double> text, std::span<const double> h, std::span<double> row) {
  if (x_t.size() != sim::kObsDim || text.size() != text::kTextDim || h.size() != progress::kHidden ||
      row.size() != kInputDim) {
    throw std::invalid_argument("denoiser input pieces have the wrong sizes");
  }
  std::copy(x_t.begin(), x_t.end(), row.begin());
  for (std::size_t i = 0; i < sim::kObsDim; ++i) row[kImageOff + i] = drop_image ? 0.0 : 2.0 * image[i] - 1.0;
  std::copy(text.begin(), text.end(), row.begin() + kTextOff);
  std::copy(h.begin(), h.end(), row.begin() + kHiddenOff);
  diffusion::timestep_embedding(t, row.subspan(kTimeOff, diffusion::kTimeEmbDim));
}

std::vector<double> denoiser_forward(const ParameterSet& gen, std::span<const double> x_t, double t,
                                     const ConditionBundle& c) {
  Tensor in({kInputDim});
  write_input_row(x_t, t, c.current_obs, c.drop_image, c.drop_text ? c.neg_text_emb : c.text_emb, c.h, in.data());
  const Tensor out = num::mlp_forward(gen, denoiser_arch(), in, kPrefix);
  return {out.data().begin(), out.data().end()};
}

ParameterSet combine(const GeneratorModels& m) {
  ParameterSet c = m.gen;
  c.merge(m.prog);
  c.merge(m.text);
  return c;
}

GeneratorModels split(const ParameterSet& c) {
  return {c.subset(kPrefix), c.subset(progress::kPrefix), c.subset(text::kPrefix)};
}

GenLoss generator_loss(const ParameterSet& combined, const diffusion::Schedule& sched,
                       const std::vector<GenSample>& batch, bool want_grads) {
  if (batch.empty()) throw std::invalid_argument("empty generator batch");
  const auto arch = denoiser_arch();
  const auto dims = progress::progress_dims();
  const std::size_t B = batch.size();
  Tensor in({B, kInputDim});
  std::vector<std::vector<num::GruTape>> tapes(B);
  for (std::size_t b = 0; b < B; ++b) {
    const GenSample& s = batch[b];
    if (s.history.empty()) throw std::invalid_argument("generator sample without progress history");
    std::vector<double> h(progress::kHidden, 0.0);
    tapes[b].resize(s.history.size());
    for (std::size_t k = 0; k < s.history.size(); ++k) {
      h = num::gru_cell(combined, dims, h, s.history[k], progress::kPrefix, &tapes[b][k]);
    }
    const auto x0 = sim::to_signed(s.target);
    const auto xt = diffusion::q_sample(sched, x0, s.t, s.eps);
    const auto txt = s.drop_text ? text::null_embedding(combined) : text::encode_text(combined, s.command);
    write_input_row(xt, static_cast<double>(s.t), s.current, s.drop_image, txt, h, in.row(b));
  }
  num::MlpTape tape;
  const Tensor out = num::mlp_forward(combined, arch, in, kPrefix, &tape);
  GenLoss res;
  const double scale = 1.0 / static_cast<double>(B * sim::kObsDim);
  Tensor up({B, sim::kObsDim});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t d = 0; d < sim::kObsDim; ++d) {
      const double e = out.at(b, d) - batch[b].eps[d];
      res.loss += scale * e * e;
      up.at(b, d) = 2.0 * scale * e;
    }
  }
  if (!want_grads) return res;
  res.grads = combined.zeros_like();
  const Tensor din = num::mlp_backward_into(combined, arch, tape, up, res.grads, kPrefix, true);
  for (std::size_t b = 0; b < B; ++b) {
    const auto row = din.row(b);
    const auto g_text = row.subspan(kTextOff, text::kTextDim);
    if (batch[b].drop_text) {
      auto null_g = res.grads.at(text::kNullName).data();
      for (std::size_t d = 0; d < text::kTextDim; ++d) null_g[d] += g_text[d];
    } else {
      text::encode_text_backward(batch[b].command, g_text, res.grads);
    }
    std::vector<double> dh(row.begin() + kHiddenOff, row.begin() + kHiddenOff + progress::kHidden);
    for (std::size_t k = tapes[b].size(); k-- > 0;) {
      dh = num::gru_cell_backward(combined, dims, tapes[b][k], dh, res.grads, progress::kPrefix).h_prev;
    }
  }
  return res;
}

std::vector<PlannedTrajectory> plan_dataset(const std::vector<sim::Trajectory>& trajs,
                                            const std::vector<select::SubgoalPlan>& plans,
                                            const ParameterSet& encoder) {
  std::vector<PlannedTrajectory> out(trajs.size());
  std::vector<bool> seen(trajs.size(), false);
  for (const auto& p : plans) {
    if (p.trajectory >= trajs.size()) throw std::invalid_argument("subgoal plan refers to a missing trajectory");
    out[p.trajectory].subgoals = p.indices;
    seen[p.trajectory] = true;
  }
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    if (!seen[i]) throw std::invalid_argument("trajectory " + std::to_string(i) + " has no subgoal plan");
    out[i].traj = &trajs[i];
    const Tensor z = repr::embed_batch(encoder, repr::observations_tensor(trajs[i].observations));
    out[i].emb.resize(z.rows());
    for (std::size_t r = 0; r < z.rows(); ++r) std::copy(z.row(r).begin(), z.row(r).end(), out[i].emb[r].begin());
  }
  return out;
}

GenSample draw_sample(const PlannedTrajectory& p, const diffusion::Schedule& sched, double drop_text,
                      double drop_image, num::Rng& rng) {
  const auto& g = p.subgoals;
  const std::size_t j = rng.below(g.size());
  const std::size_t lo = j == 0 ? 0 : g[j - 1];
  const std::size_t hi = g[j];
  GenSample s;
  const std::size_t cur = hi > lo ? lo + rng.below(hi - lo) : lo;
  s.current = p.traj->observations[cur];
  s.target = p.traj->observations[hi];
  s.command = p.traj->command;
  s.history.push_back(p.emb[0]);
  for (std::size_t k = 0; k < j; ++k) s.history.push_back(p.emb[g[k]]);
  s.t = 1 + rng.below(sched.steps());
  s.eps.resize(sim::kObsDim);
  for (double& e : s.eps) e = rng.normal();
  s.drop_text = rng.bernoulli(drop_text);
  s.drop_image = rng.bernoulli(drop_image);
  return s;
}

GenTrainResult train_generator(const std::vector<sim::Trajectory>& trajs,
                               const std::vector<select::SubgoalPlan>& plans, const ParameterSet& encoder,
                               const GenTrainConfig& cfg) {
  const auto planned = plan_dataset(trajs, plans, encoder);
  std::vector<std::size_t> train, held;
  for (std::size_t i = 0; i < trajs.size(); ++i) (sim::is_heldout(i) ? held : train).push_back(i);
  if (train.empty()) throw std::invalid_argument("no training trajectories");
  if (held.empty()) held = train;
  const diffusion::Schedule sched(cfg.train_steps_T);

  GenTrainResult res;
  ParameterSet params = combine(generator_init(cfg.seed));

  num::Rng held_rng(num::derive_seed(cfg.seed, 0x4e1d));
  std::vector<GenSample> held_batch;
  for (std::size_t k = 0; k < cfg.heldout_samples; ++k) {
    held_batch.push_back(draw_sample(planned[held[held_rng.below(held.size())]], sched, 0.0, 0.0, held_rng));
  }
  res.heldout_initial = generator_loss(params, sched, held_batch, false).loss;

  num::Rng rng(num::derive_seed(cfg.seed, 0x6e7));
  num::AdamState adam = num::AdamState::for_params(params);
  std::vector<GenSample> batch(cfg.batch);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& s : batch) s = draw_sample(planned[train[rng.below(train.size())]], sched, cfg.drop_text, cfg.drop_image, rng);
    GenLoss lg = generator_loss(params, sched, batch);
    if (!std::isfinite(lg.loss)) throw std::runtime_error("generator training diverged at step " + std::to_string(step));
    if (step % cfg.log_every == 0) res.loss_curve.emplace_back(step, lg.loss);
    // Linear decay to 10% over the last 30% of steps.
    const double frac = static_cast<double>(step) / static_cast<double>(cfg.steps);
    const double lr = cfg.lr * (frac < 0.7 ? 1.0 : 1.0 - 0.9 * (frac - 0.7) / 0.3);
    num::adam_step(adam, params, lg.grads, {lr, 0.9, 0.999, 1e-8});
  }
  res.heldout_final = generator_loss(params, sched, held_batch, false).loss;
  res.models = split(params);
  return res;
}

std::vector<double> negative_slot(const GeneratorModels& m, std::string_view command, bool use_negative_prompt) {
  if (use_negative_prompt) {
    const std::string neg = text::antonym(command);
    if (!neg.empty()) return text::encode_text(m.text, neg);
  }
  return text::null_embedding(m.text);
}

std::vector<sim::Observation> generate_subgoals(const GeneratorModels& m, const std::vector<GenRequest>& reqs,
                                                const GuidanceParams& g, const diffusion::Schedule& sched) {
  check_models(m);
  if (g.image_scale < 0.0 || g.text_scale < 0.0) throw std::invalid_argument("guidance scales must be >= 0");
  const auto ts = diffusion::ddim_timesteps(sched.steps(), g.ddim_steps);
  const std::size_t B = reqs.size();
  if (B == 0) return {};
  const auto arch = denoiser_arch();
  std::vector<std::vector<double>> x(B, std::vector<double>(sim::kObsDim));
  for (std::size_t r = 0; r < B; ++r) {
    num::Rng rng(reqs[r].seed);
    for (double& v : x[r]) v = rng.normal();
  }
  Tensor in({3 * B, kInputDim});
  std::vector<double> eps(sim::kObsDim);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double t = static_cast<double>(ts[k]);
    for (std::size_t r = 0; r < B; ++r) {
      const GenRequest& q = reqs[r];
      write_input_row(x[r], t, q.current, true, q.neg_text_emb, q.h, in.row(3 * r));
      write_input_row(x[r], t, q.current, false, q.neg_text_emb, q.h, in.row(3 * r + 1));
      write_input_row(x[r], t, q.current, false, q.text_emb, q.h, in.row(3 * r + 2));
    }
    const Tensor out = num::mlp_forward(m.gen, arch, in, kPrefix);
    for (std::size_t r = 0; r < B; ++r) {
      diffusion::cfg_combine(out.row(3 * r), out.row(3 * r + 1), out.row(3 * r + 2), g.image_scale, g.text_scale, eps);
      diffusion::ddim_update(x[r], eps, sched.alpha_bar(ts[k]), sched.alpha_bar(ts[k + 1]));
    }
  }
  std::vector<sim::Observation> res(B);
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t i = 0; i < sim::kObsDim; ++i) res[r][i] = std::clamp(0.5 * (x[r][i] + 1.0), 0.0, 1.0);
  }
  return res;
}

sim::Observation generate_subgoal(const GeneratorModels& m, const sim::Observation& current,
                                  std::string_view command, std::span<const double> h, const GuidanceParams& g,
                                  std::uint64_t seed, bool negative_prompt) {
  check_models(m);
  GenRequest q;
  q.current = current;
  q.text_emb = text::encode_text(m.text, command);
  q.neg_text_emb = negative_slot(m, command, negative_prompt);
  q.h.assign(h.begin(), h.end());
  q.seed = seed;
  return generate_subgoals(m, {q}, g, diffusion::Schedule(100))[0];
}

}  // namespace taksie::gen
