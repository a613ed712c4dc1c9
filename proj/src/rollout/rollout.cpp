#include "taksie/rollout/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "taksie/gen/text.hpp"
#include "taksie/numerics/diagnostics.hpp"
#include "taksie/policy/policy.hpp"
#include "taksie/repr/encoder.hpp"
#include "taksie/sim/demo.hpp"

namespace taksie::rollout {

using progress::AdvanceReason;
using sim::Observation;

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::taksie: return "taksie";
    case Mode::fixed_interval: return "fixed_interval";
    case Mode::no_progress_encoder: return "no_progress_encoder";
    case Mode::no_negative_prompt: return "no_negative_prompt";
    case Mode::gt_subgoals: return "gt_subgoals";
    case Mode::gt_final_only: return "gt_final_only";
    case Mode::lcbc_baseline: return "lcbc_baseline";
  }
  return "?";
}

std::optional<Mode> mode_from_name(std::string_view name) {
  for (Mode m : kAllModes) {
    if (mode_name(m) == name) return m;
  }
  return std::nullopt;
}

namespace {

bool generative(Mode m) {
  return m == Mode::taksie || m == Mode::fixed_interval || m == Mode::no_progress_encoder ||
         m == Mode::no_negative_prompt;
}

}  // namespace

std::string missing_model(const Models& m, Mode mode) {
  if (mode == Mode::lcbc_baseline) {
    if (!m.lcbc) return "language-conditioned policy";
    if (!m.generator) return "text embedder (generator checkpoint)";
    return {};
  }
  if (!m.policy) return "policy";
  if (mode != Mode::gt_final_only && !m.encoder) return "encoder";
  if (generative(mode) && !m.generator) return "generator";
  return {};
}

std::vector<Observation> reference_subgoals(const num::ParameterSet& encoder, sim::TaskId task,
                                            const sim::WorldState& start, std::uint64_t seed,
                                            const RolloutConfig& cfg) {
  sim::Trajectory demo;
  try {
    demo = sim::scripted_demo_from(task, start, num::derive_seed(seed, 0x9e5), cfg.reference_speed);
  } catch (const sim::DemoTooLong&) {
    count_warning("rollout.reference_unplannable");
    return {sim::oracle_goal_state(task, start)};
  } catch (const std::logic_error&) {
    // mid-chain states the planner cannot solve: final goal only
    count_warning("rollout.reference_unplannable");
    return {sim::oracle_goal_state(task, start)};
  }
  const auto curve = repr::progress_curve(encoder, demo);
  std::vector<Observation> out;
  for (std::size_t i : select::subgoals_from_distances(curve, cfg.selection)) out.push_back(demo.observations[i]);
  return out;
}

namespace {

struct Live {
  const EpisodeSpec* spec = nullptr;
  sim::WorldState s;
  Observation obs{};
  progress::ProgressState ps;
  Observation subgoal{};
  repr::Embedding subgoal_emb{};
  bool need = true;
  bool done = false;
  std::size_t on_sub = 0;
  policy::ActionBuffer buf;
  std::vector<Observation> gt;
  std::size_t gt_next = 0;
  std::vector<double> text, neg;
  EpisodeResult res;
};

repr::Embedding embed_one(const num::ParameterSet& enc, const Observation& o) { return repr::embed(enc, o); }

}  // namespace

std::vector<EpisodeResult> run_episodes(const Models& models, Mode mode, const std::vector<EpisodeSpec>& specs,
                                        const RolloutConfig& cfg) {
  if (const auto miss = missing_model(models, mode); !miss.empty()) {
    throw std::invalid_argument(std::string(mode_name(mode)) + " mode needs a " + miss);
  }
  if (const auto v = progress::evaluator_violation(cfg.evaluator); !v.empty()) throw std::invalid_argument(v);
  if (cfg.episode_cap < 1 || cfg.interval < 1) throw std::invalid_argument("episode cap and interval must be >= 1");
  const diffusion::Schedule sched;
  const bool uses_eval = generative(mode) && mode != Mode::fixed_interval;
  const bool gt_eval = mode == Mode::gt_subgoals;
  const num::ParameterSet* judge = models.evaluator ? models.evaluator : models.encoder;

  std::vector<Live> eps(specs.size());
  for (std::size_t e = 0; e < specs.size(); ++e) {
    Live& L = eps[e];
    L.spec = &specs[e];
    L.s = specs[e].start;
    L.obs = sim::observe(L.s);
    L.res.task = specs[e].task;
    const std::string cmd(sim::task_info(specs[e].task).command);
    if (generative(mode)) {
      L.text = text::encode_text(models.generator->text, cmd);
      L.neg = gen::negative_slot(*models.generator, cmd, mode != Mode::no_negative_prompt);
      if (mode != Mode::no_progress_encoder) {
        const auto z = embed_one(*models.encoder, L.obs);
        L.ps = progress::progress_update(models.generator->prog, L.ps, z);
      }
    } else if (mode == Mode::gt_subgoals) {
      L.gt = reference_subgoals(*models.encoder, specs[e].task, specs[e].start, specs[e].seed, cfg);
    } else if (mode == Mode::gt_final_only) {
      L.subgoal = sim::oracle_goal_state(specs[e].task, specs[e].start);
    } else {
      L.text = text::encode_text(models.generator->text, cmd);
    }
  }

  std::vector<std::size_t> active;
  for (;;) {
    active.clear();
    for (std::size_t e = 0; e < eps.size(); ++e) {
      if (!eps[e].done) active.push_back(e);
    }
    if (active.empty()) break;

    // New subgoals.
    std::vector<gen::GenRequest> reqs;
    std::vector<std::size_t> who;
    for (std::size_t e : active) {
      Live& L = eps[e];
      if (!L.need) continue;
      L.need = false;
      L.on_sub = 0;
      L.buf.clear();
      ++L.res.subgoals;
      if (generative(mode)) {
        gen::GenRequest q;
        q.current = L.obs;
        q.text_emb = L.text;
        q.neg_text_emb = L.neg;
        q.h = L.ps.h;
        q.seed = num::derive_seed(L.spec->seed, 0x5b, L.res.subgoals);
        reqs.push_back(std::move(q));
        who.push_back(e);
      } else if (mode == Mode::gt_subgoals) {
        L.subgoal = L.gt[std::min(L.gt_next, L.gt.size() - 1)];
        ++L.gt_next;
        L.subgoal_emb = embed_one(*judge, L.subgoal);
      }
    }
    if (!reqs.empty()) {
      const auto out = gen::generate_subgoals(*models.generator, reqs, cfg.guidance, sched);
      for (std::size_t k = 0; k < who.size(); ++k) {
        eps[who[k]].subgoal = out[k];
        if (uses_eval) eps[who[k]].subgoal_emb = embed_one(*judge, out[k]);
      }
    }

    // One policy step for everyone.
    std::vector<policy::ChunkRequest> creq;
    for (std::size_t e : active) {
      Live& L = eps[e];
      policy::ChunkRequest c;
      c.current = L.obs;
      c.cond = mode == Mode::lcbc_baseline ? L.text : policy::goal_condition(L.subgoal);
      c.seed = num::derive_seed(L.spec->seed, 0xac7, L.res.steps);
      creq.push_back(std::move(c));
    }
    const auto& pol = mode == Mode::lcbc_baseline ? *models.lcbc : *models.policy;
    const auto chunks = policy::sample_chunks(pol, creq, sched);

    num::Tensor now_obs({active.size(), sim::kObsDim});
    for (std::size_t k = 0; k < active.size(); ++k) {
      Live& L = eps[active[k]];
      L.buf.push(chunks[k]);
      L.s = sim::step(L.s, L.buf.emit());
      L.obs = sim::observe(L.s);
      ++L.res.steps;
      ++L.on_sub;
      std::copy(L.obs.begin(), L.obs.end(), now_obs.row(k).begin());
    }
    num::Tensor z, zj;
    if (uses_eval) z = repr::embed_batch(*models.encoder, now_obs);
    if (uses_eval || gt_eval) zj = judge == models.encoder && z.size() ? z : repr::embed_batch(*judge, now_obs);

    for (std::size_t k = 0; k < active.size(); ++k) {
      Live& L = eps[active[k]];
      if (sim::success(L.spec->task, L.spec->start, L.s)) {
        L.res.success = true;
        L.done = true;
      } else if (L.res.steps >= cfg.episode_cap) {
        L.done = true;
      }
      if (L.done) {
        L.res.reasons.push_back(AdvanceReason::episode_end);
        L.res.final_state = L.s;
        continue;
      }
      AdvanceReason why = AdvanceReason::none;
      if (uses_eval || gt_eval) {
        const auto ev = progress::evaluate(cfg.evaluator, zj.row(k), L.subgoal_emb, L.on_sub);
        if (ev.verdict == progress::Verdict::advance) why = ev.reason;
        // the last reference subgoal stays in place until the episode ends
        if (gt_eval && L.gt_next >= L.gt.size()) why = AdvanceReason::none;
      } else if (mode == Mode::fixed_interval && L.on_sub >= cfg.interval) {
        why = AdvanceReason::interval;
      }
      if (why == AdvanceReason::none) continue;
      L.res.reasons.push_back(why);
      L.res.advance_steps.push_back(L.res.steps);
      L.need = true;
      if (generative(mode) && mode != Mode::no_progress_encoder) {
        // fixed_interval skips the batched embed, so compute this one here.
        const repr::Embedding e = z.size() ? repr::Embedding{} : embed_one(*models.encoder, L.obs);
        L.ps = progress::progress_update(models.generator->prog, L.ps,
                                         z.size() ? std::span<const double>(z.row(k)) : std::span<const double>(e));
      }
    }
  }
  std::vector<EpisodeResult> out;
  out.reserve(eps.size());
  for (auto& L : eps) out.push_back(std::move(L.res));
  return out;
}

EpisodeResult run_episode(const Models& models, sim::TaskId task, Mode mode, std::uint64_t seed,
                          const RolloutConfig& cfg) {
  const EpisodeSpec spec{task, sim::reset(task, seed), num::derive_seed(seed, static_cast<std::uint64_t>(task))};
  return run_episodes(models, mode, {spec}, cfg)[0];
}

ChainSpec sample_chain(std::uint64_t seed) {
  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    ChainSpec c;
    c.seed = num::derive_seed(seed, 0xc4a1, attempt);
    c.start = sim::sample_scene(c.seed);
    num::Rng rng(num::derive_seed(c.seed, 1));
    sim::WorldState cur = c.start;
    bool ok = true;
    for (std::size_t k = 0; k < 5 && ok; ++k) {
      std::vector<sim::TaskId> cand;
      for (const auto& t : sim::all_tasks()) {
        if (!sim::precondition(t.id, cur)) continue;
        if (k < 4) {
          const auto next = sim::oracle_goal_world(t.id, cur);
          bool any = false;
          for (const auto& u : sim::all_tasks()) any = any || sim::precondition(u.id, next);
          if (!any) continue;
        }
        cand.push_back(t.id);
      }
      if (cand.empty()) {
        ok = false;
        break;
      }
      c.tasks[k] = cand[rng.below(cand.size())];
      cur = sim::oracle_goal_world(c.tasks[k], cur);
    }
    if (ok) return c;
  }
  throw std::runtime_error("no valid five-task chain after 100 resamples (seed " + std::to_string(seed) + ")");
}

std::vector<ChainResult> run_chains(const Models& models, Mode mode, const std::vector<ChainSpec>& chains,
                                    const RolloutConfig& cfg) {
  std::vector<ChainResult> res(chains.size());
  std::vector<sim::WorldState> state(chains.size());
  std::vector<bool> alive(chains.size(), true);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    res[c].tasks = chains[c].tasks;
    state[c] = chains[c].start;
  }
  for (std::size_t k = 0; k < 5; ++k) {
    std::vector<EpisodeSpec> specs;
    std::vector<std::size_t> who;
    for (std::size_t c = 0; c < chains.size(); ++c) {
      if (!alive[c]) continue;
      // The real end state of the previous task may not admit the next one.
      if (!sim::precondition(chains[c].tasks[k], state[c])) {
        alive[c] = false;
        continue;
      }
      specs.push_back({chains[c].tasks[k], state[c], num::derive_seed(chains[c].seed, 0xc7, k)});
      who.push_back(c);
    }
    if (specs.empty()) break;
    const auto out = run_episodes(models, mode, specs, cfg);
    for (std::size_t i = 0; i < who.size(); ++i) {
      if (out[i].success) {
        ++res[who[i]].completed;
        state[who[i]] = out[i].final_state;
      } else {
        alive[who[i]] = false;
      }
    }
  }
  return res;
}

ChainResult run_chain(const Models& models, const ChainSpec& chain, Mode mode, const RolloutConfig& cfg) {
  return run_chains(models, mode, {chain}, cfg)[0];
}

std::string Report::tasks_csv() const {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << "mode,task,seeds,successes,rate,mean_steps,mean_subgoals\n";
  for (const auto& r : tasks) {
    os << mode_name(r.mode) << ',' << sim::task_info(r.task).name << ',';
    if (r.skipped) {
      os << "skipped,,,,\n";
      continue;
    }
    os << r.seeds << ',' << r.successes << ',' << r.rate << ',' << r.mean_steps << ',' << r.mean_subgoals << '\n';
  }
  return os.str();
}

std::string Report::chains_csv() const {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << "mode,chains,avg_len,len1,len2,len3,len4,len5\n";
  for (const auto& r : chains) {
    os << mode_name(r.mode) << ',';
    if (r.skipped) {
      os << "skipped,,,,,,\n";
      continue;
    }
    os << r.chains << ',' << r.avg_len;
    for (auto n : r.at_least) os << ',' << n;
    os << '\n';
  }
  return os.str();
}

std::string Report::episodes_csv() const {
  std::ostringstream os;
  os << "mode,task,index,success,steps,subgoals,similarity,step_cap,interval,episode_end\n";
  for (const auto& [mode, list] : episodes) {
    std::vector<std::size_t> per_task(sim::kTaskCount, 0);
    for (const auto& e : list) {
      std::array<std::size_t, 5> cnt{};
      for (auto r : e.reasons) ++cnt[static_cast<std::size_t>(r)];
      os << mode_name(mode) << ',' << sim::task_info(e.task).name << ',' << per_task[static_cast<std::size_t>(e.task)]++
         << ',' << (e.success ? 1 : 0) << ',' << e.steps << ',' << e.subgoals << ',' << cnt[1] << ',' << cnt[2] << ','
         << cnt[3] << ',' << cnt[4] << '\n';
    }
  }
  return os.str();
}

std::optional<double> Report::mean_rate(Mode m, const std::vector<sim::TaskId>& which) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : tasks) {
    if (r.mode != m) continue;
    if (!which.empty() && std::find(which.begin(), which.end(), r.task) == which.end()) continue;
    if (r.skipped) return std::nullopt;
    sum += r.rate;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<double> Report::avg_chain_len(Mode m) const {
  for (const auto& r : chains) {
    if (r.mode == m && !r.skipped) return r.avg_len;
  }
  return std::nullopt;
}

std::string Report::summary() const {
  std::ostringstream os;
  os << std::setprecision(4) << std::fixed;
  for (const auto& r : chains) {
    os << std::setw(20) << std::left << mode_name(r.mode);
    const auto rate = mean_rate(r.mode);
    if (r.skipped || !rate) {
      os << " skipped\n";
      continue;
    }
    os << " success " << *rate << "  chain avg_len " << r.avg_len << '\n';
  }
  auto flag = [&](const char* label, std::optional<double> a, std::optional<double> b) {
    os << label << ": ";
    if (!a || !b) {
      os << "n/a\n";
    } else {
      os << (*a >= *b ? "yes" : "no") << " (" << *a << " vs " << *b << ")\n";
    }
  };
  flag("taksie >= fixed_interval (success)", mean_rate(Mode::taksie), mean_rate(Mode::fixed_interval));
  flag("taksie >= fixed_interval (chains)", avg_chain_len(Mode::taksie), avg_chain_len(Mode::fixed_interval));
  flag("gt_subgoals >= gt_final_only", mean_rate(Mode::gt_subgoals), mean_rate(Mode::gt_final_only));
  for (const auto& s : skipped_reasons) os << "skipped: " << s << '\n';
  return os.str();
}

Report evaluate_suite(const Models& models, const SuiteConfig& cfg) {
  Report rep;
  std::vector<EpisodeSpec> specs;
  for (const auto& t : sim::all_tasks()) {
    for (std::size_t i = 0; i < cfg.seeds; ++i) {
      const std::uint64_t seed = cfg.first_seed + i;
      specs.push_back({t.id, sim::reset(t.id, seed), num::derive_seed(seed, static_cast<std::uint64_t>(t.id))});
    }
  }
  std::vector<ChainSpec> chains;
  for (std::size_t c = 0; c < cfg.chains; ++c) chains.push_back(sample_chain(cfg.first_seed + c));

  for (Mode m : cfg.modes) {
    const auto miss = missing_model(models, m);
    if (!miss.empty()) {
      rep.skipped_reasons.push_back(std::string(mode_name(m)) + ": no " + miss);
      for (const auto& t : sim::all_tasks()) rep.tasks.push_back({m, t.id, true});
      rep.chains.push_back({m, true});
      continue;
    }
    auto eps = run_episodes(models, m, specs, cfg.rollout);
    for (std::size_t ti = 0; ti < sim::kTaskCount; ++ti) {
      TaskRow row{m, sim::all_tasks()[ti].id};
      row.seeds = cfg.seeds;
      double steps = 0, subs = 0;
      for (std::size_t i = 0; i < cfg.seeds; ++i) {
        const auto& e = eps[ti * cfg.seeds + i];
        row.successes += e.success;
        steps += static_cast<double>(e.steps);
        subs += static_cast<double>(e.subgoals);
      }
      const double n = static_cast<double>(std::max<std::size_t>(cfg.seeds, 1));
      row.rate = static_cast<double>(row.successes) / n;
      row.mean_steps = steps / n;
      row.mean_subgoals = subs / n;
      rep.tasks.push_back(row);
    }
    rep.episodes.emplace_back(m, std::move(eps));

    ChainRow cr{m};
    cr.chains = chains.size();
    const auto res = run_chains(models, m, chains, cfg.rollout);
    double total = 0;
    for (const auto& r : res) {
      total += static_cast<double>(r.completed);
      for (std::size_t k = 0; k < r.completed; ++k) ++cr.at_least[k];
    }
    cr.avg_len = chains.empty() ? 0.0 : total / static_cast<double>(chains.size());
    rep.chains.push_back(cr);
  }
  return rep;
}

DirectionResult direction_check(const num::ParameterSet& encoder, const gen::GeneratorModels& g, sim::TaskId task,
                                std::size_t generations, std::uint64_t seed, bool negative_prompt,
                                const RolloutConfig& cfg) {
  if (task != sim::TaskId::push_left && task != sim::TaskId::push_right) {
    throw std::invalid_argument("direction check is defined for the push tasks");
  }
  const double sign = task == sim::TaskId::push_left ? -1.0 : 1.0;
  const std::string cmd(sim::task_info(task).command);
  const auto txt = text::encode_text(g.text, cmd);
  const auto neg = gen::negative_slot(g, cmd, negative_prompt);
  num::Rng rng(num::derive_seed(seed, 0xd1, static_cast<std::uint64_t>(task)));
  std::vector<gen::GenRequest> reqs;
  std::vector<double> cur_x;
  // Only segments whose reference subgoal moves the block have a right answer;
  // approach segments leave it in place and would score noise.
  const std::size_t max_demos = 20 * generations + 100;
  for (std::size_t k = 0; reqs.size() < generations; ++k) {
    if (k == max_demos) throw std::runtime_error("direction check: too few block-moving segments");
    const auto demo = sim::scripted_demo(task, num::derive_seed(seed, 0xd2, k), cfg.reference_speed);
    const auto curve = repr::progress_curve(encoder, demo);
    const auto sg = select::subgoals_from_distances(curve, cfg.selection);
    const auto red_x = [&](std::size_t f) { return demo.observations[f][sim::obs::block(sim::kRed, 0)]; };
    std::vector<std::size_t> moving;
    for (std::size_t j = 0; j < sg.size(); ++j) {
      const std::size_t lo = j == 0 ? 0 : sg[j - 1];
      if (sign * (red_x(sg[j]) - red_x(lo)) > DirectionResult::kMinShift) moving.push_back(j);
    }
    if (moving.empty()) continue;
    const std::size_t j = moving[rng.below(moving.size())];
    const std::size_t lo = j == 0 ? 0 : sg[j - 1];
    std::size_t cur = sg[j] > lo ? lo + rng.below(sg[j] - lo) : lo;
    // Late in the segment the block may already sit at the subgoal; step back
    // to a frame that still has the shift ahead of it.
    while (cur > lo && sign * (red_x(sg[j]) - red_x(cur)) <= DirectionResult::kMinShift) --cur;
    progress::ProgressState ps;
    ps = progress::progress_update(g.prog, ps, repr::embed(encoder, demo.observations[0]));
    for (std::size_t i = 0; i < j; ++i) ps = progress::progress_update(g.prog, ps, repr::embed(encoder, demo.observations[sg[i]]));
    gen::GenRequest q;
    q.current = demo.observations[cur];
    q.text_emb = txt;
    q.neg_text_emb = neg;
    q.h = ps.h;
    q.seed = num::derive_seed(seed, 0xd3, k);
    reqs.push_back(std::move(q));
    cur_x.push_back(red_x(cur));
  }
  const auto out = gen::generate_subgoals(g, reqs, cfg.guidance, diffusion::Schedule());
  DirectionResult r;
  for (std::size_t k = 0; k < out.size(); ++k) {
    ++r.total;
    if (sign * (out[k][sim::obs::block(sim::kRed, 0)] - cur_x[k]) > 0.0) ++r.correct;
  }
  return r;
}

}  // namespace taksie::rollout
