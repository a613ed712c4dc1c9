#include <doctest.h>

#include <filesystem>

#include "taksie/cli/config.hpp"
#include "taksie/cli/pipeline.hpp"
#include "taksie/gen/text.hpp"
#include "taksie/numerics/rng.hpp"
#include "taksie/rollout/rollout.hpp"
#include "taksie/sim/demo.hpp"

using namespace taksie;
using rollout::Mode;
using progress::AdvanceReason;

namespace {

// Small but trained models, shared across cases.
struct Fixture {
  num::ParameterSet enc;
  gen::GeneratorModels gen;
  num::ParameterSet pol, lcbc;

  Fixture() {
    std::vector<sim::Trajectory> trajs;
    for (std::uint64_t s = 0; s < 20; ++s) trajs.push_back(sim::scripted_demo(sim::all_tasks()[s % 10].id, s, 1.0));
    enc = repr::encoder_init(3);
    std::vector<select::SubgoalPlan> plans;
    for (std::size_t i = 0; i < trajs.size(); ++i)
      plans.push_back({i, select::fixed_interval_select(trajs[i].length(), 10)});
    gen::GenTrainConfig gc;
    gc.steps = 60;
    gc.batch = 16;
    gc.heldout_samples = 32;
    gen = gen::train_generator(trajs, plans, enc, gc).models;
    policy::PolicyTrainConfig pc;
    pc.steps = 60;
    pc.batch = 16;
    pc.heldout_samples = 32;
    pol = policy::train_policy(trajs, pc).params;
    lcbc = policy::train_policy(trajs, pc, &gen.text).params;
  }
  rollout::Models models() const { return {&enc, &gen, &pol, &lcbc}; }
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

rollout::RolloutConfig small_cfg() {
  rollout::RolloutConfig c;
  c.episode_cap = 25;
  c.guidance.ddim_steps = 5;
  return c;
}

std::vector<rollout::EpisodeSpec> specs(std::size_t n) {
  std::vector<rollout::EpisodeSpec> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto task = sim::all_tasks()[i % 10].id;
    out.push_back({task, sim::reset(task, 500 + i), num::derive_seed(500 + i, static_cast<std::uint64_t>(task))});
  }
  return out;
}

}  // namespace

TEST_CASE("mode names round trip; missing models are named") {
  for (auto m : rollout::kAllModes) CHECK(rollout::mode_from_name(rollout::mode_name(m)) == m);
  CHECK_FALSE(rollout::mode_from_name("bogus"));
  rollout::Models none;
  for (auto m : rollout::kAllModes) CHECK_FALSE(rollout::missing_model(none, m).empty());
  for (auto m : rollout::kAllModes) CHECK(rollout::missing_model(fx().models(), m).empty());
  rollout::Models no_lcbc = fx().models();
  no_lcbc.lcbc = nullptr;
  CHECK(rollout::missing_model(no_lcbc, Mode::taksie).empty());
  CHECK_FALSE(rollout::missing_model(no_lcbc, Mode::lcbc_baseline).empty());
}

TEST_CASE("episodes: seeded, capped, reason bookkeeping") {
  const auto cfg = small_cfg();
  const auto sp = specs(6);
  for (auto m : rollout::kAllModes) {
    CAPTURE(rollout::mode_name(m));
    const auto a = rollout::run_episodes(fx().models(), m, sp, cfg);
    const auto b = rollout::run_episodes(fx().models(), m, sp, cfg);
    CHECK(a == b);
    REQUIRE(a.size() == sp.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto& r = a[i];
      CHECK(r.task == sp[i].task);
      CHECK(r.steps <= cfg.episode_cap);
      CHECK(r.steps >= 1);
      CHECK(r.subgoals >= 1);
      CHECK(r.reasons.size() == r.subgoals);
      CHECK(r.advance_steps.size() + 1 == r.subgoals);
      CHECK(r.reasons.back() == AdvanceReason::episode_end);
      CHECK(r.success == sim::success(r.task, sp[i].start, r.final_state));
      for (std::size_t k = 1; k < r.advance_steps.size(); ++k) CHECK(r.advance_steps[k] > r.advance_steps[k - 1]);
      CHECK(sim::invariant_violation(r.final_state).empty());
      if (!r.success) CHECK(r.steps == cfg.episode_cap);
      for (std::size_t k = 0; k + 1 < r.reasons.size(); ++k) {
        if (m == Mode::fixed_interval) {
          CHECK(r.reasons[k] == AdvanceReason::interval);
        } else {
          CHECK((r.reasons[k] == AdvanceReason::similarity || r.reasons[k] == AdvanceReason::step_cap));
        }
      }
      if (m == Mode::fixed_interval) {
        for (std::size_t k = 0; k < r.advance_steps.size(); ++k) CHECK(r.advance_steps[k] == cfg.interval * (k + 1));
      }
      if (m == Mode::gt_final_only || m == Mode::lcbc_baseline) CHECK(r.subgoals == 1);
    }
  }
}

TEST_CASE("episodes: step cap forces an advance every lambda steps without similarity") {
  auto cfg = small_cfg();
  cfg.evaluator.delta = 1.0;  // cosine never exceeds 1 by more than rounding
  cfg.evaluator.lambda = 7;
  cfg.episode_cap = 30;
  const auto sp = specs(3);
  for (const auto& r : rollout::run_episodes(fx().models(), Mode::taksie, sp, cfg)) {
    for (std::size_t k = 0; k + 1 < r.reasons.size(); ++k) {
      if (r.reasons[k] == AdvanceReason::step_cap) {
        const std::size_t prev = k ? r.advance_steps[k - 1] : 0;
        CHECK(r.advance_steps[k] - prev == 7);
      }
    }
    if (!r.success) CHECK(r.subgoals >= 4);
  }
}

TEST_CASE("episodes: the evaluator encoder decides similarity advances") {
  // Constant output: every pair has cosine 1.
  num::ParameterSet judge = repr::encoder_init(5);
  judge.at(num::mlp_weight_name(repr::kEncoderPrefix, 2)).fill(0.0);
  judge.at(num::mlp_bias_name(repr::kEncoderPrefix, 2)).fill(1.0);
  rollout::Models m = fx().models();
  m.evaluator = &judge;
  auto cfg = small_cfg();
  cfg.episode_cap = 12;
  const auto sp = specs(4);
  for (const auto& r : rollout::run_episodes(m, Mode::taksie, sp, cfg)) {
    for (std::size_t k = 0; k < r.advance_steps.size(); ++k) {
      CHECK(r.reasons[k] == AdvanceReason::similarity);
      CHECK(r.advance_steps[k] == k + 1);
    }
  }
  // gt_subgoals walks its reference list once, then holds the last entry.
  const auto gt = rollout::run_episodes(m, Mode::gt_subgoals, sp, cfg);
  for (std::size_t i = 0; i < sp.size(); ++i) {
    const auto ref = rollout::reference_subgoals(fx().enc, sp[i].task, sp[i].start, sp[i].seed, cfg);
    CHECK(gt[i].subgoals <= ref.size());
    if (!gt[i].success) CHECK(gt[i].subgoals == std::min(ref.size(), cfg.episode_cap + 1));
  }
}

TEST_CASE("episodes: results do not depend on batch composition") {
  const auto cfg = small_cfg();
  const auto sp = specs(5);
  for (auto m : {Mode::taksie, Mode::fixed_interval, Mode::gt_subgoals, Mode::lcbc_baseline}) {
    const auto all = rollout::run_episodes(fx().models(), m, sp, cfg);
    for (std::size_t i = 0; i < sp.size(); ++i) {
      const auto one = rollout::run_episodes(fx().models(), m, {sp[i]}, cfg);
      CHECK(one[0] == all[i]);
    }
  }
  const auto& s = sp[2];
  const auto direct = rollout::run_episode(fx().models(), s.task, Mode::taksie, 502, cfg);
  CHECK(direct == rollout::run_episodes(fx().models(), Mode::taksie, {s}, cfg)[0]);
}

TEST_CASE("episodes: modes refuse missing models") {
  rollout::Models m = fx().models();
  m.generator = nullptr;
  CHECK_THROWS(rollout::run_episodes(m, Mode::taksie, specs(1), small_cfg()));
  CHECK_NOTHROW(rollout::run_episodes(m, Mode::gt_final_only, specs(1), small_cfg()));
}

TEST_CASE("reference subgoals end at the reference demo's final frame") {
  const auto cfg = small_cfg();
  for (const auto& s : specs(10)) {
    const auto g = rollout::reference_subgoals(fx().enc, s.task, s.start, s.seed, cfg);
    REQUIRE_FALSE(g.empty());
    const auto demo = sim::scripted_demo_from(s.task, s.start, num::derive_seed(s.seed, 0x9e5), 1.0);
    CHECK(g.back() == demo.observations.back());
    CHECK(g == rollout::reference_subgoals(fx().enc, s.task, s.start, s.seed, cfg));
  }
}

TEST_CASE("direction check: fills the requested count, seeded, push tasks only") {
  const auto cfg = small_cfg();
  for (const auto task : {sim::TaskId::push_left, sim::TaskId::push_right}) {
    const auto a = rollout::direction_check(fx().enc, fx().gen, task, 12, 3, true, cfg);
    const auto b = rollout::direction_check(fx().enc, fx().gen, task, 12, 3, true, cfg);
    CHECK(a.total == 12);
    CHECK(a.correct <= a.total);
    CHECK(a.correct == b.correct);
    CHECK(rollout::direction_check(fx().enc, fx().gen, task, 12, 3, false, cfg).total == 12);
  }
  CHECK_THROWS_AS(rollout::direction_check(fx().enc, fx().gen, sim::TaskId::open_drawer, 4, 3, true, cfg),
                  std::invalid_argument);
}

TEST_CASE("chains: preconditions hold along the oracle path") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto c = rollout::sample_chain(seed);
    CHECK(sim::invariant_violation(c.start).empty());
    auto w = c.start;
    for (auto t : c.tasks) {
      CHECK(sim::precondition(t, w));
      w = sim::oracle_goal_world(t, w);
    }
    const auto again = rollout::sample_chain(seed);
    CHECK(again.tasks == c.tasks);
    CHECK(again.start == c.start);
  }
}

TEST_CASE("chains: completed length is bounded and seeded") {
  const auto cfg = small_cfg();
  std::vector<rollout::ChainSpec> cs;
  for (std::uint64_t s = 0; s < 3; ++s) cs.push_back(rollout::sample_chain(s));
  const auto a = rollout::run_chains(fx().models(), Mode::gt_final_only, cs, cfg);
  CHECK(a == rollout::run_chains(fx().models(), Mode::gt_final_only, cs, cfg));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].completed <= 5);
    CHECK(a[i].tasks == cs[i].tasks);
    CHECK(a[i] == rollout::run_chain(fx().models(), cs[i], Mode::gt_final_only, cfg));
  }
}

TEST_CASE("suite: report shape, skipped modes, byte-identical reruns") {
  rollout::SuiteConfig sc;
  sc.seeds = 1;
  sc.chains = 2;
  sc.rollout = small_cfg();
  sc.modes = {Mode::fixed_interval, Mode::gt_final_only, Mode::lcbc_baseline};
  rollout::Models m = fx().models();
  m.lcbc = nullptr;
  const auto r = rollout::evaluate_suite(m, sc);
  CHECK(r.tasks.size() == sc.modes.size() * 10);
  CHECK(r.chains.size() == sc.modes.size());
  REQUIRE(r.skipped_reasons.size() == 1);
  CHECK(r.skipped_reasons[0].find("lcbc_baseline") != std::string::npos);
  for (const auto& row : r.tasks) {
    if (row.mode == Mode::lcbc_baseline) {
      CHECK(row.skipped);
    } else {
      CHECK(row.seeds == 1);
      CHECK(row.rate == doctest::Approx(static_cast<double>(row.successes)));
    }
  }
  CHECK_FALSE(r.mean_rate(Mode::lcbc_baseline));
  CHECK(r.mean_rate(Mode::gt_final_only));
  CHECK_FALSE(r.mean_rate(Mode::taksie));
  for (const auto& c : r.chains) {
    if (c.skipped) continue;
    CHECK(c.chains == 2);
    for (std::size_t k = 1; k < 5; ++k) CHECK(c.at_least[k] <= c.at_least[k - 1]);
    double sum = 0;
    for (auto n : c.at_least) sum += static_cast<double>(n);
    CHECK(c.avg_len == doctest::Approx(sum / 2.0));
  }
  // header plus one line per row
  const std::string csv = r.tasks_csv();
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.tasks.size() + 1);

  const auto again = rollout::evaluate_suite(m, sc);
  CHECK(again.tasks_csv() == r.tasks_csv());
  CHECK(again.chains_csv() == r.chains_csv());
  CHECK(again.episodes_csv() == r.episodes_csv());
  CHECK(again.summary() == r.summary());
}

TEST_CASE("config: defaults, precedence, aliases and rejections") {
  const auto d = cli::parse_config("");
  CHECK(d.suite.rollout.evaluator.delta == 0.96);
  CHECK(d.suite.rollout.evaluator.lambda == 20);
  CHECK(d.suite.seeds == 50);
  CHECK(d.suite.chains == 100);
  CHECK(d.selection.delta1 == 0.0);
  CHECK(d.suite.modes.size() == 7);

  const auto f = cli::parse_config("eval.lambda = 20\n# comment\n\nseed = 9\n", {{"lambda", "30"}});
  CHECK(f.suite.rollout.evaluator.lambda == 30);
  CHECK(f.seed == 9);
  CHECK(f.repr.seed == 9);
  CHECK(f.gen.seed == 9);
  CHECK(f.policy.seed == 9);

  const auto m = cli::parse_config("modes = taksie, gt_subgoals\n");
  CHECK(m.suite.modes == std::vector<Mode>{Mode::taksie, Mode::gt_subgoals});

  auto message = [](const std::string& text) {
    try {
      cli::parse_config(text);
    } catch (const cli::ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("foo = 1").find("foo") != std::string::npos);
  const auto bad = message("eval.lambda = 2.5");
  CHECK(bad.find("eval.lambda") != std::string::npos);
  CHECK(bad.find("unsigned integer") != std::string::npos);
  CHECK(message("eval.delta = high").find("real number") != std::string::npos);
  CHECK_FALSE(message("modes = taksie,nope").empty());
  CHECK_FALSE(message("no equals sign").empty());
  CHECK_FALSE(message("eval.delta = 1.5").empty());
  CHECK_FALSE(message("demos.speed_min = 3").empty());

  // dump is a fixed point
  const auto text = cli::dump_config(f);
  CHECK(cli::dump_config(cli::parse_config(text)) == text);
  CHECK(text.find("eval.delta = 0.96\n") != std::string::npos);
}

TEST_CASE("fnv1a reference values") {
  CHECK(cli::fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(cli::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(cli::fnv1a("foobar") == 0x85944171f73967e8ULL);
  CHECK(cli::fnv1a_hex("") == "cbf29ce484222325");
}

TEST_CASE("plans serialization round trip and rejection") {
  std::vector<select::SubgoalPlan> plans = {{0, {3, 9, 20}}, {1, {14}}};
  const auto text = cli::plans_serialize(plans);
  const auto back = cli::plans_parse(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].trajectory == 0);
  CHECK(back[0].indices == plans[0].indices);
  CHECK(back[1].indices == plans[1].indices);
  CHECK_THROWS(cli::plans_parse("garbage"));
}

TEST_CASE("pipeline: missing inputs name the producing stage; tiny run is reproducible") {
  const auto root = std::filesystem::temp_directory_path() / "taksie_pipeline_test";
  std::filesystem::remove_all(root);
  auto cfg = cli::parse_config("demos.per_task = 2\nrepr.steps = 20\ngen.steps = 20\npolicy.steps = 20\n"
                               "lcbc.steps = 20\neval.seeds = 1\neval.chains = 1\neval.episode_cap = 10\n"
                               "guidance.ddim_steps = 5\nmodes = taksie,gt_final_only\n");
  cfg.out = root / "a";
  std::ostringstream log;
  try {
    cli::run_pipeline(cfg, {cli::Stage::eval}, log);
    FAIL("expected a dependency error");
  } catch (const cli::DependencyError& e) {
    const std::string w = e.what();
    CHECK(w.find("missing") != std::string::npos);
    CHECK(w.find("run stage '") != std::string::npos);
  }

  const std::set<cli::Stage> all(std::begin(cli::kStages), std::end(cli::kStages));
  cli::run_pipeline(cfg, all, log);
  for (const char* f : {cli::artifact::demos, cli::artifact::encoder, cli::artifact::subgoals, cli::artifact::generator,
                        cli::artifact::policy, cli::artifact::lcbc, cli::artifact::report, cli::artifact::chains,
                        cli::artifact::summary, cli::artifact::manifest}) {
    CHECK(std::filesystem::exists(cfg.out / f));
  }
  const std::string first = cli::read_file(cfg.out / cli::artifact::manifest);
  CHECK(first.find("config") != std::string::npos);

  auto cfg_b = cfg;
  cfg_b.out = root / "b";
  cli::run_pipeline(cfg_b, all, log);
  CHECK(cli::read_file(cfg_b.out / cli::artifact::manifest) == first);
  CHECK(cli::read_file(cfg_b.out / cli::artifact::report) == cli::read_file(cfg.out / cli::artifact::report));

  // a stage alone reuses earlier artifacts
  cli::run_pipeline(cfg_b, {cli::Stage::eval}, log);
  CHECK(cli::read_file(cfg_b.out / cli::artifact::report) == cli::read_file(cfg.out / cli::artifact::report));
  std::filesystem::remove_all(root);
}
