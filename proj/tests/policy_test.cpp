#include <doctest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "taksie/gen/text.hpp"
#include "taksie/numerics/diagnostics.hpp"
#include "taksie/policy/policy.hpp"

using namespace taksie;
using num::ParameterSet;

namespace {

sim::Trajectory straight_line(std::size_t steps) {
  sim::Trajectory t;
  sim::WorldState s;
  t.observations.push_back(sim::observe(s));
  for (std::size_t k = 0; k < steps; ++k) {
    const sim::Action a{0.01, 0.0, -0.005, k + 2 >= steps ? 1.0 : -1.0};
    s = sim::step(s, a);
    t.actions.push_back(sim::to_array(a));
    t.observations.push_back(sim::observe(s));
  }
  return t;
}

std::array<sim::Action, policy::kHorizon> uniform_chunk(double dx) {
  std::array<sim::Action, policy::kHorizon> c;
  for (auto& a : c) a = {dx, 0.0, 0.0, -1.0};
  return c;
}

}  // namespace

TEST_CASE("chunk scaling round trip") {
  std::array<sim::ActionVec, 4> acts{{{0.05, -0.02, 0.0, 1.0}, {0.0, 0.01, -0.05, -1.0}, {}, {0.03, 0.03, 0.03, 1.0}}};
  const auto c = policy::scale_chunk(acts);
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[3] == 1.0);
  const auto back = policy::unscale_chunk(c);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(back[k].dx == doctest::Approx(acts[k][0]));
    CHECK(back[k].dz == doctest::Approx(acts[k][2]));
    CHECK(back[k].grip == acts[k][3]);
  }
  std::vector<double> wild(16, 9.0);
  for (const auto& a : policy::unscale_chunk(wild)) {
    CHECK(a.dx == sim::kMaxDelta);
    CHECK(a.grip == 1.0);
  }
}

TEST_CASE("windows: length range, virtual end, skipping") {
  const auto ext = policy::extend_trajectory(straight_line(27), 3);
  REQUIRE(ext.length() == 31);
  CHECK(ext.observations.back() == ext.observations[27]);
  for (std::size_t k = 28; k < 31; ++k) {
    CHECK(ext.actions[k - 1][0] == 0.0);
    CHECK(ext.actions[k - 1][3] == 1.0);  // keeps the last grip command
  }
  num::Rng rng(1);
  const policy::WindowParams p;
  bool saw_end = false;
  for (int k = 0; k < 20000; ++k) {
    policy::WindowSample w;
    REQUIRE(policy::sample_window(ext, p, rng, w));
    CHECK(w.length >= 4);
    CHECK(w.length <= 20);
    CHECK(w.goal == ext.observations[w.start_index + w.length]);
    CHECK(w.start == ext.observations[w.start_index]);
    if (w.start_index + w.length == ext.length() - 1) {
      saw_end = true;
      CHECK(w.goal == ext.observations.back());
      if (w.length == 4) {
        for (std::size_t j = 1; j < 4; ++j) CHECK(w.actions[j][0] == 0.0);
      }
    }
  }
  CHECK(saw_end);
  const long before = warning_count("policy.short_trajectory");
  policy::WindowSample w;
  CHECK_FALSE(policy::sample_window(straight_line(3), p, rng, w));
  CHECK(warning_count("policy.short_trajectory") == before + 1);
}

TEST_CASE("windows: length histogram is uniform (chi-square at 1%)") {
  const auto ext = policy::extend_trajectory(straight_line(60), 3);
  num::Rng rng(2);
  std::vector<double> counts(17, 0.0);
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    policy::WindowSample w;
    policy::sample_window(ext, {}, rng, w);
    counts[w.length - 4] += 1.0;
  }
  double chi2 = 0.0;
  const double expected = n / 17.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99th percentile of chi-square with 16 degrees of freedom.
  CHECK(chi2 < 32.0);
}

TEST_CASE("policy loss: gradient matches finite differences") {
  ParameterSet params = policy::policy_init(3);
  const diffusion::Schedule sched;
  num::Rng rng(4);
  std::vector<policy::PolicySample> batch(5);
  for (auto& s : batch) {
    for (double& v : s.start) v = rng.uniform();
    s.cond.resize(16);
    for (double& v : s.cond) v = rng.normal();
    for (double& v : s.target) v = rng.uniform(-1, 1);
    s.t = 1 + rng.below(100);
    s.eps.resize(16);
    for (double& v : s.eps) v = rng.normal();
  }
  const auto lg = policy::policy_loss(params, sched, batch);
  auto loss = [&] { return policy::policy_loss(params, sched, batch, false).loss; };
  const auto res = testing::check_parameters(loss, params, lg.grads, rng, 400);
  INFO("worst coordinate " << res.worst);
  CHECK(res.max_rel_error <= 1e-4);
}

TEST_CASE("action buffer: means over aligned predictions") {
  policy::ActionBuffer buf;
  CHECK_THROWS_AS(buf.emit(), std::logic_error);
  std::array<sim::Action, 4> c{{{0.01, 0.02, 0.03, 1.0}, {0.04, 0, 0, 1}, {0, 0, 0, -1}, {0, 0, 0, -1}}};
  buf.push(c);
  CHECK(buf.emit() == c[0]);

  policy::ActionBuffer two;
  two.push(uniform_chunk(0.2 * sim::kMaxDelta));
  (void)two.emit();
  two.push(uniform_chunk(0.4 * sim::kMaxDelta));
  CHECK(two.emit().dx == doctest::Approx(0.3 * sim::kMaxDelta));

  policy::ActionBuffer same;
  std::array<sim::Action, 4> d{{{0.01, -0.01, 0.0, 1.0}, {0.02, 0, 0, 1}, {0.03, 0, 0, 1}, {0.04, 0, 0, 1}}};
  sim::Action last;
  for (int k = 0; k < 4; ++k) {
    same.push(d);
    last = same.emit();
  }
  // Steps 0..3 each hold four chunks only once the buffer is full; the
  // fourth emission mixes offsets 0..3 of the same chunk.
  CHECK(same.size() == 4);
  CHECK(last.dx == doctest::Approx((0.01 + 0.02 + 0.03 + 0.04) / 4));

  policy::ActionBuffer full;
  for (int k = 0; k < 6; ++k) {
    full.push(uniform_chunk(0.01));
    CHECK(full.emit().dx == doctest::Approx(0.01));
  }
}

TEST_CASE("action buffer: a chunk only covers its own four steps") {
  policy::ActionBuffer buf;
  buf.push(uniform_chunk(0.04));
  for (int k = 0; k < 4; ++k) CHECK(buf.emit().dx == doctest::Approx(0.04));
  CHECK_THROWS_AS(buf.emit(), std::logic_error);
  buf.push(uniform_chunk(-0.02));
  CHECK(buf.emit().dx == doctest::Approx(-0.02));
  buf.clear();
  CHECK(buf.size() == 0);
}

TEST_CASE("train_policy: seeded, loss decreases, language variant, actions clamped") {
  std::vector<sim::Trajectory> trajs;
  for (std::uint64_t s = 0; s < 20; ++s) trajs.push_back(sim::scripted_demo(sim::all_tasks()[s % 10].id, s, 1.0));
  policy::PolicyTrainConfig cfg;
  cfg.steps = 150;
  cfg.batch = 32;
  cfg.log_every = 50;
  cfg.heldout_samples = 128;
  const auto a = policy::train_policy(trajs, cfg);
  const auto b = policy::train_policy(trajs, cfg);
  CHECK(a.params == b.params);
  CHECK(a.heldout_final < a.heldout_initial);
  CHECK_THROWS_AS(policy::train_policy({}, cfg), std::invalid_argument);

  const ParameterSet text = text::text_init(1);
  const auto l = policy::train_policy(trajs, cfg, &text);
  CHECK(l.heldout_final < l.heldout_initial);
  CHECK_FALSE(l.params == a.params);

  policy::ActionBuffer b1, b2;
  const auto& o = trajs[0].observations;
  for (int k = 0; k < 6; ++k) {
    const auto x = policy::policy_act(a.params, o[0], o.back(), b1, 10 + k);
    const auto y = policy::policy_act(a.params, o[0], o.back(), b2, 10 + k);
    CHECK(x == y);
    CHECK(std::abs(x.dx) <= sim::kMaxDelta);
    CHECK(std::abs(x.dy) <= sim::kMaxDelta);
    CHECK(std::abs(x.dz) <= sim::kMaxDelta);
    CHECK(std::abs(x.grip) <= 1.0);
  }
  std::vector<policy::ChunkRequest> reqs;
  for (std::uint64_t k = 0; k < 3; ++k) reqs.push_back({o[k], policy::goal_condition(o.back()), k});
  const diffusion::Schedule sched;
  const auto chunks = policy::sample_chunks(a.params, reqs, sched);
  for (std::size_t k = 0; k < 3; ++k) CHECK(chunks[k] == policy::sample_chunks(a.params, {reqs[k]}, sched)[0]);
  CHECK_THROWS_AS(policy::policy_act(ParameterSet{}, o[0], o.back(), b1, 1), std::invalid_argument);
}
