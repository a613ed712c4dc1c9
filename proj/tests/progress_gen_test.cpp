#include <doctest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "taksie/gen/diffusion.hpp"
#include "taksie/gen/generator.hpp"
#include "taksie/gen/text.hpp"
#include "taksie/numerics/diagnostics.hpp"
#include "taksie/progress/progress.hpp"
#include "taksie/sim/demo.hpp"

using namespace taksie;
using num::ParameterSet;
using num::Tensor;

namespace {

std::vector<double> unit(std::size_t n, std::size_t hot) {
  std::vector<double> v(n, 0.0);
  v[hot] = 1.0;
  return v;
}

std::vector<double> random_vec(num::Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

sim::Observation random_obs(num::Rng& rng) {
  sim::Observation o;
  for (double& v : o) v = rng.uniform();
  return o;
}

}  // namespace

TEST_CASE("progress_init: zero state") {
  const auto s = progress::progress_init();
  CHECK(s.h == std::vector<double>(32, 0.0));
  CHECK(s.steps_on_subgoal == 0);
  CHECK(s.achieved == 0);
  CHECK(progress::progress_init() == progress::progress_init());
}

TEST_CASE("progress_update: zero-weight cell halves h") {
  ParameterSet p = progress::progress_encoder_init(1);
  for (auto& [name, t] : p) t.fill(0.0);
  num::Rng rng(2);
  progress::ProgressState s;
  s.h = random_vec(rng, 32);
  s.steps_on_subgoal = 5;
  const auto n = progress::progress_update(p, s, random_vec(rng, 16));
  for (std::size_t i = 0; i < 32; ++i) CHECK(n.h[i] == doctest::Approx(0.5 * s.h[i]).epsilon(1e-15));
  CHECK(n.achieved == s.achieved + 1);
  CHECK(n.steps_on_subgoal == 0);
  CHECK_THROWS_AS(progress::progress_update(p, s, random_vec(rng, 15)), std::invalid_argument);
}

TEST_CASE("progress_update: sequence equals a fold of the GRU cell") {
  const ParameterSet p = progress::progress_encoder_init(4);
  num::Rng rng(3);
  std::vector<std::vector<double>> embs;
  for (int k = 0; k < 6; ++k) embs.push_back(random_vec(rng, 16));
  auto s = progress::progress_init();
  std::vector<double> h(32, 0.0);
  for (const auto& e : embs) {
    s = progress::progress_update(p, s, e);
    h = num::gru_cell(p, progress::progress_dims(), h, e, progress::kPrefix);
  }
  CHECK(s.h == h);
  CHECK(s.achieved == embs.size());
  auto again = progress::progress_init();
  for (const auto& e : embs) again = progress::progress_update(p, again, e);
  CHECK(again == s);
}

TEST_CASE("cosine similarity closed forms") {
  CHECK(progress::cosine_sim(unit(16, 0), unit(16, 0)) == doctest::Approx(1.0));
  CHECK(progress::cosine_sim(unit(16, 0), unit(16, 1)) == doctest::Approx(0.0));
  auto b = unit(16, 0);
  b[1] = 1.0;
  CHECK(progress::cosine_sim(unit(16, 0), b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(progress::cosine_sim(unit(16, 0), std::vector<double>(16, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(progress::cosine_sim(unit(16, 0), unit(15, 0)), std::invalid_argument);
}

namespace {

// Builds a pair of vectors with a prescribed cosine.
std::pair<std::vector<double>, std::vector<double>> with_cosine(double c) {
  std::vector<double> a = unit(16, 0), b(16, 0.0);
  b[0] = c;
  b[1] = std::sqrt(1.0 - c * c);
  return {a, b};
}

}  // namespace

TEST_CASE("evaluate: threshold and step cap") {
  const progress::EvaluatorParams p;
  {
    const auto [a, b] = with_cosine(0.97);
    const auto e = progress::evaluate(p, a, b, 3);
    CHECK(e.verdict == progress::Verdict::advance);
    CHECK(e.reason == progress::AdvanceReason::similarity);
  }
  {
    const auto [a, b] = with_cosine(0.5);
    const auto e = progress::evaluate(p, a, b, 20);
    CHECK(e.verdict == progress::Verdict::advance);
    CHECK(e.reason == progress::AdvanceReason::step_cap);
    CHECK(progress::evaluate(p, a, b, 3).verdict == progress::Verdict::keep_going);
    CHECK(progress::evaluate(p, a, b, 19).verdict == progress::Verdict::keep_going);
  }
  CHECK(progress::evaluator_violation({0.0, 20}).size() > 0);
  CHECK(progress::evaluator_violation({0.96, 0}).size() > 0);
  CHECK(progress::evaluator_violation(p).empty());
}

TEST_CASE("evaluate: identical embeddings advance; verdict monotone in similarity and steps") {
  num::Rng rng(5);
  for (double delta : {0.1, 0.5, 0.96, 1.0}) {
    const auto v = random_vec(rng, 16);
    CHECK(progress::evaluate({delta, 20}, v, v, 0).verdict == progress::Verdict::advance);
  }
  const progress::EvaluatorParams p;
  for (std::size_t steps = 0; steps < 30; ++steps) {
    bool advanced = false;
    for (double c = -0.99; c <= 0.999; c += 0.01) {
      const auto [a, b] = with_cosine(c);
      const bool adv = progress::evaluate(p, a, b, steps).verdict == progress::Verdict::advance;
      CHECK((!advanced || adv));
      advanced = advanced || adv;
      CHECK((!adv || progress::evaluate(p, a, b, steps + 1).verdict == progress::Verdict::advance));
    }
  }
}

TEST_CASE("schedule and q_sample") {
  const diffusion::Schedule s;
  CHECK(s.steps() == 100);
  CHECK(s.alpha_bar(0) == 1.0);
  for (std::size_t t = 1; t <= 100; ++t) {
    CHECK(s.beta(t) > 0.0);
    CHECK(s.beta(t) < 1.0);
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  }
  CHECK(s.beta(1) == doctest::Approx(1e-3));
  CHECK(s.beta(100) == doctest::Approx(0.2));
  // near-zero terminal signal, so sampling can start from N(0, I)
  CHECK(s.alpha_bar(100) < 1e-4);
  const std::vector<double> x0{1.0}, eps{1.0};
  // No schedule step lands on alpha_bar = 0.25 exactly, so check the closed form through ddim_update's inverse.
  std::vector<double> xt{0.5 + std::sqrt(0.75)};
  diffusion::ddim_update(xt, eps, 0.25, 1.0);
  CHECK(xt[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(diffusion::q_sample(s, x0, 1, eps)[0] ==
        doctest::Approx(std::sqrt(s.alpha_bar(1)) + std::sqrt(1 - s.alpha_bar(1))).epsilon(1e-14));
  CHECK_THROWS_AS(diffusion::q_sample(s, x0, 0, eps), std::out_of_range);
  CHECK_THROWS_AS(diffusion::q_sample(s, x0, 101, eps), std::out_of_range);
}

TEST_CASE("q_sample limits and the 0.25 closed form") {
  // Schedules with alpha_bar close to 1 and close to 0.
  const diffusion::Schedule tiny(1, 1e-12, 1e-12);
  const std::vector<double> x0{0.3, -0.7}, eps{1.2, 0.4};
  const auto near = diffusion::q_sample(tiny, x0, 1, eps);
  CHECK(near[0] == doctest::Approx(0.3).epsilon(1e-5));
  const diffusion::Schedule big(200, 0.2, 0.2);
  const auto far = diffusion::q_sample(big, x0, 200, eps);
  CHECK(far[0] == doctest::Approx(1.2).epsilon(1e-9));
  CHECK(far[1] == doctest::Approx(0.4).epsilon(1e-9));
  // One step with beta = 0.75 gives alpha_bar = 0.25.
  const diffusion::Schedule quarter(1, 0.75, 0.75);
  CHECK(diffusion::q_sample(quarter, std::vector<double>{1.0}, 1, std::vector<double>{1.0})[0] ==
        doctest::Approx(1.3660254).epsilon(1e-7));
}

TEST_CASE("ddim: closed form, exact inversion, zero denoiser chain") {
  const diffusion::Schedule quarter(1, 0.75, 0.75);
  CHECK(diffusion::ddim_step(quarter, std::vector<double>{1.0}, std::vector<double>{1.0}, 1, 0)[0] ==
        doctest::Approx(0.26795).epsilon(1e-5));
  CHECK_THROWS_AS(diffusion::ddim_step(quarter, std::vector<double>{1.0}, std::vector<double>{1.0}, 0, 0),
                  std::invalid_argument);
  std::vector<double> z{1.0};
  CHECK_THROWS_AS(diffusion::ddim_update(z, std::vector<double>{1.0}, 0.0, 1.0), std::invalid_argument);

  const diffusion::Schedule s;
  num::Rng rng(6);
  for (std::size_t t : {1, 17, 50, 100}) {
    const auto x0 = random_vec(rng, 16), eps = random_vec(rng, 16);
    const auto xt = diffusion::q_sample(s, x0, t, eps);
    const auto back = diffusion::ddim_step(s, xt, eps, t, 0);
    for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(back[i] - x0[i]) <= 1e-12);
  }

  const auto ts = diffusion::ddim_timesteps(100, 50);
  REQUIRE(ts.size() == 51);
  CHECK(ts.front() == 100);
  CHECK(ts[1] == 98);
  CHECK(ts.back() == 0);
  std::vector<double> x = random_vec(rng, 16);
  const std::vector<double> x_T = x, zero(16, 0.0);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) x = diffusion::ddim_step(s, x, zero, ts[k], ts[k + 1]);
  // With eps = 0 every step rescales by sqrt(ab_next / ab_t); the product telescopes.
  double scale = 1.0;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) scale *= std::sqrt(s.alpha_bar(ts[k + 1])) / std::sqrt(s.alpha_bar(ts[k]));
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(x[i] == doctest::Approx(x_T[i] * scale).epsilon(1e-12));
    CHECK(x[i] == doctest::Approx(x_T[i] / std::sqrt(s.alpha_bar(100))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(diffusion::ddim_timesteps(100, 30), std::invalid_argument);
}

TEST_CASE("timestep embedding") {
  std::vector<double> e(32);
  diffusion::timestep_embedding(0.0, e);
  for (std::size_t k = 0; k < 16; ++k) {
    CHECK(e[k] == 0.0);
    CHECK(e[16 + k] == 1.0);
  }
  diffusion::timestep_embedding(7.0, e);
  CHECK(e[0] == doctest::Approx(std::sin(7.0)));
  CHECK(e[16 + 8] == doctest::Approx(std::cos(7.0 * std::pow(10000.0, -0.5))));
}

TEST_CASE("cfg_combine") {
  num::Rng rng(7);
  const auto a = random_vec(rng, 16), b = random_vec(rng, 16), c = random_vec(rng, 16);
  std::vector<double> out(16);
  diffusion::cfg_combine(a, b, c, 1.0, 1.0, out);
  CHECK(out == c);
  const std::vector<double> zero(16, 0.0), one(16, 1.0);
  diffusion::cfg_combine(zero, zero, one, 2.5, 2.5, out);
  for (double v : out) CHECK(v == doctest::Approx(2.5));
  for (double si : {0.0, 1.3, 2.5, 7.0}) {
    for (double st : {0.0, 2.5, 4.0}) {
      diffusion::cfg_combine(a, a, a, si, st, out);
      for (std::size_t i = 0; i < 16; ++i) CHECK(out[i] == doctest::Approx(a[i]).epsilon(1e-12));
      diffusion::cfg_combine(a, b, c, si, st, out);
      for (std::size_t i = 0; i < 16; ++i) {
        CHECK(out[i] == doctest::Approx(a[i] + si * (b[i] - a[i]) + st * (c[i] - b[i])).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(diffusion::cfg_combine(a, b, std::vector<double>(3), 1, 1, out), std::invalid_argument);
}

TEST_CASE("text: vocabulary, encoding and antonyms") {
  const ParameterSet p = text::text_init(3);
  CHECK(text::encode_text(p, "open the drawer") == text::encode_text(p, "open the drawer"));
  const auto one = text::encode_text(p, "drawer");
  const auto row = p.at(text::kTableName).row(text::token_id("drawer"));
  for (std::size_t d = 0; d < 16; ++d) CHECK(one[d] == row[d]);
  const auto three = text::encode_text(p, "open the drawer");
  for (std::size_t d = 0; d < 16; ++d) {
    const double m = (p.at(text::kTableName).at(text::token_id("open"), d) +
                      p.at(text::kTableName).at(text::token_id("the"), d) + row[d]) / 3.0;
    CHECK(three[d] == doctest::Approx(m).epsilon(1e-14));
  }
  try {
    text::encode_text(p, "open the fridge");
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("fridge") != std::string::npos);
  }
  for (double v : text::null_embedding(p)) CHECK(v == 0.0);

  CHECK(text::antonym("open the drawer") == "close the drawer");
  CHECK(text::antonym("push the red block left") == "push the red block right");
  for (const auto& t : sim::all_tasks()) {
    CHECK(text::antonym(text::antonym(t.command)) == t.command);
    CHECK(text::antonym(t.command) == t.negative);
  }
  const long before = warning_count("text.no_antonym");
  CHECK(text::antonym("the drawer").empty());
  CHECK(warning_count("text.no_antonym") == before + 1);
}

TEST_CASE("denoiser: zero final layer and dropped image") {
  auto m = gen::generator_init(2);
  num::Rng rng(8);
  gen::ConditionBundle c;
  c.current_obs = random_obs(rng);
  c.text_emb = text::encode_text(m.text, "turn the light on");
  c.neg_text_emb = text::encode_text(m.text, "turn the light off");
  c.h = random_vec(rng, 32);
  const auto x = random_vec(rng, 16);

  c.drop_image = true;
  const auto a = gen::denoiser_forward(m.gen, x, 40, c);
  c.current_obs = random_obs(rng);
  CHECK(gen::denoiser_forward(m.gen, x, 40, c) == a);
  c.drop_image = false;
  CHECK_FALSE(gen::denoiser_forward(m.gen, x, 40, c) == a);
  c.drop_text = true;
  const auto neg_slot = gen::denoiser_forward(m.gen, x, 40, c);
  c.drop_text = false;
  c.text_emb = c.neg_text_emb;
  CHECK(gen::denoiser_forward(m.gen, x, 40, c) == neg_slot);

  m.gen.at("gen.w3").fill(0.0);
  m.gen.at("gen.b3").fill(0.0);
  for (double v : gen::denoiser_forward(m.gen, x, 40, c)) CHECK(v == 0.0);
  c.h.resize(31);
  CHECK_THROWS_AS(gen::denoiser_forward(m.gen, x, 40, c), std::invalid_argument);
}

TEST_CASE("generator loss: gradients through denoiser, GRU fold and text table") {
  ParameterSet params = gen::combine(gen::generator_init(5));
  const diffusion::Schedule sched;
  num::Rng rng(9);
  std::vector<gen::GenSample> batch;
  const char* commands[] = {"open the drawer", "push the red block left", "turn the light on", "lift the red block"};
  for (int b = 0; b < 4; ++b) {
    gen::GenSample s;
    s.current = random_obs(rng);
    s.target = random_obs(rng);
    s.command = commands[b];
    for (int k = 0; k <= b; ++k) {
      repr::Embedding e;
      for (double& v : e) v = rng.normal();
      s.history.push_back(e);
    }
    s.t = 1 + rng.below(100);
    s.eps = random_vec(rng, 16);
    s.drop_text = b == 1;
    s.drop_image = b == 2;
    batch.push_back(s);
  }
  // A nonzero null embedding so its gradient path is exercised.
  for (double& v : params.at(text::kNullName).data()) v = rng.normal() * 0.3;
  const auto lg = gen::generator_loss(params, sched, batch);
  auto loss = [&] { return gen::generator_loss(params, sched, batch, false).loss; };

  for (std::string_view prefix : {"gen.", "prog.", "text."}) {
    ParameterSet sub = params.subset(prefix);
    const ParameterSet gsub = lg.grads.subset(prefix);
    // Perturb the coordinates of the full set through the subset copy.
    auto sub_loss = [&] {
      ParameterSet full = params;
      for (const auto& [name, t] : sub) full.at(name) = t;
      return gen::generator_loss(full, sched, batch, false).loss;
    };
    const auto res = testing::check_parameters(sub_loss, sub, gsub, rng, 150);
    INFO(prefix << " worst coordinate " << res.worst);
    CHECK(res.max_rel_error <= 1e-4);
  }
  CHECK(loss() == doctest::Approx(lg.loss).epsilon(1e-14));
  // Commanded word rows receive gradient; the null embedding gets the dropped row's.
  double null_norm = 0.0;
  for (double v : lg.grads.at(text::kNullName).data()) null_norm += v * v;
  CHECK(null_norm > 0.0);
}

TEST_CASE("generator: dataset planning, sampling, seeded training and generation") {
  std::vector<sim::Trajectory> trajs;
  for (std::uint64_t s = 0; s < 20; ++s) trajs.push_back(sim::scripted_demo(sim::all_tasks()[s % 10].id, s, 1.0));
  std::vector<select::SubgoalPlan> plans;
  for (std::size_t i = 0; i < trajs.size(); ++i) plans.push_back({i, select::fixed_interval_select(trajs[i].length(), 10)});
  const auto enc = repr::encoder_init(1);

  auto missing = plans;
  missing.pop_back();
  CHECK_THROWS_AS(gen::plan_dataset(trajs, missing, enc), std::invalid_argument);

  const auto planned = gen::plan_dataset(trajs, plans, enc);
  const diffusion::Schedule sched;
  num::Rng rng(10);
  for (int k = 0; k < 200; ++k) {
    const auto& p = planned[rng.below(planned.size())];
    const auto s = gen::draw_sample(p, sched, 0.1, 0.1, rng);
    CHECK(s.t >= 1);
    CHECK(s.t <= 100);
    CHECK_FALSE(s.history.empty());
    CHECK(s.history.size() <= p.subgoals.size());
    CHECK(s.history[0] == p.emb[0]);
    const std::size_t j = s.history.size() - 1;
    CHECK(s.target == p.traj->observations[p.subgoals[j]]);
  }

  gen::GenTrainConfig cfg;
  cfg.steps = 150;
  cfg.batch = 32;
  cfg.log_every = 50;
  cfg.heldout_samples = 128;
  const auto a = gen::train_generator(trajs, plans, enc, cfg);
  const auto b = gen::train_generator(trajs, plans, enc, cfg);
  CHECK(gen::combine(a.models) == gen::combine(b.models));
  CHECK(a.heldout_final < a.heldout_initial);

  gen::GenTrainConfig blind = cfg;
  blind.drop_text = 1.0;
  blind.drop_image = 1.0;
  const auto u = gen::train_generator(trajs, plans, enc, blind);
  CHECK(u.heldout_final < u.heldout_initial);

  CHECK(progress::cosine_sim(text::encode_text(a.models.text, "open the drawer"),
                             text::encode_text(a.models.text, "close the drawer")) < 0.95);

  const gen::GuidanceParams g;
  const std::vector<double> h(32, 0.1);
  const auto cur = trajs[0].observations[0];
  const auto s1 = gen::generate_subgoal(a.models, cur, trajs[0].command, h, g, 77);
  const auto s2 = gen::generate_subgoal(a.models, cur, trajs[0].command, h, g, 77);
  CHECK(s1 == s2);
  for (double v : s1) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // Batched sampling matches one-at-a-time.
  std::vector<gen::GenRequest> reqs;
  for (std::uint64_t k = 0; k < 3; ++k) {
    gen::GenRequest q;
    q.current = trajs[k].observations[0];
    q.text_emb = text::encode_text(a.models.text, trajs[k].command);
    q.neg_text_emb = gen::negative_slot(a.models, trajs[k].command, true);
    q.h = h;
    q.seed = 100 + k;
    reqs.push_back(q);
  }
  const auto batched = gen::generate_subgoals(a.models, reqs, g, sched);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(batched[k] == gen::generate_subgoals(a.models, {reqs[k]}, g, sched)[0]);
  }
  gen::GeneratorModels broken = a.models;
  broken.gen = ParameterSet{};
  CHECK_THROWS_AS(gen::generate_subgoal(broken, cur, trajs[0].command, h, g, 1), std::invalid_argument);
}
