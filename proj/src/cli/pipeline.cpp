#include "taksie/cli/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "taksie/numerics/checkpoint.hpp"
#include "taksie/numerics/diagnostics.hpp"
#include "taksie/sim/dataset.hpp"

namespace taksie::cli {
namespace fs = std::filesystem;

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::demos: return "demos";
    case Stage::repr: return "repr";
    case Stage::select: return "select";
    case Stage::gen: return "gen";
    case Stage::policy: return "policy";
    case Stage::eval: return "eval";
  }
  return "?";
}

std::string_view stage_command(Stage s) {
  switch (s) {
    case Stage::demos: return "demos";
    case Stage::repr: return "train-repr";
    case Stage::select: return "select";
    case Stage::gen: return "train-gen";
    case Stage::policy: return "train-policy";
    case Stage::eval: return "eval";
  }
  return "?";
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fnv1a_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + p.string());
  }
  fs::rename(tmp, p);
}

std::vector<sim::Trajectory> generate_demos(const Config& c) {
  std::vector<sim::Trajectory> out;
  for (const auto& t : sim::all_tasks()) {
    for (std::size_t k = 0; k < c.demos_per_task; ++k) {
      // A rejected plan (too long) is redrawn with the next attempt index.
      for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t s = num::derive_seed(c.seed, 0xde3 + static_cast<std::uint64_t>(t.id), k * 64 + attempt);
        num::Rng rng(num::derive_seed(s, 0x5bd));
        const double speed = rng.uniform(c.speed_min, c.speed_max);
        try {
          out.push_back(sim::scripted_demo(t.id, s, speed));
          break;
        } catch (const sim::DemoTooLong&) {
          taksie::count_warning("demos.too_long");
          if (attempt == 63) throw;
        }
      }
    }
  }
  return out;
}

std::string plans_serialize(const std::vector<select::SubgoalPlan>& plans) {
  std::ostringstream os;
  os << "TAKSIE-PLANS v1 " << plans.size() << '\n';
  for (const auto& p : plans) {
    os << "plan " << p.trajectory;
    for (auto i : p.indices) os << ' ' << i;
    os << '\n';
  }
  return os.str();
}

std::vector<select::SubgoalPlan> plans_parse(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  if (line.rfind("TAKSIE-PLANS v1 ", 0) != 0) throw std::runtime_error("subgoal file: bad header");
  std::vector<select::SubgoalPlan> out;
  std::size_t no = 1;
  while (std::getline(is, line)) {
    ++no;
    std::istringstream ls(line);
    std::string tag;
    select::SubgoalPlan p;
    if (!(ls >> tag >> p.trajectory) || tag != "plan") {
      throw std::runtime_error("subgoal file line " + std::to_string(no) + ": malformed");
    }
    std::size_t i;
    while (ls >> i) p.indices.push_back(i);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<select::SubgoalPlan> select_all(const std::vector<sim::Trajectory>& trajs, const num::ParameterSet& enc,
                                            const select::SelectionParams& p) {
  std::vector<select::SubgoalPlan> plans;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    plans.push_back({i, select::subgoals_from_distances(repr::progress_curve(enc, trajs[i]), p)});
    if (const auto v = select::plan_violation(plans.back().indices, trajs[i].length(), p.min_interval); !v.empty()) {
      throw std::logic_error("selection produced an invalid plan for trajectory " + std::to_string(i) + ": " + v);
    }
  }
  return plans;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Manifest {
  std::map<std::string, std::string> entries;  // file -> checksum

  static Manifest load(const fs::path& p) {
    Manifest m;
    if (!fs::exists(p)) return m;
    std::istringstream is(read_file(p));
    std::string name, sum;
    while (is >> name >> sum) m.entries[name] = sum;
    return m;
  }
  std::string text() const {
    std::ostringstream os;
    for (const auto& [k, v] : entries) os << k << ' ' << v << '\n';
    return os.str();
  }
};

class Runner {
 public:
  Runner(const Config& c, std::ostream& log) : c_(c), log_(log), manifest_(Manifest::load(c.out / artifact::manifest)) {}

  void emit(const char* name, const std::string& bytes) {
    write_file(c_.out / name, bytes);
    manifest_.entries[name] = fnv1a_hex(bytes);
  }

  template <class F>
  void timed(Stage s, F f) {
    const auto t0 = Clock::now();
    log_ << "[" << stage_name(s) << "] start\n" << std::flush;
    f();
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    log_ << "[" << stage_name(s) << "] done in " << secs << " s\n" << std::flush;
    timings_ << stage_name(s) << ' ' << secs << '\n';
  }

  fs::path need(const char* name, Stage producer) const {
    const fs::path p = c_.out / name;
    if (!fs::exists(p)) {
      throw DependencyError("missing " + p.string() + "; run stage '" + std::string(stage_command(producer)) +
                            "' first");
    }
    return p;
  }

  void finish() {
    // the output directory is not part of what a run computes
    Config hashed = c_;
    hashed.out = ".";
    manifest_.entries["config"] = fnv1a_hex(dump_config(hashed));
    write_file(c_.out / artifact::manifest, manifest_.text());
    // wall-clock times vary run to run, so they stay out of the manifest
    write_file(c_.out / artifact::timings, timings_.str());
  }

  const Config& c_;
  std::ostream& log_;
  Manifest manifest_;
  std::ostringstream timings_;
};

}  // namespace

repr::ReprConfig evaluator_repr_config(const Config& c) {
  repr::ReprConfig e = c.repr;
  e.similarity = repr::Similarity::cosine;
  e.seed = num::derive_seed(c.seed, 0xe7a1);
  return e;
}

namespace {

std::string loss_csv(const std::vector<std::pair<std::size_t, double>>& curve) {
  std::ostringstream os;
  os.precision(17);
  os << "step,loss\n";
  for (auto [s, l] : curve) os << s << ',' << l << '\n';
  return os.str();
}

}  // namespace

void run_pipeline(const Config& c, const std::set<Stage>& stages, std::ostream& log) {
  fs::create_directories(c.out);
  Runner r(c, log);
  write_file(c.out / "config.txt", dump_config(c));

  std::vector<sim::Trajectory> demos;
  auto get_demos = [&]() -> const std::vector<sim::Trajectory>& {
    if (demos.empty()) demos = sim::dataset_read(r.need(artifact::demos, Stage::demos));
    return demos;
  };
  std::optional<num::ParameterSet> enc;
  auto get_enc = [&]() -> const num::ParameterSet& {
    if (!enc) enc = num::load_checkpoint(r.need(artifact::encoder, Stage::repr));
    return *enc;
  };
  std::optional<std::vector<select::SubgoalPlan>> plans;
  std::optional<gen::GeneratorModels> gm;
  auto get_gen = [&]() -> const gen::GeneratorModels& {
    if (!gm) gm = gen::split(num::load_checkpoint(r.need(artifact::generator, Stage::gen)));
    return *gm;
  };

  if (stages.count(Stage::demos)) {
    r.timed(Stage::demos, [&] {
      demos = generate_demos(c);
      r.emit(artifact::demos, sim::dataset_serialize(demos));
      log << "  " << demos.size() << " demonstrations\n";
    });
  }
  if (stages.count(Stage::repr)) {
    r.timed(Stage::repr, [&] {
      const auto res = repr::train_repr(get_demos(), c.repr);
      enc = res.params;
      r.emit(artifact::encoder, num::serialize_checkpoint(res.params));
      r.emit("repr_loss.csv", loss_csv(res.loss_curve));
      log << "  held-out loss " << res.heldout_initial << " -> " << res.heldout_final << '\n';
      const auto eres = repr::train_repr(get_demos(), evaluator_repr_config(c));
      r.emit(artifact::evaluator, num::serialize_checkpoint(eres.params));
      r.emit("evaluator_loss.csv", loss_csv(eres.loss_curve));
      log << "  evaluator held-out loss " << eres.heldout_initial << " -> " << eres.heldout_final << '\n';
    });
  }
  if (stages.count(Stage::select)) {
    r.timed(Stage::select, [&] {
      plans = select_all(get_demos(), get_enc(), c.selection);
      r.emit(artifact::subgoals, plans_serialize(*plans));
      for (std::size_t i = 0; i < get_demos().size(); ++i) {
        const auto curve = repr::progress_curve(get_enc(), get_demos()[i]);
        write_file(c.out / "selection" / ("traj_" + std::to_string(i) + ".csv"), select::selection_csv(curve, c.selection));
      }
      double n = 0;
      for (const auto& p : *plans) n += static_cast<double>(p.indices.size());
      log << "  mean subgoals per demo " << n / static_cast<double>(plans->size()) << '\n';
    });
  }
  if (stages.count(Stage::gen)) {
    r.timed(Stage::gen, [&] {
      if (!plans) plans = plans_parse(read_file(r.need(artifact::subgoals, Stage::select)));
      const auto res = gen::train_generator(get_demos(), *plans, get_enc(), c.gen);
      gm = res.models;
      r.emit(artifact::generator, num::serialize_checkpoint(gen::combine(res.models)));
      r.emit("gen_loss.csv", loss_csv(res.loss_curve));
      log << "  held-out loss " << res.heldout_initial << " -> " << res.heldout_final << '\n';
    });
  }
  if (stages.count(Stage::policy)) {
    r.timed(Stage::policy, [&] {
      const auto res = policy::train_policy(get_demos(), c.policy);
      r.emit(artifact::policy, num::serialize_checkpoint(res.params));
      r.emit("policy_loss.csv", loss_csv(res.loss_curve));
      log << "  held-out loss " << res.heldout_initial << " -> " << res.heldout_final << '\n';
      policy::PolicyTrainConfig lc = c.policy;
      lc.steps = c.lcbc_steps;
      const auto lres = policy::train_policy(get_demos(), lc, &get_gen().text);
      r.emit(artifact::lcbc, num::serialize_checkpoint(lres.params));
      log << "  language policy held-out loss " << lres.heldout_initial << " -> " << lres.heldout_final << '\n';
    });
  }
  if (stages.count(Stage::eval)) {
    r.timed(Stage::eval, [&] {
      const auto pol = num::load_checkpoint(r.need(artifact::policy, Stage::policy));
      const auto lcbc = num::load_checkpoint(r.need(artifact::lcbc, Stage::policy));
      const auto judge = num::load_checkpoint(r.need(artifact::evaluator, Stage::repr));
      rollout::Models m{&get_enc(), &get_gen(), &pol, &lcbc, &judge};
      const auto rep = rollout::evaluate_suite(m, c.suite);
      r.emit(artifact::report, rep.tasks_csv());
      r.emit(artifact::chains, rep.chains_csv());
      r.emit(artifact::episodes, rep.episodes_csv());
      r.emit(artifact::summary, rep.summary());
      log << rep.summary();
    });
  }
  r.finish();
}

std::vector<SweepRow> sweep_slopes(const Config& c, const std::vector<std::pair<double, double>>& grid,
                                   std::ostream& log) {
  const auto demos = sim::dataset_read(c.out / artifact::demos);
  const auto enc = num::load_checkpoint(c.out / artifact::encoder);
  const fs::path pol_path = c.out / artifact::policy;
  std::optional<num::ParameterSet> pol;
  if (fs::exists(pol_path)) pol = num::load_checkpoint(pol_path);
  std::optional<num::ParameterSet> judge;
  if (fs::exists(c.out / artifact::evaluator)) judge = num::load_checkpoint(c.out / artifact::evaluator);
  std::vector<SweepRow> rows;
  for (auto [d1, d2] : grid) {
    Config cc = c;
    cc.selection.delta1 = d1;
    cc.selection.delta2 = d2;
    SweepRow row{d1, d2};
    double n = 0;
    for (const auto& p : select_all(demos, enc, cc.selection)) n += static_cast<double>(p.indices.size());
    row.mean_subgoals = n / static_cast<double>(demos.size());
    if (pol) {
      rollout::Models m{&enc, nullptr, &*pol, nullptr, judge ? &*judge : nullptr};
      std::vector<rollout::EpisodeSpec> specs;
      for (const auto& t : sim::all_tasks()) {
        for (std::size_t i = 0; i < c.suite.seeds; ++i) {
          const std::uint64_t s = c.suite.first_seed + i;
          specs.push_back({t.id, sim::reset(t.id, s), num::derive_seed(s, static_cast<std::uint64_t>(t.id))});
        }
      }
      rollout::RolloutConfig rc = c.suite.rollout;
      rc.selection = cc.selection;
      double ok = 0;
      for (const auto& e : rollout::run_episodes(m, rollout::Mode::gt_subgoals, specs, rc)) ok += e.success;
      row.gt_success = ok / static_cast<double>(specs.size());
    }
    log << "  delta1 " << d1 << " delta2 " << d2 << ": " << row.mean_subgoals << " subgoals, gt success "
        << row.gt_success << '\n';
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << "delta1,delta2,mean_subgoals,gt_success\n";
  for (const auto& r : rows) os << r.delta1 << ',' << r.delta2 << ',' << r.mean_subgoals << ',' << r.gt_success << '\n';
  return os.str();
}

}  // namespace taksie::cli
