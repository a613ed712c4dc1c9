#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <set>

#include "taksie/cli/config.hpp"
#include "taksie/cli/pipeline.hpp"
#include "taksie/numerics/checkpoint.hpp"
#include "taksie/numerics/diagnostics.hpp"
#include "taksie/sim/dataset.hpp"
#include "taksie/sim/raster.hpp"

using namespace taksie;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key = value config file");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--seed", c.seed, "master seed")->each([&c](const std::string&) { c.seed_set = true; });
  sub->add_option("--set", c.sets, "key=value override (repeatable)");
  sub->allow_extras();
}

// Leftover "--key value" / "--key=value" pairs become overrides.
std::map<std::string, std::string> overrides(const Common& c, const std::vector<std::string>& extras) {
  std::map<std::string, std::string> o;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw cli::ConfigError("--set expects key=value, got '" + s + "'");
    o[cli::canonical_key(s.substr(0, eq))] = s.substr(eq + 1);
  }
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0) throw cli::ConfigError("unexpected argument '" + a + "'");
    std::string key = a.substr(2), val;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      val = key.substr(eq + 1);
      key.resize(eq);
    } else if (i + 1 < extras.size()) {
      val = extras[++i];
    } else {
      throw cli::ConfigError("flag --" + key + " needs a value");
    }
    o[cli::canonical_key(key)] = val;
  }
  if (!c.out.empty()) o["out"] = c.out;
  if (c.seed_set) o["seed"] = std::to_string(c.seed);
  return o;
}

cli::Config resolve(const Common& c, const std::vector<std::string>& extras) {
  const std::filesystem::path file(c.config);
  return cli::load_config(c.config.empty() ? nullptr : &file, overrides(c, extras));
}

void print_warnings() {
  for (const auto& [name, n] : warning_counts()) std::cerr << "warning " << name << " x" << n << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"taksie: subgoal generation with task progress on a tabletop sim"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    Common common;
  };
  std::map<std::string, Sub> subs;
  auto make = [&](const std::string& name, const std::string& help) -> Sub& {
    auto& s = subs[name];
    s.app = app.add_subcommand(name, help);
    add_common(s.app, s.common);
    return s;
  };
  make("demos", "generate scripted demonstrations");
  make("train-repr", "train the time-contrastive encoder");
  make("select", "select ground-truth subgoals from demos");
  make("train-gen", "train the subgoal generator with the progress encoder");
  make("train-policy", "train the goal-conditioned and language-conditioned policies");
  make("eval", "run the evaluation suite");
  auto& pipe = make("pipeline", "run every stage in order");
  std::vector<std::string> only;
  pipe.app->add_option("--stages", only, "subset of stages (demos, repr, select, gen, policy, eval)");
  make("sweep-slopes", "subgoal counts and success across slope thresholds");
  auto& gen_cmd = make("gen", "generate one subgoal for a task start state");
  std::string task_name = "open_drawer";
  std::uint64_t gen_seed = 0;
  gen_cmd.app->add_option("--task", task_name, "task name");
  gen_cmd.app->add_option("--episode-seed", gen_seed, "start-state and sampling seed");
  make("config", "print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (auto& [name, s] : subs) {
      if (!s.app->parsed()) continue;
      const cli::Config cfg = resolve(s.common, s.app->remaining());
      if (name == "config") {
        std::cout << cli::dump_config(cfg);
      } else if (name == "pipeline") {
        std::set<cli::Stage> stages;
        if (only.empty()) stages.insert(std::begin(cli::kStages), std::end(cli::kStages));
        for (const auto& o : only) {
          bool found = false;
          for (auto st : cli::kStages) {
            if (cli::stage_name(st) == o || cli::stage_command(st) == o) stages.insert(st), found = true;
          }
          if (!found) throw cli::ConfigError("unknown stage '" + o + "'");
        }
        cli::run_pipeline(cfg, stages, std::cerr);
      } else if (name == "sweep-slopes") {
        const std::vector<std::pair<double, double>> grid = {
            {0.0, 0.0}, {0.001, -0.001}, {0.002, -0.002}, {0.01, -0.01}, {0.02, -0.02}};
        const auto rows = cli::sweep_slopes(cfg, grid, std::cerr);
        cli::write_file(cfg.out / "sweep_slopes.csv", cli::sweep_csv(rows));
        std::cout << cli::sweep_csv(rows);
      } else if (name == "gen") {
        const auto task = sim::parse_task(task_name);
        const auto enc = num::load_checkpoint(cfg.out / cli::artifact::encoder);
        const auto models = gen::split(num::load_checkpoint(cfg.out / cli::artifact::generator));
        const auto start = sim::reset(task, gen_seed);
        const auto cur = sim::observe(start);
        auto ps = progress::progress_update(models.prog, progress::progress_init(), repr::embed(enc, cur));
        const auto g = gen::generate_subgoal(models, cur, sim::task_info(task).command, ps.h,
                                             cfg.suite.rollout.guidance, gen_seed);
        std::ostringstream os;
        os.precision(17);
        os << "dim,current,generated\n";
        for (std::size_t i = 0; i < sim::kObsDim; ++i) os << i << ',' << cur[i] << ',' << g[i] << '\n';
        const std::string stem = "gen_" + task_name + "_" + std::to_string(gen_seed);
        cli::write_file(cfg.out / (stem + ".csv"), os.str());
        sim::write_pgm(cfg.out / (stem + ".pgm"), sim::rasterize(g), sim::kRasterSize, sim::kRasterSize);
        std::cout << os.str();
      } else {
        std::set<cli::Stage> one;
        for (auto st : cli::kStages) {
          if (cli::stage_command(st) == name) one.insert(st);
        }
        cli::run_pipeline(cfg, one, std::cerr);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    print_warnings();
    return 1;
  }
  print_warnings();
  return 0;
}
