#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taksie/gen/generator.hpp"
#include "taksie/progress/progress.hpp"
#include "taksie/select/subgoals.hpp"
#include "taksie/sim/world.hpp"

namespace taksie::rollout {

enum class Mode {
  taksie,
  fixed_interval,
  no_progress_encoder,
  no_negative_prompt,
  gt_subgoals,
  gt_final_only,
  lcbc_baseline,
};

inline constexpr std::array<Mode, 7> kAllModes = {Mode::taksie,         Mode::fixed_interval, Mode::no_progress_encoder,
                                                  Mode::no_negative_prompt, Mode::gt_subgoals, Mode::gt_final_only,
                                                  Mode::lcbc_baseline};

std::string_view mode_name(Mode m);
std::optional<Mode> mode_from_name(std::string_view name);

// Borrowed; any may be null when a mode does not need it.
struct Models {
  const num::ParameterSet* encoder = nullptr;
  const gen::GeneratorModels* generator = nullptr;
  const num::ParameterSet* policy = nullptr;
  const num::ParameterSet* lcbc = nullptr;
  // Cosine-trained encoder for the advance check; falls back to `encoder`.
  const num::ParameterSet* evaluator = nullptr;
};

// Empty when `m` has what `mode` needs, otherwise the missing piece.
std::string missing_model(const Models& m, Mode mode);

struct RolloutConfig {
  std::size_t episode_cap = 120;
  std::size_t interval = 10;
  progress::EvaluatorParams evaluator;
  gen::GuidanceParams guidance;
  select::SelectionParams selection;
  double reference_speed = 1.0;
};

struct EpisodeSpec {
  sim::TaskId task = sim::TaskId::open_drawer;
  sim::WorldState start;
  std::uint64_t seed = 0;
};

struct EpisodeResult {
  sim::TaskId task = sim::TaskId::open_drawer;
  bool success = false;
  std::size_t steps = 0;
  std::size_t subgoals = 0;
  // One per subgoal, including the one in use when the episode ended.
  std::vector<progress::AdvanceReason> reasons;
  std::vector<std::size_t> advance_steps;
  sim::WorldState final_state;
  bool operator==(const EpisodeResult&) const = default;
};

// Episodes advance in lockstep so generator and policy calls are batched.
// Every network row is independent of the others, so a result does not
// depend on which episodes share the batch.
std::vector<EpisodeResult> run_episodes(const Models& models, Mode mode, const std::vector<EpisodeSpec>& specs,
                                        const RolloutConfig& cfg);

// Start state reset(task, seed); network seeds derived from (seed, task).
EpisodeResult run_episode(const Models& models, sim::TaskId task, Mode mode, std::uint64_t seed,
                          const RolloutConfig& cfg);

// Ground-truth subgoal observations for a start state: a reference scripted
// demo, its distance curve under the encoder, then slope selection.
std::vector<sim::Observation> reference_subgoals(const num::ParameterSet& encoder, sim::TaskId task,
                                                 const sim::WorldState& start, std::uint64_t seed,
                                                 const RolloutConfig& cfg);

struct ChainSpec {
  sim::WorldState start;
  std::array<sim::TaskId, 5> tasks{};
  std::uint64_t seed = 0;
};

// Each task's precondition holds on the oracle-completed state of the tasks
// before it. Throws after 100 failed attempts.
ChainSpec sample_chain(std::uint64_t seed);

struct ChainResult {
  std::array<sim::TaskId, 5> tasks{};
  std::size_t completed = 0;
  bool operator==(const ChainResult&) const = default;
};

// No reset between tasks; stops at the first failure.
std::vector<ChainResult> run_chains(const Models& models, Mode mode, const std::vector<ChainSpec>& chains,
                                    const RolloutConfig& cfg);
ChainResult run_chain(const Models& models, const ChainSpec& chain, Mode mode, const RolloutConfig& cfg);

struct SuiteConfig {
  std::vector<Mode> modes{kAllModes.begin(), kAllModes.end()};
  std::size_t seeds = 50;
  std::size_t chains = 100;
  std::uint64_t first_seed = 1000000;
  RolloutConfig rollout;
};

struct TaskRow {
  Mode mode;
  sim::TaskId task;
  bool skipped = false;
  std::size_t seeds = 0, successes = 0;
  double rate = 0.0, mean_steps = 0.0, mean_subgoals = 0.0;
};

struct ChainRow {
  Mode mode;
  bool skipped = false;
  std::size_t chains = 0;
  double avg_len = 0.0;
  std::array<std::size_t, 5> at_least{};  // chains completing >= k tasks, k = 1..5
};

struct Report {
  std::vector<TaskRow> tasks;
  std::vector<ChainRow> chains;
  std::vector<std::pair<Mode, std::vector<EpisodeResult>>> episodes;
  std::vector<std::string> skipped_reasons;

  std::string tasks_csv() const;
  std::string chains_csv() const;
  std::string episodes_csv() const;
  // Success rate of a mode averaged over the given tasks (all when empty).
  std::optional<double> mean_rate(Mode m, const std::vector<sim::TaskId>& tasks = {}) const;
  std::optional<double> avg_chain_len(Mode m) const;
  std::string summary() const;
};

Report evaluate_suite(const Models& models, const SuiteConfig& cfg);

// Directional check on push tasks: pairs drawn from fresh demos the way
// training pairs are, restricted to segments whose reference subgoal shifts
// the red block by more than kMinShift the commanded way. A generation is
// correct when its red x lies on that side of the current one.
struct DirectionResult {
  static constexpr double kMinShift = 0.01;
  std::size_t total = 0;
  std::size_t correct = 0;
  double fraction() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

DirectionResult direction_check(const num::ParameterSet& encoder, const gen::GeneratorModels& g, sim::TaskId task,
                                std::size_t generations, std::uint64_t seed, bool negative_prompt,
                                const RolloutConfig& cfg);

}  // namespace taksie::rollout
