#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "taksie/cli/config.hpp"

namespace taksie::cli {

enum class Stage { demos, repr, select, gen, policy, eval };

inline constexpr Stage kStages[] = {Stage::demos, Stage::repr, Stage::select, Stage::gen, Stage::policy, Stage::eval};

std::string_view stage_name(Stage s);
// Subcommand spelling, e.g. "train-gen".
std::string_view stage_command(Stage s);

// Artifact paths inside the output directory.
namespace artifact {
inline constexpr const char* demos = "demos.txt";
inline constexpr const char* encoder = "encoder.ckpt";
inline constexpr const char* evaluator = "evaluator.ckpt";  // cosine-trained, used by the advance check
inline constexpr const char* subgoals = "subgoals.txt";
inline constexpr const char* generator = "generator.ckpt";
inline constexpr const char* policy = "policy.ckpt";
inline constexpr const char* lcbc = "lcbc.ckpt";
inline constexpr const char* report = "report_tasks.csv";
inline constexpr const char* chains = "report_chains.csv";
inline constexpr const char* episodes = "episodes.csv";
inline constexpr const char* summary = "summary.txt";
inline constexpr const char* manifest = "manifest.txt";
inline constexpr const char* timings = "timings.txt";  // "<stage> <seconds>" per line
}  // namespace artifact

class DependencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a(std::string_view bytes);
std::string fnv1a_hex(std::string_view bytes);

std::vector<sim::Trajectory> generate_demos(const Config& c);
// Same schedule as the main encoder, cosine similarity, its own seed.
repr::ReprConfig evaluator_repr_config(const Config& c);

std::string plans_serialize(const std::vector<select::SubgoalPlan>& plans);
std::vector<select::SubgoalPlan> plans_parse(const std::string& text);
std::vector<select::SubgoalPlan> select_all(const std::vector<sim::Trajectory>& trajs, const num::ParameterSet& enc,
                                            const select::SelectionParams& p);

// Runs the requested stages in dependency order. Inputs of a stage that is
// not requested must already be on disk.
void run_pipeline(const Config& c, const std::set<Stage>& stages, std::ostream& log);

struct SweepRow {
  double delta1 = 0.0, delta2 = 0.0;
  double mean_subgoals = 0.0;
  double gt_success = 0.0;
};

// Subgoal count over the demo set plus gt_subgoals success for each
// threshold pair, using the trained encoder and policy.
std::vector<SweepRow> sweep_slopes(const Config& c, const std::vector<std::pair<double, double>>& grid,
                                   std::ostream& log);
std::string sweep_csv(const std::vector<SweepRow>& rows);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& bytes);

}  // namespace taksie::cli
