#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "taksie/gen/diffusion.hpp"
#include "taksie/numerics/mlp.hpp"
#include "taksie/repr/encoder.hpp"
#include "taksie/select/subgoals.hpp"
#include "taksie/sim/demo.hpp"

namespace taksie::gen {

inline constexpr std::string_view kPrefix = "gen.";
// [x_t 16 | image 16 | text 16 | h 32 | t-emb 32]
inline constexpr std::size_t kImageOff = 16, kTextOff = 32, kHiddenOff = 48, kTimeOff = 80;
inline constexpr std::size_t kInputDim = 112;

num::MlpArch denoiser_arch();

struct GeneratorModels {
  num::ParameterSet gen;
  num::ParameterSet prog;
  num::ParameterSet text;
};

GeneratorModels generator_init(std::uint64_t seed);
// Throws unless every expected tensor is present with the right shape.
void check_models(const GeneratorModels& m);

struct ConditionBundle {
  sim::Observation current_obs{};
  std::vector<double> text_emb;
  std::vector<double> neg_text_emb;
  std::vector<double> h;
  bool drop_text = false;
  bool drop_image = false;
};

// One denoiser row. `image` holds a raw observation; drop_image substitutes
// zeros. `text` is whatever goes into the text slot.
void write_input_row(std::span<const double> x_t, double t, const sim::Observation& image, bool drop_image,
                     std::span<const double> text, std::span<const double> h, std::span<double> row);

// Uses conds.text_emb in the text slot (or the negative embedding when
// drop_text is set, matching the unconditional branch).
std::vector<double> denoiser_forward(const num::ParameterSet& gen, std::span<const double> x_t, double t,
                                     const ConditionBundle& conds);

// A single training example with everything random already drawn.
struct GenSample {
  sim::Observation current{};
  std::string command;
  std::vector<repr::Embedding> history;  // M(s_0), M(g_1), ..., M(g_{j-1})
  sim::Observation target{};
  std::size_t t = 1;
  std::vector<double> eps;
  bool drop_text = false;
  bool drop_image = false;
};

struct GenLoss {
  double loss = 0.0;
  num::ParameterSet grads;  // combined gen. / prog. / text. layout
};

num::ParameterSet combine(const GeneratorModels& m);
GeneratorModels split(const num::ParameterSet& combined);

// Mean over batch and dims of (eps_hat - eps)^2, backpropagated into the
// denoiser, the progress GRU (through the whole fold) and the text table.
GenLoss generator_loss(const num::ParameterSet& combined, const diffusion::Schedule& sched,
                       const std::vector<GenSample>& batch, bool want_grads = true);

struct GenTrainConfig {
  std::uint64_t seed = 1;
  std::size_t steps = 30000;
  std::size_t batch = 128;
  double lr = 1e-3;
  double drop_text = 0.1;
  double drop_image = 0.1;
  std::size_t train_steps_T = 100;
  std::size_t log_every = 500;
  std::size_t heldout_samples = 512;
};

// Per-trajectory data the sampler needs.
struct PlannedTrajectory {
  const sim::Trajectory* traj = nullptr;
  std::vector<std::size_t> subgoals;  // g_1..g_K, g_K = final frame
  std::vector<repr::Embedding> emb;   // M(s_i) for every frame
};

std::vector<PlannedTrajectory> plan_dataset(const std::vector<sim::Trajectory>& trajs,
                                            const std::vector<select::SubgoalPlan>& plans,
                                            const num::ParameterSet& encoder);

// Draws j, then a current frame uniformly in [g_{j-1}, g_j).
GenSample draw_sample(const PlannedTrajectory& p, const diffusion::Schedule& sched, double drop_text,
                      double drop_image, num::Rng& rng);

struct GenTrainResult {
  GeneratorModels models;
  std::vector<std::pair<std::size_t, double>> loss_curve;
  double heldout_initial = 0.0;
  double heldout_final = 0.0;
};

GenTrainResult train_generator(const std::vector<sim::Trajectory>& trajs,
                               const std::vector<select::SubgoalPlan>& plans, const num::ParameterSet& encoder,
                               const GenTrainConfig& cfg);

struct GuidanceParams {
  double image_scale = 2.5;
  double text_scale = 2.5;
  std::size_t ddim_steps = 50;
};

struct GenRequest {
  sim::Observation current{};
  std::vector<double> text_emb;
  std::vector<double> neg_text_emb;  // the negative prompt, or the null embedding
  std::vector<double> h;
  std::uint64_t seed = 0;
};

// Batched: requests are independent rows, so results do not depend on how
// many are sampled together.
std::vector<sim::Observation> generate_subgoals(const GeneratorModels& m, const std::vector<GenRequest>& reqs,
                                                const GuidanceParams& g, const diffusion::Schedule& sched);

sim::Observation generate_subgoal(const GeneratorModels& m, const sim::Observation& current,
                                  std::string_view command, std::span<const double> h, const GuidanceParams& g,
                                  std::uint64_t seed, bool negative_prompt = true);

// Text-slot vector for the unconditional branches.
std::vector<double> negative_slot(const GeneratorModels& m, std::string_view command, bool use_negative_prompt);

}  // namespace taksie::gen
