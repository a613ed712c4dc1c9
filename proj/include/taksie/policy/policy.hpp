#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "taksie/gen/diffusion.hpp"
#include "taksie/numerics/mlp.hpp"
#include "taksie/numerics/rng.hpp"
#include "taksie/sim/demo.hpp"

namespace taksie::policy {

inline constexpr std::string_view kPrefix = "pol.";
inline constexpr std::size_t kHorizon = 4;
inline constexpr std::size_t kChunkDim = kHorizon * sim::kActDim;  // 16
// [x_t 16 | start obs 16 | goal obs or text 16 | t-emb 32]
inline constexpr std::size_t kStartOff = 16, kGoalOff = 32, kTimeOff = 48;
inline constexpr std::size_t kInputDim = 80;
// Motion deltas live in [-0.05, 0.05]; scaled so the network sees [-1, 1].
inline constexpr double kMotionScale = 1.0 / sim::kMaxDelta;

using Chunk = std::array<double, kChunkDim>;

num::MlpArch policy_arch();
num::ParameterSet policy_init(std::uint64_t seed);
void check_policy(const num::ParameterSet& p);

// Network space <-> raw actions.
Chunk scale_chunk(std::span<const sim::ActionVec> actions);
std::array<sim::Action, kHorizon> unscale_chunk(std::span<const double> x);

struct WindowParams {
  std::size_t k_min = 4;
  std::size_t k_max = 20;
  std::size_t k_delta = 3;
};

struct WindowSample {
  sim::Observation start{};
  sim::Observation goal{};
  std::array<sim::ActionVec, kHorizon> actions{};
  std::size_t start_index = 0;
  std::size_t length = 0;  // goal index - start index
};

// The trajectory with its final frame repeated k_delta more times. The
// padding actions hold position and keep the last grip command.
sim::Trajectory extend_trajectory(const sim::Trajectory& t, std::size_t k_delta);

// Window length uniform in [k_min, min(k_max, L' - 1)], then the start
// uniform over the positions that fit (L' = extended length). Returns false
// and counts "policy.short_trajectory" when nothing fits.
bool sample_window(const sim::Trajectory& extended, const WindowParams& p, num::Rng& rng, WindowSample& out);

struct PolicySample {
  sim::Observation start{};
  std::vector<double> cond;  // signed goal observation, or a text embedding
  Chunk target{};            // scaled actions
  std::size_t t = 1;
  std::vector<double> eps;
};

void write_input_row(std::span<const double> x_t, double t, const sim::Observation& start,
                     std::span<const double> cond, std::span<double> row);

struct PolicyLoss {
  double loss = 0.0;
  num::ParameterSet grads;
};

PolicyLoss policy_loss(const num::ParameterSet& params, const diffusion::Schedule& sched,
                       const std::vector<PolicySample>& batch, bool want_grads = true);

struct PolicyTrainConfig {
  std::uint64_t seed = 1;
  std::size_t steps = 30000;
  std::size_t batch = 128;
  double lr = 1e-3;
  std::size_t train_steps_T = 100;
  std::size_t log_every = 500;
  std::size_t heldout_samples = 512;
  WindowParams window;
};

struct PolicyTrainResult {
  num::ParameterSet params;
  std::vector<std::pair<std::size_t, double>> loss_curve;
  double heldout_initial = 0.0;
  double heldout_final = 0.0;
  std::size_t skipped_trajectories = 0;
};

// Goal-conditioned when `text` is null; otherwise the goal slot carries the
// command embedding from these (frozen) text parameters.
PolicyTrainResult train_policy(const std::vector<sim::Trajectory>& trajs, const PolicyTrainConfig& cfg,
                               const num::ParameterSet* text = nullptr);

struct ChunkRequest {
  sim::Observation current{};
  std::vector<double> cond;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kDdimSteps = 20;

// Raw-action chunks, one per request. Rows are independent of batch size.
std::vector<std::array<sim::Action, kHorizon>> sample_chunks(const num::ParameterSet& params,
                                                             const std::vector<ChunkRequest>& reqs,
                                                             const diffusion::Schedule& sched,
                                                             std::size_t ddim_steps = kDdimSteps);

std::vector<double> goal_condition(const sim::Observation& goal);

// Receding-horizon ensemble: a chunk pushed at step t covers t..t+3.
class ActionBuffer {
 public:
  void push(const std::array<sim::Action, kHorizon>& chunk);
  // Dimension-wise mean of the entries aligned to the current step, clamped;
  // then the clock advances. Throws when nothing covers the current step.
  sim::Action emit();
  void clear();
  std::size_t size() const { return entries_.size(); }
  std::size_t now() const { return now_; }

 private:
  struct Entry {
    std::size_t step;
    std::array<sim::Action, kHorizon> chunk;
  };
  std::vector<Entry> entries_;
  std::size_t now_ = 0;
};

sim::Action policy_act(const num::ParameterSet& params, const sim::Observation& current,
                       const sim::Observation& goal, ActionBuffer& buffer, std::uint64_t seed);

}  // namespace taksie::policy
