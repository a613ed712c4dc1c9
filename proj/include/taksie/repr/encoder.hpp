#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "taksie/numerics/mlp.hpp"
#include "taksie/numerics/tensor.hpp"
#include "taksie/sim/demo.hpp"

namespace taksie::repr {

inline constexpr std::size_t kEmbDim = 16;
using Embedding = std::array<double, kEmbDim>;

inline constexpr std::string_view kEncoderPrefix = "enc.";

// 16 -> 64 -> 64 -> 16 on observations rescaled to [-1, 1].
num::MlpArch encoder_arch();
num::ParameterSet encoder_init(std::uint64_t seed);

Embedding embed(const num::ParameterSet& enc, std::span<const double> obs);
// [n, 16] observations -> [n, 16] embeddings.
num::Tensor embed_batch(const num::ParameterSet& enc, const num::Tensor& obs);
num::Tensor observations_tensor(std::span<const sim::Observation> obs);

double l2_distance(std::span<const double> a, std::span<const double> b);

// One InfoNCE term: rows of `frames` used as anchor, positive and negatives.
struct ContrastiveItem {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::vector<std::size_t> negatives;
};

// l2: sim = -||z_a - z_b|| / tau. cosine: sim = cos(z_a, z_b) / tau.
enum class Similarity { l2, cosine };

struct ContrastiveBatch {
  num::Tensor frames;  // [m, 16] raw observations
  std::vector<ContrastiveItem> items;
  double tau = 0.1;
  Similarity similarity = Similarity::l2;
};

struct LossAndGrad {
  double loss = 0.0;
  num::ParameterSet grads;
};

// InfoNCE averaged over items. Items with no negatives contribute 0 and
// count a warning.
LossAndGrad time_contrastive_loss(const num::ParameterSet& enc, const ContrastiveBatch& batch,
                                  bool want_grads = true);

struct ReprConfig {
  std::uint64_t seed = 1;
  std::size_t steps = 5000;
  std::size_t batch = 64;
  double tau = 0.1;
  double lr = 1e-3;
  std::size_t positive_window = 3;
  std::size_t negative_gap = 10;
  std::size_t log_every = 100;
  Similarity similarity = Similarity::l2;
};

// Anchors from `pool` (indices into trajs): positive 1..window frames ahead,
// one same-trajectory negative at least `gap` frames away when one exists,
// plus every frame of the batch that came from another trajectory.
ContrastiveBatch sample_contrastive_batch(const std::vector<sim::Trajectory>& trajs,
                                          const std::vector<std::size_t>& pool, const ReprConfig& cfg, num::Rng& rng);

struct ReprTrainResult {
  num::ParameterSet params;
  std::vector<std::pair<std::size_t, double>> loss_curve;
  double heldout_initial = 0.0;
  double heldout_final = 0.0;
};

ReprTrainResult train_repr(const std::vector<sim::Trajectory>& trajs, const ReprConfig& cfg);

// d_i = ||M(s_i) - M(s_T)||; the last entry is exactly 0.
std::vector<double> progress_curve(const num::ParameterSet& enc, const sim::Trajectory& t);
std::string progress_curve_csv(const std::vector<double>& curve);

// Rank correlation with average ranks for ties. NaN when either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace taksie::repr
