#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taksie/numerics/gru.hpp"
#include "taksie/numerics/tensor.hpp"

namespace taksie::progress {

inline constexpr std::size_t kHidden = 32;
inline constexpr std::size_t kInput = 16;
inline constexpr std::string_view kPrefix = "prog.";

struct ProgressState {
  std::vector<double> h = std::vector<double>(kHidden, 0.0);
  std::size_t steps_on_subgoal = 0;
  std::size_t achieved = 0;
  bool operator==(const ProgressState&) const = default;
};

num::GruDims progress_dims();
num::ParameterSet progress_encoder_init(std::uint64_t seed);

ProgressState progress_init();
// h' = gru(h, M(s_t)); achieved + 1; step counter back to 0.
ProgressState progress_update(const num::ParameterSet& params, const ProgressState& s,
                              std::span<const double> embedding, num::GruTape* tape = nullptr);

struct EvaluatorParams {
  double delta = 0.96;
  std::size_t lambda = 20;
};

std::string evaluator_violation(const EvaluatorParams& p);

// Rejects zero vectors and mismatched lengths.
double cosine_sim(std::span<const double> a, std::span<const double> b);

enum class Verdict { keep_going, advance };
enum class AdvanceReason { none, similarity, step_cap, interval, episode_end };

std::string_view reason_name(AdvanceReason r);

struct Evaluation {
  Verdict verdict = Verdict::keep_going;
  AdvanceReason reason = AdvanceReason::none;
  double similarity = 0.0;
};

// Advance iff cosine >= delta or steps >= lambda. Similarity takes
// precedence when both hold.
Evaluation evaluate(const EvaluatorParams& p, std::span<const double> current, std::span<const double> subgoal,
                    std::size_t steps_on_subgoal);

}  // namespace taksie::progress
