#include "taksie/progress/progress.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace taksie::progress {

num::GruDims progress_dims() { return {kInput, kHidden}; }

num::ParameterSet progress_encoder_init(std::uint64_t seed) {
  num::Rng rng(num::derive_seed(seed, 0x960));
  num::ParameterSet p;
  num::gru_init(p, progress_dims(), rng, kPrefix);
  return p;
}

ProgressState progress_init() { return {}; }

ProgressState progress_update(const num::ParameterSet& params, const ProgressState& s,
                              std::span<const double> embedding, num::GruTape* tape) {
  if (embedding.size() != kInput) {
    throw std::invalid_argument("progress update expects a 16-dim embedding, got " + std::to_string(embedding.size()));
  }
  ProgressState n;
  n.h = num::gru_cell(params, progress_dims(), s.h, embedding, kPrefix, tape);
  n.achieved = s.achieved + 1;
  n.steps_on_subgoal = 0;
  return n;
}

std::string evaluator_violation(const EvaluatorParams& p) {
  if (!(p.delta > 0.0 && p.delta <= 1.0)) return "delta must lie in (0, 1]";
  if (p.lambda < 1) return "lambda must be at least 1";
  return {};
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine similarity of vectors with different lengths");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw std::invalid_argument("cosine similarity of a zero vector (degenerate embedding)");
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

std::string_view reason_name(AdvanceReason r) {
  switch (r) {
    case AdvanceReason::none: return "none";
    case AdvanceReason::similarity: return "similarity";
    case AdvanceReason::step_cap: return "step_cap";
    case AdvanceReason::interval: return "interval";
    case AdvanceReason::episode_end: return "episode_end";
  }
  return "?";
}

Evaluation evaluate(const EvaluatorParams& p, std::span<const double> current, std::span<const double> subgoal,
                    std::size_t steps_on_subgoal) {
  Evaluation e;
  e.similarity = cosine_sim(current, subgoal);
  if (e.similarity >= p.delta) {
    e.verdict = Verdict::advance;
    e.reason = AdvanceReason::similarity;
  } else if (steps_on_subgoal >= p.lambda) {
    e.verdict = Verdict::advance;
    e.reason = AdvanceReason::step_cap;
  }
  return e;
}

}  // namespace taksie::progress
