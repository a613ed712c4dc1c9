#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace taksie::select {

struct SelectionParams {
  double smooth_frac = 0.167;
  double delta1 = 0.0;
  double delta2 = 0.0;
  std::size_t min_interval = 7;
};

std::string params_violation(const SelectionParams& p);

struct SubgoalPlan {
  std::size_t trajectory = 0;
  std::vector<std::size_t> indices;
  bool operator==(const SubgoalPlan&) const = default;
};

// Increasing, consecutive gap >= d, last index == length - 1.
std::string plan_violation(const std::vector<std::size_t>& indices, std::size_t length, std::size_t min_interval);

// Locally weighted linear regression on x = 0..n-1, no robustness passes.
// Each point uses its ceil(frac * n) nearest neighbours (the left window on
// ties) with tricube weights scaled by the farthest neighbour.
std::vector<double> lowess_smooth(std::span<const double> y, double frac);

// lowess_smooth, except that curves shorter than 2 / frac use
// frac = min(1, 2 / n), and curves of length < 3 are returned unchanged.
std::vector<double> smooth_curve(std::span<const double> y, double frac);

// Central differences (one-sided at the ends) divided by max |I|; all-zero
// input stays zero.
std::vector<double> slopes(std::span<const double> y);

// `curve` is an already smoothed distance curve.
std::vector<std::size_t> select_subgoals(std::span<const double> curve, const SelectionParams& p);

// Raw distance curve -> smooth_curve -> select_subgoals.
std::vector<std::size_t> subgoals_from_distances(std::span<const double> raw, const SelectionParams& p);

std::vector<std::size_t> fixed_interval_select(std::size_t length, std::size_t interval);

// frame,raw,smoothed,slope,selected
std::string selection_csv(std::span<const double> raw, const SelectionParams& p);

}  // namespace taksie::select
