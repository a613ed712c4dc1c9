#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "taksie/numerics/rng.hpp"
#include "taksie/numerics/tensor.hpp"

namespace taksie::num {

// Gated recurrent unit:
//   z  = sigmoid([x; h] Wz + bz)
//   r  = sigmoid([x; h] Wr + br)
//   hc = tanh([x; r*h] Wh + bh)
//   h' = (1 - z) * h + z * hc
// Weights are input-major, shape [input + hidden, hidden].
struct GruDims {
  std::size_t input = 16;
  std::size_t hidden = 32;
};

void gru_init(ParameterSet& params, const GruDims& dims, Rng& rng, std::string_view prefix = "");

struct GruTape {
  std::vector<double> x, h_prev, z, r, cand, h_next;
};

std::vector<double> gru_cell(const ParameterSet& params, const GruDims& dims,
                             std::span<const double> h_prev, std::span<const double> x,
                             std::string_view prefix = "", GruTape* tape = nullptr);

Tensor gru_cell(const ParameterSet& params, const Tensor& h_prev, const Tensor& x,
                std::string_view prefix = "");

struct GruInputGrads {
  std::vector<double> h_prev;
  std::vector<double> x;
};

// Backpropagates dL/dh' through one cell, adding parameter gradients into
// `grads`.
GruInputGrads gru_cell_backward(const ParameterSet& params, const GruDims& dims,
                                const GruTape& tape, std::span<const double> grad_h_next,
                                ParameterSet& grads, std::string_view prefix = "");

GruDims gru_dims(const ParameterSet& params, std::string_view prefix = "");

}  // namespace taksie::num
