#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "taksie/numerics/rng.hpp"
#include "taksie/numerics/tensor.hpp"

namespace taksie::num {

// Fully connected stack: widths = {in, hidden..., out}. Hidden layers use
// ReLU, the output layer is affine.
//
// Layer i stores weight "<prefix>w<i>" with shape [in_i, out_i] (input-major,
// so y = x W + b for a row vector x) and bias "<prefix>b<i>" with shape
// [out_i].
struct MlpArch {
  std::vector<std::size_t> widths;

  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }
};

std::string mlp_weight_name(std::string_view prefix, std::size_t layer);
std::string mlp_bias_name(std::string_view prefix, std::size_t layer);

// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero biases.
void mlp_init(ParameterSet& params, const MlpArch& arch, Rng& rng, std::string_view prefix = "");
ParameterSet mlp_init(const MlpArch& arch, Rng& rng, std::string_view prefix = "");

// Activations kept from a forward pass: acts[0] is the input batch, acts[i]
// the output of layer i (post-ReLU for hidden layers).
struct MlpTape {
  std::vector<Tensor> acts;
};

// `input` is [batch, in] or [in]; the output has matching rank.
Tensor mlp_forward(const ParameterSet& params, const MlpArch& arch, const Tensor& input,
                   std::string_view prefix = "", MlpTape* tape = nullptr);

struct MlpGradients {
  ParameterSet params;
  Tensor input;
};

// Adds parameter gradients into `grads` (same layout as `params`) and returns
// the gradient with respect to the input batch when `want_input` is set.
Tensor mlp_backward_into(const ParameterSet& params, const MlpArch& arch, const MlpTape& tape,
                         const Tensor& upstream, ParameterSet& grads,
                         std::string_view prefix = "", bool want_input = true);

// Recomputes the forward pass, then backpropagates `upstream`.
MlpGradients mlp_backward(const ParameterSet& params, const MlpArch& arch, const Tensor& input,
                          const Tensor& upstream, std::string_view prefix = "");

// Extracts just the parameters named with `prefix` from a larger set.
ParameterSet mlp_slice(const ParameterSet& params, const MlpArch& arch, std::string_view prefix);

}  // namespace taksie::num
