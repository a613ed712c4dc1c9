#include "taksie/numerics/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "taksie/numerics/kernels.hpp"

namespace taksie::num {
namespace {

void check_arch(const MlpArch& arch) {
  if (arch.widths.size() < 2) throw std::invalid_argument("MLP needs at least one layer");
  for (std::size_t w : arch.widths) {
    if (w == 0) throw std::invalid_argument("MLP widths must be positive");
  }
}

Tensor as_batch(const Tensor& input, std::size_t in_dim) {
  if (input.rank() == 1 && input.size() == in_dim) return Tensor({1, in_dim}, {input.data().begin(), input.data().end()});
  if (input.rank() == 2 && input.cols() == in_dim) return input;
  std::vector<std::size_t> expected{in_dim};
  throw std::invalid_argument("MLP input shape " + input.shape_string() + " does not match first layer width " +
                              shape_string(expected));
}

}  // namespace

std::string mlp_weight_name(std::string_view prefix, std::size_t layer) {
  return std::string(prefix) + "w" + std::to_string(layer);
}

std::string mlp_bias_name(std::string_view prefix, std::size_t layer) {
  return std::string(prefix) + "b" + std::to_string(layer);
}

void mlp_init(ParameterSet& params, const MlpArch& arch, Rng& rng, std::string_view prefix) {
  check_arch(arch);
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const std::size_t in = arch.widths[l];
    const std::size_t out = arch.widths[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w({in, out});
    for (double& v : w.data()) v = rng.uniform(-a, a);
    params.add(mlp_weight_name(prefix, l), std::move(w));
    params.add(mlp_bias_name(prefix, l), Tensor({out}, 0.0));
  }
}

ParameterSet mlp_init(const MlpArch& arch, Rng& rng, std::string_view prefix) {
  ParameterSet p;
  mlp_init(p, arch, rng, prefix);
  return p;
}

Tensor mlp_forward(const ParameterSet& params, const MlpArch& arch, const Tensor& input,
                   std::string_view prefix, MlpTape* tape) {
  check_arch(arch);
  Tensor x = as_batch(input, arch.input_dim());
  const std::size_t batch = x.rows();
  if (tape) {
    tape->acts.clear();
    tape->acts.reserve(arch.layer_count() + 1);
    tape->acts.push_back(x);
  }
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const Tensor& w = params.at(mlp_weight_name(prefix, l));
    const Tensor& b = params.at(mlp_bias_name(prefix, l));
    const std::size_t in = arch.widths[l];
    const std::size_t out = arch.widths[l + 1];
    if (w.rank() != 2 || w.dim(0) != in || w.dim(1) != out || b.size() != out) {
      throw std::invalid_argument("layer " + std::to_string(l) + " parameters " + w.shape_string() +
                                  " do not match arch [" + std::to_string(in) + ", " +
                                  std::to_string(out) + "]");
    }
    Tensor y({batch, out});
    for (std::size_t r = 0; r < batch; ++r) {
      auto row = y.row(r);
      for (std::size_t j = 0; j < out; ++j) row[j] = b[j];
    }
    kernels::gemm(batch, out, in, x.ptr(), in, w.ptr(), out, y.ptr(), out);
    if (l + 1 < arch.layer_count()) {
      for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
    }
    x = std::move(y);
    if (tape) tape->acts.push_back(x);
  }
  if (input.rank() == 1) return Tensor({arch.output_dim()}, {x.data().begin(), x.data().end()});
  return x;
}

Tensor mlp_backward_into(const ParameterSet& params, const MlpArch& arch, const MlpTape& tape,
                         const Tensor& upstream, ParameterSet& grads, std::string_view prefix,
                         bool want_input) {
  check_arch(arch);
  if (tape.acts.size() != arch.layer_count() + 1) throw std::invalid_argument("MLP tape does not match arch");
  const std::size_t batch = tape.acts.front().rows();
  if (upstream.size() != batch * arch.output_dim()) {
    throw std::invalid_argument("upstream gradient shape " + upstream.shape_string() +
                                " does not match forward output [" + std::to_string(batch) + ", " +
                                std::to_string(arch.output_dim()) + "]");
  }
  if (!upstream.all_finite()) throw std::invalid_argument("upstream gradient contains non-finite values");

  Tensor g({batch, arch.output_dim()}, std::vector<double>(upstream.data().begin(), upstream.data().end()));
  std::vector<double> scratch;
  for (std::size_t l = arch.layer_count(); l-- > 0;) {
    const std::size_t in = arch.widths[l];
    const std::size_t out = arch.widths[l + 1];
    if (l + 1 < arch.layer_count()) {
      const Tensor& act = tape.acts[l + 1];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (act[i] <= 0.0) g[i] = 0.0;
      }
    }
    const Tensor& x = tape.acts[l];
    Tensor& gw = grads.at(mlp_weight_name(prefix, l));
    Tensor& gb = grads.at(mlp_bias_name(prefix, l));
    // dW += x^T g
    scratch.resize(batch * in);
    kernels::transpose(batch, in, x.ptr(), scratch.data());
    kernels::gemm(in, out, batch, scratch.data(), batch, g.ptr(), out, gw.ptr(), out);
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t j = 0; j < out; ++j) gb[j] += g.at(r, j);
    }
    if (l == 0 && !want_input) return {};
    // dx = g W^T
    const Tensor& w = params.at(mlp_weight_name(prefix, l));
    scratch.resize(in * out);
    kernels::transpose(in, out, w.ptr(), scratch.data());
    Tensor gx({batch, in}, 0.0);
    kernels::gemm(batch, in, out, g.ptr(), out, scratch.data(), in, gx.ptr(), in);
    g = std::move(gx);
  }
  return g;
}

MlpGradients mlp_backward(const ParameterSet& params, const MlpArch& arch, const Tensor& input,
                          const Tensor& upstream, std::string_view prefix) {
  MlpTape tape;
  mlp_forward(params, arch, input, prefix, &tape);
  ParameterSet grads = mlp_slice(params, arch, prefix).zeros_like();
  Tensor gx = mlp_backward_into(params, arch, tape, upstream, grads, prefix, true);
  if (input.rank() == 1) gx = Tensor({arch.input_dim()}, {gx.data().begin(), gx.data().end()});
  return {std::move(grads), std::move(gx)};
}

ParameterSet mlp_slice(const ParameterSet& params, const MlpArch& arch, std::string_view prefix) {
  ParameterSet out(params.version());
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    out.add(mlp_weight_name(prefix, l), params.at(mlp_weight_name(prefix, l)));
    out.add(mlp_bias_name(prefix, l), params.at(mlp_bias_name(prefix, l)));
  }
  return out;
}

}  // namespace taksie::num
