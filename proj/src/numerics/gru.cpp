#include "taksie/numerics/gru.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace taksie::num {
namespace {

std::string name(std::string_view prefix, const char* suffix) { return std::string(prefix) + suffix; }

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// out[j] = bias[j] + sum_k in[k] * w[k, j]
void affine(const Tensor& w, const Tensor& bias, std::span<const double> in, std::span<double> out) {
  const std::size_t cols = w.dim(1);
  for (std::size_t j = 0; j < cols; ++j) out[j] = bias[j];
  for (std::size_t k = 0; k < in.size(); ++k) {
    const double v = in[k];
    const double* wr = w.ptr() + k * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += v * wr[j];
  }
}

// grad_w += in (x) delta, grad_b += delta, grad_in += w delta
void affine_backward(const Tensor& w, std::span<const double> in, std::span<const double> delta,
                     Tensor& grad_w, Tensor& grad_b, std::span<double> grad_in) {
  const std::size_t cols = w.dim(1);
  for (std::size_t j = 0; j < cols; ++j) grad_b[j] += delta[j];
  for (std::size_t k = 0; k < in.size(); ++k) {
    const double v = in[k];
    double* gw = grad_w.ptr() + k * cols;
    const double* wr = w.ptr() + k * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      gw[j] += v * delta[j];
      acc += wr[j] * delta[j];
    }
    grad_in[k] += acc;
  }
}

}  // namespace

void gru_init(ParameterSet& params, const GruDims& dims, Rng& rng, std::string_view prefix) {
  const std::size_t rows = dims.input + dims.hidden;
  const double a = std::sqrt(6.0 / static_cast<double>(rows + dims.hidden));
  for (const char* gate : {"z", "r", "h"}) {
    Tensor w({rows, dims.hidden});
    for (double& v : w.data()) v = rng.uniform(-a, a);
    params.add(name(prefix, "w") + gate, std::move(w));
    params.add(name(prefix, "b") + gate, Tensor({dims.hidden}, 0.0));
  }
}

GruDims gru_dims(const ParameterSet& params, std::string_view prefix) {
  const Tensor& wz = params.at(name(prefix, "wz"));
  GruDims d;
  d.hidden = wz.dim(1);
  d.input = wz.dim(0) - d.hidden;
  return d;
}

std::vector<double> gru_cell(const ParameterSet& params, const GruDims& dims,
                             std::span<const double> h_prev, std::span<const double> x,
                             std::string_view prefix, GruTape* tape) {
  if (h_prev.size() != dims.hidden || x.size() != dims.input) {
    throw std::invalid_argument("GRU cell expects h of size " + std::to_string(dims.hidden) + " and x of size " +
                                std::to_string(dims.input) + ", got " + std::to_string(h_prev.size()) +
                                " and " + std::to_string(x.size()));
  }
  const std::size_t in = dims.input, hid = dims.hidden;
  std::vector<double> xh(in + hid);
  std::copy(x.begin(), x.end(), xh.begin());
  std::copy(h_prev.begin(), h_prev.end(), xh.begin() + static_cast<long>(in));

  std::vector<double> z(hid), r(hid), cand(hid), out(hid);
  affine(params.at(name(prefix, "wz")), params.at(name(prefix, "bz")), xh, z);
  affine(params.at(name(prefix, "wr")), params.at(name(prefix, "br")), xh, r);
  for (std::size_t j = 0; j < hid; ++j) {
    z[j] = sigmoid(z[j]);
    r[j] = sigmoid(r[j]);
  }
  std::vector<double> xrh = xh;
  for (std::size_t j = 0; j < hid; ++j) xrh[in + j] = r[j] * h_prev[j];
  affine(params.at(name(prefix, "wh")), params.at(name(prefix, "bh")), xrh, cand);
  for (std::size_t j = 0; j < hid; ++j) {
    cand[j] = std::tanh(cand[j]);
    out[j] = (1.0 - z[j]) * h_prev[j] + z[j] * cand[j];
  }
  if (tape) {
    tape->x.assign(x.begin(), x.end());
    tape->h_prev.assign(h_prev.begin(), h_prev.end());
    tape->z = z;
    tape->r = r;
    tape->cand = cand;
    tape->h_next = out;
  }
  return out;
}

Tensor gru_cell(const ParameterSet& params, const Tensor& h_prev, const Tensor& x, std::string_view prefix) {
  const GruDims dims = gru_dims(params, prefix);
  return Tensor::from(gru_cell(params, dims, h_prev.data(), x.data(), prefix));
}

GruInputGrads gru_cell_backward(const ParameterSet& params, const GruDims& dims, const GruTape& tape,
                                std::span<const double> grad_h_next, ParameterSet& grads,
                                std::string_view prefix) {
  const std::size_t in = dims.input, hid = dims.hidden;
  if (grad_h_next.size() != hid) throw std::invalid_argument("GRU upstream gradient has wrong size");

  std::vector<double> xh(in + hid), xrh(in + hid);
  std::copy(tape.x.begin(), tape.x.end(), xh.begin());
  std::copy(tape.h_prev.begin(), tape.h_prev.end(), xh.begin() + static_cast<long>(in));
  xrh = xh;
  for (std::size_t j = 0; j < hid; ++j) xrh[in + j] = tape.r[j] * tape.h_prev[j];

  std::vector<double> d_cand_pre(hid), d_z_pre(hid), d_r_pre(hid);
  std::vector<double> dh(hid, 0.0), dx(in, 0.0);
  for (std::size_t j = 0; j < hid; ++j) {
    const double g = grad_h_next[j];
    d_z_pre[j] = g * (tape.cand[j] - tape.h_prev[j]) * tape.z[j] * (1.0 - tape.z[j]);
    d_cand_pre[j] = g * tape.z[j] * (1.0 - tape.cand[j] * tape.cand[j]);
    dh[j] = g * (1.0 - tape.z[j]);
  }

  std::vector<double> dxrh(in + hid, 0.0);
  affine_backward(params.at(name(prefix, "wh")), xrh, d_cand_pre, grads.at(name(prefix, "wh")),
                  grads.at(name(prefix, "bh")), dxrh);
  for (std::size_t k = 0; k < in; ++k) dx[k] += dxrh[k];
  for (std::size_t j = 0; j < hid; ++j) {
    const double d_rh = dxrh[in + j];
    dh[j] += d_rh * tape.r[j];
    d_r_pre[j] = d_rh * tape.h_prev[j] * tape.r[j] * (1.0 - tape.r[j]);
  }

  std::vector<double> dxh(in + hid, 0.0);
  affine_backward(params.at(name(prefix, "wz")), xh, d_z_pre, grads.at(name(prefix, "wz")),
                  grads.at(name(prefix, "bz")), dxh);
  affine_backward(params.at(name(prefix, "wr")), xh, d_r_pre, grads.at(name(prefix, "wr")),
                  grads.at(name(prefix, "br")), dxh);
  for (std::size_t k = 0; k < in; ++k) dx[k] += dxh[k];
  for (std::size_t j = 0; j < hid; ++j) dh[j] += dxh[in + j];
  return {std::move(dh), std::move(dx)};
}

}  // namespace taksie::num
