#include "taksie/repr/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "taksie/numerics/adam.hpp"
#include "taksie/numerics/diagnostics.hpp"

namespace taksie::repr {

using num::ParameterSet;
using num::Tensor;

num::MlpArch encoder_arch() { return {{sim::kObsDim, 64, 64, kEmbDim}}; }

ParameterSet encoder_init(std::uint64_t seed) {
  num::Rng rng(num::derive_seed(seed, 0xe4c));
  return num::mlp_init(encoder_arch(), rng, kEncoderPrefix);
}

Tensor observations_tensor(std::span<const sim::Observation> obs) {
  Tensor t({obs.size(), sim::kObsDim});
  for (std::size_t i = 0; i < obs.size(); ++i) std::copy(obs[i].begin(), obs[i].end(), t.row(i).begin());
  return t;
}

namespace {

Tensor signed_input(const Tensor& obs) {
  if (obs.cols() != sim::kObsDim) {
    throw std::invalid_argument("encoder expects 16-dim observations, got " + obs.shape_string());
  }
  Tensor x = obs;
  for (double& v : x.data()) v = 2.0 * v - 1.0;
  return x;
}

}  // namespace

Tensor embed_batch(const ParameterSet& enc, const Tensor& obs) {
  return num::mlp_forward(enc, encoder_arch(), signed_input(obs), kEncoderPrefix);
}

Embedding embed(const ParameterSet& enc, std::span<const double> obs) {
  if (obs.size() != sim::kObsDim) {
    throw std::invalid_argument("encoder expects 16-dim observations, got " + std::to_string(obs.size()));
  }
  const Tensor z = embed_batch(enc, Tensor::from(obs));
  Embedding e;
  std::copy(z.data().begin(), z.data().end(), e.begin());
  return e;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

LossAndGrad time_contrastive_loss(const ParameterSet& enc, const ContrastiveBatch& batch, bool want_grads) {
  if (!(batch.tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (batch.items.empty()) throw std::invalid_argument("contrastive batch has no anchors");
  const auto arch = encoder_arch();
  num::MlpTape tape;
  const Tensor z = num::mlp_forward(enc, arch, signed_input(batch.frames), kEncoderPrefix, &tape);
  const std::size_t m = z.rows();
  const bool cosine = batch.similarity == Similarity::cosine;
  constexpr double kNormEps = 1e-12;

  // Cosine works on unit rows u = z / |z|; gradients are taken w.r.t. u first.
  Tensor u;
  std::vector<double> row_norm;
  if (cosine) {
    u = z;
    row_norm.resize(m);
    for (std::size_t r = 0; r < m; ++r) {
      auto ur = u.row(r);
      double s = 0.0;
      for (double v : ur) s += v * v;
      row_norm[r] = std::sqrt(s + kNormEps);
      for (double& v : ur) v /= row_norm[r];
    }
  }
  const Tensor& w = cosine ? u : z;
  Tensor dw({m, kEmbDim}, 0.0);
  const double inv_items = 1.0 / static_cast<double>(batch.items.size());

  LossAndGrad out;
  std::vector<double> logits, norms;
  std::vector<std::size_t> others;
  for (const ContrastiveItem& it : batch.items) {
    if (it.anchor >= m || it.positive >= m) throw std::out_of_range("contrastive item index out of range");
    if (it.negatives.empty()) {
      taksie::count_warning("repr.no_negatives");
      continue;
    }
    others.assign(1, it.positive);
    others.insert(others.end(), it.negatives.begin(), it.negatives.end());
    logits.resize(others.size());
    norms.resize(others.size());
    const auto wa = w.row(it.anchor);
    for (std::size_t k = 0; k < others.size(); ++k) {
      if (others[k] >= m) throw std::out_of_range("contrastive negative index out of range");
      const auto wb = w.row(others[k]);
      double s = 0.0;
      if (cosine) {
        for (std::size_t d = 0; d < kEmbDim; ++d) s += wa[d] * wb[d];
        logits[k] = s / batch.tau;
      } else {
        for (std::size_t d = 0; d < kEmbDim; ++d) s += (wa[d] - wb[d]) * (wa[d] - wb[d]);
        norms[k] = std::sqrt(s + kNormEps);
        logits[k] = -norms[k] / batch.tau;
      }
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l - mx);
    out.loss += inv_items * (-(logits[0] - mx) + std::log(denom));
    if (!want_grads) continue;
    auto ga = dw.row(it.anchor);
    for (std::size_t k = 0; k < others.size(); ++k) {
      // dL/dlogit_k, then through the similarity.
      const double g = inv_items * (std::exp(logits[k] - mx) / denom - (k == 0 ? 1.0 : 0.0));
      auto gb = dw.row(others[k]);
      const auto wb = w.row(others[k]);
      if (cosine) {
        const double c = g / batch.tau;
        for (std::size_t d = 0; d < kEmbDim; ++d) {
          ga[d] += c * wb[d];
          gb[d] += c * wa[d];
        }
      } else {
        const double c = -g / (batch.tau * norms[k]);
        for (std::size_t d = 0; d < kEmbDim; ++d) {
          const double diff = wa[d] - wb[d];
          ga[d] += c * diff;
          gb[d] -= c * diff;
        }
      }
    }
  }
  if (want_grads) {
    if (cosine) {
      // du -> dz: (I - u u^T) du / |z|
      for (std::size_t r = 0; r < m; ++r) {
        auto gr = dw.row(r);
        const auto ur = u.row(r);
        double dot = 0.0;
        for (std::size_t d = 0; d < kEmbDim; ++d) dot += gr[d] * ur[d];
        for (std::size_t d = 0; d < kEmbDim; ++d) gr[d] = (gr[d] - dot * ur[d]) / row_norm[r];
      }
    }
    out.grads = enc.zeros_like();
    num::mlp_backward_into(enc, arch, tape, dw, out.grads, kEncoderPrefix, false);
  }
  return out;
}

ContrastiveBatch sample_contrastive_batch(const std::vector<sim::Trajectory>& trajs,
                                          const std::vector<std::size_t>& pool, const ReprConfig& cfg,
                                          num::Rng& rng) {
  if (pool.empty()) throw std::invalid_argument("no trajectories to sample from");
  struct Pick {
    std::size_t traj, anchor, positive;
    long hard;
  };
  std::vector<Pick> picks;
  picks.reserve(cfg.batch);
  for (std::size_t b = 0; b < cfg.batch; ++b) {
    const std::size_t ti = pool[rng.below(pool.size())];
    const std::size_t n = trajs[ti].length();
    if (n < 2) throw std::invalid_argument("trajectory too short for contrastive sampling");
    const std::size_t i = rng.below(n - 1);
    const std::size_t j = i + 1 + rng.below(std::min(cfg.positive_window, n - 1 - i));
    // Far frames: [0, i - gap] and [i + gap, n - 1].
    const std::size_t left = i >= cfg.negative_gap ? i - cfg.negative_gap + 1 : 0;
    const std::size_t right = i + cfg.negative_gap < n ? n - (i + cfg.negative_gap) : 0;
    long hard = -1;
    if (left + right > 0) {
      const std::size_t r = rng.below(left + right);
      hard = static_cast<long>(r < left ? r : i + cfg.negative_gap + (r - left));
    }
    picks.push_back({ti, i, j, hard});
  }

  ContrastiveBatch batch;
  batch.tau = cfg.tau;
  batch.similarity = cfg.similarity;
  std::vector<sim::Observation> rows;
  std::vector<std::size_t> owner;
  std::vector<std::size_t> a_row(picks.size()), p_row(picks.size());
  std::vector<long> h_row(picks.size(), -1);
  for (std::size_t b = 0; b < picks.size(); ++b) {
    const auto& obs = trajs[picks[b].traj].observations;
    a_row[b] = rows.size();
    rows.push_back(obs[picks[b].anchor]);
    owner.push_back(picks[b].traj);
    p_row[b] = rows.size();
    rows.push_back(obs[picks[b].positive]);
    owner.push_back(picks[b].traj);
  }
  for (std::size_t b = 0; b < picks.size(); ++b) {
    if (picks[b].hard < 0) continue;
    h_row[b] = static_cast<long>(rows.size());
    rows.push_back(trajs[picks[b].traj].observations[static_cast<std::size_t>(picks[b].hard)]);
    owner.push_back(picks[b].traj);
  }
  batch.frames = observations_tensor(rows);
  for (std::size_t b = 0; b < picks.size(); ++b) {
    ContrastiveItem it{a_row[b], p_row[b], {}};
    if (h_row[b] >= 0) it.negatives.push_back(static_cast<std::size_t>(h_row[b]));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (owner[r] != picks[b].traj) it.negatives.push_back(r);
    }
    batch.items.push_back(std::move(it));
  }
  return batch;
}

ReprTrainResult train_repr(const std::vector<sim::Trajectory>& trajs, const ReprConfig& cfg) {
  if (trajs.size() < 10) throw std::invalid_argument("representation training needs at least 10 trajectories");
  std::vector<std::size_t> train, held;
  for (std::size_t i = 0; i < trajs.size(); ++i) (sim::is_heldout(i) ? held : train).push_back(i);
  if (held.empty()) held = train;

  ReprTrainResult res;
  res.params = encoder_init(cfg.seed);
  num::Rng held_rng(num::derive_seed(cfg.seed, 0x4e1d));
  std::vector<ContrastiveBatch> held_batches;
  for (int k = 0; k < 4; ++k) held_batches.push_back(sample_contrastive_batch(trajs, held, cfg, held_rng));
  auto held_loss = [&] {
    double s = 0.0;
    for (const auto& b : held_batches) s += time_contrastive_loss(res.params, b, false).loss;
    return s / static_cast<double>(held_batches.size());
  };
  res.heldout_initial = held_loss();

  num::Rng rng(num::derive_seed(cfg.seed, 0x7a1));
  num::AdamState adam = num::AdamState::for_params(res.params);
  const num::AdamConfig acfg{cfg.lr, 0.9, 0.999, 1e-8};
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const ContrastiveBatch batch = sample_contrastive_batch(trajs, train, cfg, rng);
    LossAndGrad lg = time_contrastive_loss(res.params, batch);
    if (!std::isfinite(lg.loss)) {
      throw std::runtime_error("representation training diverged at step " + std::to_string(step));
    }
    if (step % cfg.log_every == 0) res.loss_curve.emplace_back(step, lg.loss);
    num::adam_step(adam, res.params, lg.grads, acfg);
  }
  res.heldout_final = held_loss();
  return res;
}

std::vector<double> progress_curve(const ParameterSet& enc, const sim::Trajectory& t) {
  if (t.length() < 2) throw std::invalid_argument("progress curve needs at least two frames");
  const Tensor z = embed_batch(enc, observations_tensor(t.observations));
  const std::size_t last = z.rows() - 1;
  std::vector<double> d(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) d[i] = l2_distance(z.row(i), z.row(last));
  return d;
}

std::string progress_curve_csv(const std::vector<double>& curve) {
  std::ostringstream os;
  os.precision(17);
  os << "frame_index,distance\n";
  for (std::size_t i = 0; i < curve.size(); ++i) os << i << ',' << curve[i] << '\n';
  return os.str();
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman needs two equal series of length >= 2");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nan("");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace taksie::repr
