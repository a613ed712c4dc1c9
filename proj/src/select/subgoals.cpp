#include "taksie/select/subgoals.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace taksie::select {

std::string params_violation(const SelectionParams& p) {
  if (!(p.smooth_frac > 0.0 && p.smooth_frac <= 1.0)) return "smooth_frac must lie in (0, 1]";
  if (p.min_interval < 1) return "min_interval must be at least 1";
  if (!std::isfinite(p.delta1) || !std::isfinite(p.delta2)) return "slope thresholds must be finite";
  return {};
}

std::string plan_violation(const std::vector<std::size_t>& idx, std::size_t length, std::size_t min_interval) {
  if (idx.empty()) return "empty plan";
  if (idx.back() + 1 != length) return "plan does not end at the final frame";
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (k > 0 && idx[k] <= idx[k - 1]) return "indices not strictly increasing";
    if (k > 0 && idx[k] - idx[k - 1] < min_interval) return "gap below minimum interval";
  }
  if (idx.size() > 1 && idx.front() < min_interval) return "first subgoal closer than the minimum interval";
  return {};
}

std::vector<double> lowess_smooth(std::span<const double> y, double frac) {
  const std::size_t n = y.size();
  if (n < 3) throw std::invalid_argument("lowess needs at least 3 points");
  if (!(frac > 0.0 && frac <= 1.0)) throw std::invalid_argument("lowess frac must lie in (0, 1]");
  for (double v : y) {
    if (!std::isfinite(v)) throw std::invalid_argument("lowess input contains a non-finite value");
  }
  const auto r = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(n)));
  if (r < 2) throw std::invalid_argument("lowess window (frac * n) must cover at least 2 points");

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Centered window; for even r the extra point goes left. Clamped windows
    // at the ends are still the nearest r points.
    const std::size_t left = r / 2;
    std::size_t lo = i >= left ? i - left : 0;
    lo = std::min(lo, n - r);
    const std::size_t hi = lo + r - 1;
    const double h = static_cast<double>(std::max(i - lo, hi - i));
    double sw = 0.0, sx = 0.0, sy = 0.0;
    std::vector<double> w(r);
    for (std::size_t j = lo; j <= hi; ++j) {
      const double u = std::abs(static_cast<double>(j) - static_cast<double>(i)) / h;
      const double t = u < 1.0 ? 1.0 - u * u * u : 0.0;
      const double wj = t * t * t;
      w[j - lo] = wj;
      sw += wj;
      sx += wj * static_cast<double>(j);
      sy += wj * y[j];
    }
    const double xm = sx / sw, ym = sy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
      const double dx = static_cast<double>(j) - xm;
      sxx += w[j - lo] * dx * dx;
      sxy += w[j - lo] * dx * (y[j] - ym);
    }
    // One effective point: fall back to the weighted mean.
    if (sxx <= 1e-12 * sw) {
      out[i] = ym;
    } else {
      out[i] = ym + (sxy / sxx) * (static_cast<double>(i) - xm);
    }
  }
  return out;
}

std::vector<double> smooth_curve(std::span<const double> y, double frac) {
  const std::size_t n = y.size();
  if (n < 3) return {y.begin(), y.end()};
  if (frac * static_cast<double>(n) < 2.0) frac = std::min(1.0, 2.0 / static_cast<double>(n));
  return lowess_smooth(y, frac);
}

std::vector<double> slopes(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 2) throw std::invalid_argument("slopes need at least 2 points");
  std::vector<double> s(n);
  s[0] = y[1] - y[0];
  s[n - 1] = y[n - 1] - y[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) s[i] = 0.5 * (y[i + 1] - y[i - 1]);
  double mx = 0.0;
  for (double v : s) mx = std::max(mx, std::abs(v));
  if (mx > 0.0) {
    for (double& v : s) v /= mx;
  }
  return s;
}

std::vector<std::size_t> select_subgoals(std::span<const double> curve, const SelectionParams& p) {
  if (const auto v = params_violation(p); !v.empty()) throw std::invalid_argument(v);
  const std::size_t n = curve.size();
  if (n < 2) throw std::invalid_argument("selection needs a curve of length >= 2");
  const std::vector<double> s = slopes(curve);
  std::vector<std::size_t> out;
  std::size_t last = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (s[i - 1] > p.delta1 && s[i + 1] < p.delta2 && i - last >= p.min_interval && n - 1 - i >= p.min_interval) {
      out.push_back(i);
      last = i;
    }
  }
  out.push_back(n - 1);
  return out;
}

std::vector<std::size_t> subgoals_from_distances(std::span<const double> raw, const SelectionParams& p) {
  const auto sm = smooth_curve(raw, p.smooth_frac);
  return select_subgoals(sm, p);
}

std::vector<std::size_t> fixed_interval_select(std::size_t length, std::size_t interval) {
  if (interval < 1) throw std::invalid_argument("interval must be at least 1");
  if (length < 1) throw std::invalid_argument("length must be at least 1");
  std::vector<std::size_t> out;
  for (std::size_t k = interval; k < length; k += interval) out.push_back(k);
  if (out.empty() || out.back() != length - 1) out.push_back(length - 1);
  return out;
}

std::string selection_csv(std::span<const double> raw, const SelectionParams& p) {
  const auto sm = smooth_curve(raw, p.smooth_frac);
  const auto sl = raw.size() >= 2 ? slopes(sm) : std::vector<double>(raw.size(), 0.0);
  const auto idx = select_subgoals(sm, p);
  std::ostringstream os;
  os.precision(17);
  os << "frame,raw,smoothed,slope,selected\n";
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const bool sel = std::find(idx.begin(), idx.end(), i) != idx.end();
    os << i << ',' << raw[i] << ',' << sm[i] << ',' << sl[i] << ',' << (sel ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace taksie::select
