#pragma once

// Pairwise stationary-velocity-field estimation by diffeomorphic log-demons
// over a coarse-to-fine pyramid. Given (fixed, moving) it returns v with
// warp_image(moving, exp(v)) ~ fixed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mmorph/error.hpp"
#include "mmorph/field_ops.hpp"
#include "mmorph/filters.hpp"
#include "mmorph/grid.hpp"
#include "mmorph/lie_algebra.hpp"
#include "mmorph/losses.hpp"

namespace mmorph {

struct EstimatorConfig {
  int levels = 3;
  int iters_per_level = 60;
  double sigma_fluid = 1.0;
  double sigma_diffusion = 1.5;
  double force_normalization = 1.0;  // kappa
  double inc_weight = 0.0;           // beta, use 0.3 for 3D data
  double smooth_weight = 0.008;      // alpha, enters the stopping loss only
  double stop_tol = 1e-4;
  double epsilon = 1e-6;
  ExpConfig exp{};

  void validate() const {
    if (levels < 1) throw UsageError("levels must be >= 1");
    if (iters_per_level < 1) throw UsageError("iters_per_level must be >= 1");
    if (sigma_fluid < 0 || sigma_diffusion < 0) throw UsageError("sigmas must be >= 0");
    if (inc_weight < 0 || smooth_weight < 0) throw UsageError("weights must be >= 0");
    if (!(force_normalization > 0)) throw UsageError("force normalization must be positive");
  }
};

/// Per-iteration trace, filled when the caller asks for it.
struct EstimatorTrace {
  std::vector<std::vector<double>> level_losses;
};

/// Gradient of l_inc(id + v) (the per-node mean) with respect to v, taken
/// through the same finite-difference stencil as jacobian_matrix.
template <int D>
VectorField<D> inc_gradient(const VectorField<D>& v, double epsilon = 1e-6) {
  const auto& shape = v.shape();
  const auto strides = shape.strides();
  const auto jac = jacobian_matrix(v);
  const double inv_n = 1.0 / static_cast<double>(shape.size());
  VectorField<D> g(shape);
  for_each_node<D>(shape, [&](std::size_t n, const Index<D>& idx) {
    Mat<D> m = jac[n];
    for (int a = 0; a < D; ++a) m[a][a] += 1.0;
    const double d = detail::det<D>(m);
    double dpen = 0.0;
    if (d > epsilon) {
      const double l = std::log(d);
      dpen = l > 0.0 ? 1.0 / d : (l < 0.0 ? -1.0 / d : 0.0);
    }
    if (d < 0.0) dpen -= 1.0;
    if (dpen == 0.0) return;
    const Mat<D> cof = detail::cofactor<D>(m);
    for (int j = 0; j < D; ++j) {
      const int i_ax = idx[j];
      const int last = shape.dims[j] - 1;
      const std::size_t s = static_cast<std::size_t>(strides[j]);
      const double h = shape.spacing[j];
      std::size_t plus, minus;
      double w;
      if (i_ax == 0) {
        plus = n + s, minus = n, w = 1.0 / h;
      } else if (i_ax == last) {
        plus = n, minus = n - s, w = 1.0 / h;
      } else {
        plus = n + s, minus = n - s, w = 0.5 / h;
      }
      for (int i = 0; i < D; ++i) {
        const double c = dpen * cof[i][j] * w * inv_n;
        g(plus, i) += c;
        g(minus, i) -= c;
      }
    }
  });
  return g;
}

namespace detail {

template <int D>
void check_normalized(const ScalarImage<D>& img) {
  for (double x : img.values()) {
    if (!(x >= -0.01 && x <= 1.01)) throw DataError("inputs must be normalized");
  }
}

// Demons force (f - w) grad w / (|grad w|^2 + (w - f)^2 / kappa^2), with
// all channels sharing one denominator.
template <int D>
VectorField<D> demons_force(const ScalarImage<D>& fixed, const ScalarImage<D>& warped, double kappa) {
  const auto& shape = fixed.shape();
  const auto strides = shape.strides();
  const int ch = fixed.channels();
  const double* w = warped.values().data();
  VectorField<D> force(shape);
  const double k2 = kappa * kappa;
  for_each_node<D>(shape, [&](std::size_t n, const Index<D>& idx) {
    Vec<D> num{};
    double grad2 = 0.0, diff2 = 0.0;
    for (int c = 0; c < ch; ++c) {
      const double diff = fixed(n, c) - warped(n, c);
      diff2 += diff * diff;
      for (int a = 0; a < D; ++a) {
        const double g = partial<D>(shape, strides, w, ch, n, idx, c, a);
        grad2 += g * g;
        num[a] += diff * g;
      }
    }
    const double denom = grad2 + diff2 / k2;
    if (denom < 1e-12) return;
    for (int a = 0; a < D; ++a) force(n, a) = num[a] / denom;
  });
  return force;
}

template <int D>
double pair_loss(const ScalarImage<D>& fixed, const ScalarImage<D>& warped, const Transform<D>& phi,
                 const EstimatorConfig& cfg) {
  double l = l_sim(fixed, warped);
  if (cfg.smooth_weight > 0) l += cfg.smooth_weight * l_smooth(phi.displacement);
  if (cfg.inc_weight > 0) l += cfg.inc_weight * l_inc(phi, cfg.epsilon);
  return l;
}

}  // namespace detail

/// Estimates the SVF aligning `moving` onto `fixed`. When `trace` is given,
/// the per-iteration pair loss of every level is recorded (coarse first).
template <int D>
VectorField<D> estimate_svf(const ScalarImage<D>& fixed, const ScalarImage<D>& moving,
                            const EstimatorConfig& cfg = {}, EstimatorTrace* trace = nullptr) {
  cfg.validate();
  require_same_shape(fixed, moving, "estimate_svf");
  if (fixed.channels() != moving.channels()) throw DataError("estimate_svf: channel mismatch");
  detail::check_normalized(fixed);
  detail::check_normalized(moving);

  // Pyramid, finest first. Stop halving before any axis drops below 8.
  std::vector<ScalarImage<D>> fixed_pyr{fixed}, moving_pyr{moving};
  for (int l = 1; l < cfg.levels; ++l) {
    const auto& s = fixed_pyr.back().shape();
    bool ok = true;
    for (int a = 0; a < D; ++a) ok = ok && (s.dims[a] + 1) / 2 >= 8;
    if (!ok) break;
    fixed_pyr.push_back(downsample(fixed_pyr.back()));
    moving_pyr.push_back(downsample(moving_pyr.back()));
  }

  VectorField<D> v(fixed_pyr.back().shape());
  for (int l = static_cast<int>(fixed_pyr.size()) - 1; l >= 0; --l) {
    const auto& f = fixed_pyr[static_cast<std::size_t>(l)];
    const auto& m = moving_pyr[static_cast<std::size_t>(l)];
    if (!(v.shape() == f.shape())) v = upsample(v, f.shape());

    std::vector<double> losses;
    VectorField<D> best = v;
    double best_loss = std::numeric_limits<double>::infinity();
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.iters_per_level; ++it) {
      const auto phi = mmorph::exp(v, cfg.exp);
      const auto w = warp_image(m, phi);
      const double loss = detail::pair_loss(f, w, phi, cfg);
      losses.push_back(loss);
      if (loss < best_loss) {
        best_loss = loss;
        best = v;
      }
      if (std::isfinite(prev) && prev - loss <= cfg.stop_tol * prev) break;
      prev = loss;

      auto delta = gaussian(detail::demons_force(f, w, cfg.force_normalization), cfg.sigma_fluid);
      if (cfg.inc_weight > 0) {
        delta -= (cfg.inc_weight * static_cast<double>(v.nodes())) * inc_gradient(v, cfg.epsilon);
      }
      v = gaussian(v + delta, cfg.sigma_diffusion);
    }
    v = std::move(best);
    if (trace) trace->level_losses.push_back(std::move(losses));
  }
  return v;
}

}  // namespace mmorph
