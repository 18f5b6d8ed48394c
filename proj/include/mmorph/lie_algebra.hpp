#pragma once

// Exponential map of stationary velocity fields, the Lie bracket, and the
// momenta accumulators used to shoot Lagrangian motion from Eulerian steps.

#include <algorithm>
#include <cmath>
#include <string>

#include "mmorph/error.hpp"
#include "mmorph/field_ops.hpp"
#include "mmorph/grid.hpp"
#include "mmorph/log.hpp"

namespace mmorph {

struct ExpConfig {
  int num_squarings = 7;
  int oracle_steps = 512;
};

enum class MomentaOrder { Order1, Order2 };

template <int D>
double max_norm(const VectorField<D>& v) {
  double m = 0.0;
  for (std::size_t n = 0; n < v.nodes(); ++n) {
    double s = 0.0;
    for (int a = 0; a < D; ++a) s += v(n, a) * v(n, a);
    m = std::max(m, s);
  }
  return std::sqrt(m);
}

/// Scaling and squaring: u = v / 2^K, then K self-compositions.
template <int D>
Transform<D> exp(const VectorField<D>& v, const ExpConfig& cfg = {}) {
  if (cfg.num_squarings < 1) throw UsageError("num_squarings must be >= 1");
  const double scale = std::ldexp(1.0, -cfg.num_squarings);
  if (max_norm(v) * scale >= 0.5) {
    warn("exp: max |v| / 2^K >= 0.5 px; increase the number of squarings");
  }
  Transform<D> t{v * scale, TransformKind::Eulerian};
  for (int k = 0; k < cfg.num_squarings; ++k) t = compose(t, t);
  return t;
}

/// Reference flow of dphi/dtau = v o phi by RK4 with `steps` uniform steps.
/// Used to check `exp`; the pipeline never calls it.
template <int D>
Transform<D> exp_oracle(const VectorField<D>& v, int steps = 512) {
  if (steps < 64) throw UsageError("exp_oracle needs at least 64 steps");
  const auto& shape = v.shape();
  Transform<D> out = Transform<D>::identity(shape);
  const double h = 1.0 / steps;
  for_each_node<D>(shape, [&](std::size_t n, const Index<D>& idx) {
    const Vec<D> x0 = to_coord<D>(idx);
    Vec<D> y = x0;
    auto at = [&](const Vec<D>& p) { return sample(v, p); };
    auto axpy = [](const Vec<D>& a, double s, const Vec<D>& b) {
      Vec<D> r;
      for (int i = 0; i < D; ++i) r[i] = a[i] + s * b[i];
      return r;
    };
    for (int s = 0; s < steps; ++s) {
      const Vec<D> k1 = at(y);
      const Vec<D> k2 = at(axpy(y, 0.5 * h, k1));
      const Vec<D> k3 = at(axpy(y, 0.5 * h, k2));
      const Vec<D> k4 = at(axpy(y, h, k3));
      for (int i = 0; i < D; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    for (int i = 0; i < D; ++i) out.displacement(n, i) = y[i] - x0[i];
  });
  return out;
}

/// [a, b] = J_a b - J_b a, pointwise.
template <int D>
VectorField<D> lie_bracket(const VectorField<D>& a, const VectorField<D>& b) {
  require_same_shape(a, b, "lie_bracket");
  const auto ja = jacobian_matrix(a);
  const auto jb = jacobian_matrix(b);
  VectorField<D> out(a.shape());
  for (std::size_t n = 0; n < a.nodes(); ++n) {
    for (int i = 0; i < D; ++i) {
      double s1 = 0.0, s2 = 0.0;
      for (int j = 0; j < D; ++j) {
        s1 += ja[n][i][j] * b(n, j);
        s2 += jb[n][i][j] * a(n, j);
      }
      out(n, i) = s1 - s2;
    }
  }
  return out;
}

/// One step of momenta accumulation, p_new ~ log(exp(v_new) o exp(p_prev)).
///
/// Order1 keeps the first BCH term only. Order2 adds the half bracket
/// 0.5 * [v_new, p_prev] = 0.5 * (J_v p - J_p v), the sign that matches
/// composition of maps (phi o psi)(x) = phi(psi(x)).
template <int D>
VectorField<D> momenta_step(const VectorField<D>& p_prev, const VectorField<D>& v_new, MomentaOrder order) {
  require_same_shape(p_prev, v_new, "momenta_step");
  VectorField<D> p = v_new + p_prev;
  if (order == MomentaOrder::Order2) p += 0.5 * lie_bracket(v_new, p_prev);
  return p;
}

}  // namespace mmorph
