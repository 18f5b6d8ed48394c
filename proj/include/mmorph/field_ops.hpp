#pragma once

// Interpolation, warping, composition and Jacobians on grids.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <type_traits>
#include <vector>

#include "mmorph/error.hpp"
#include "mmorph/grid.hpp"

namespace mmorph {

namespace detail {

// Multilinear interpolation of a channel-interleaved array at `x`.
// Writes `channels` values to `out`.
template <int D>
inline void interpolate(const GridShape<D>& shape, const Index<D>& strides, const double* data, int channels,
                        const Vec<D>& x, BoundaryPolicy policy, double* out) {
  Index<D> base;
  Vec<D> frac;
  for (int a = 0; a < D; ++a) {
    if (!std::isfinite(x[a])) throw DataError("invalid coordinate");
    const double hi = static_cast<double>(shape.dims[a] - 1);
    double xc = x[a];
    if (xc < 0.0 || xc > hi) {
      if (policy == BoundaryPolicy::ZeroDisplacement) {
        std::fill(out, out + channels, 0.0);
        return;
      }
      xc = std::clamp(xc, 0.0, hi);
    }
    int i = static_cast<int>(std::floor(xc));
    if (i > shape.dims[a] - 2) i = shape.dims[a] - 2;
    base[a] = i;
    frac[a] = xc - i;
  }
  std::fill(out, out + channels, 0.0);
  for (int corner = 0; corner < (1 << D); ++corner) {
    double w = 1.0;
    std::size_t offset = 0;
    for (int a = 0; a < D; ++a) {
      const bool up = (corner >> (D - 1 - a)) & 1;
      w *= up ? frac[a] : 1.0 - frac[a];
      offset += static_cast<std::size_t>(base[a] + (up ? 1 : 0)) * static_cast<std::size_t>(strides[a]);
    }
    if (w == 0.0) continue;
    const double* p = data + offset * channels;
    for (int c = 0; c < channels; ++c) out[c] += w * p[c];
  }
}

// Finite difference of channel `c` along `axis` at node `n` (multi-index
// `idx`): central inside, one-sided on the faces, scaled by 1/spacing.
template <int D>
inline double partial(const GridShape<D>& shape, const Index<D>& strides, const double* data, int channels,
                      std::size_t n, const Index<D>& idx, int c, int axis) {
  const int i = idx[axis];
  const int last = shape.dims[axis] - 1;
  const std::size_t s = static_cast<std::size_t>(strides[axis]);
  const double h = shape.spacing[axis];
  if (i == 0) return (data[(n + s) * channels + c] - data[n * channels + c]) / h;
  if (i == last) return (data[n * channels + c] - data[(n - s) * channels + c]) / h;
  return (data[(n + s) * channels + c] - data[(n - s) * channels + c]) / (2.0 * h);
}

template <int D>
inline double det(const Mat<D>& m) {
  if constexpr (D == 2) {
    return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  } else {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }
}

// Cofactor matrix: d det(M) / d M_ij = cof(M)_ij.
template <int D>
inline Mat<D> cofactor(const Mat<D>& m) {
  Mat<D> c{};
  if constexpr (D == 2) {
    c[0][0] = m[1][1];
    c[0][1] = -m[1][0];
    c[1][0] = -m[0][1];
    c[1][1] = m[0][0];
  } else {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
        const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
        c[i][j] = m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1];
      }
    }
  }
  return c;
}

}  // namespace detail

/// Interpolates a scalar image at one point (all channels).
/// Images are always clamped; zero padding applies to displacements only.
template <int D>
std::vector<double> sample(const ScalarImage<D>& img, const std::type_identity_t<Vec<D>>& x) {
  std::vector<double> out(static_cast<std::size_t>(img.channels()));
  detail::interpolate<D>(img.shape(), img.shape().strides(), img.values().data(), img.channels(), x,
                         BoundaryPolicy::ClampToEdge, out.data());
  return out;
}

/// Interpolates a vector field at one point.
template <int D>
Vec<D> sample(const VectorField<D>& f, const std::type_identity_t<Vec<D>>& x, BoundaryPolicy policy = BoundaryPolicy::ClampToEdge) {
  Vec<D> out;
  detail::interpolate<D>(f.shape(), f.shape().strides(), f.values().data(), D, x, policy, out.data());
  return out;
}

/// Batch form over a list of coordinates.
template <int D>
std::vector<Vec<D>> sample(const VectorField<D>& f, const std::type_identity_t<std::vector<Vec<D>>>& coords,
                           BoundaryPolicy policy = BoundaryPolicy::ClampToEdge) {
  std::vector<Vec<D>> out(coords.size());
  const auto strides = f.shape().strides();
  for (std::size_t i = 0; i < coords.size(); ++i) {
    detail::interpolate<D>(f.shape(), strides, f.values().data(), D, coords[i], policy, out[i].data());
  }
  return out;
}

/// Pullback (I o phi)(x) = I(x + u(x)), channel-wise, clamped at the edges.
template <int D>
ScalarImage<D> warp_image(const ScalarImage<D>& image, const Transform<D>& t) {
  require_same_shape(image, t, "warp_image");
  const auto& shape = image.shape();
  const auto strides = shape.strides();
  const int ch = image.channels();
  ScalarImage<D> out(shape, ch);
  const double* src = image.values().data();
  double* dst = out.values().data();
  const auto& u = t.displacement;
  for_each_node<D>(shape, [&](std::size_t n, const Index<D>& idx) {
    Vec<D> x;
    for (int a = 0; a < D; ++a) x[a] = idx[a] + u(n, a);
    detail::interpolate<D>(shape, strides, src, ch, x, BoundaryPolicy::ClampToEdge, dst + n * ch);
  });
  return out;
}

/// (outer o inner)(x) = outer(inner(x)).
template <int D>
Transform<D> compose(const Transform<D>& outer, const Transform<D>& inner) {
  require_same_shape(outer, inner, "compose");
  const auto& shape = inner.shape();
  const auto strides = shape.strides();
  Transform<D> out{VectorField<D>(shape), outer.kind};
  const auto& uo = outer.displacement;
  const auto& ui = inner.displacement;
  const double* src = uo.values().data();
  for_each_node<D>(shape, [&](std::size_t n, const Index<D>& idx) {
    Vec<D> x, s;
    for (int a = 0; a < D; ++a) x[a] = idx[a] + ui(n, a);
    detail::interpolate<D>(shape, strides, src, D, x, BoundaryPolicy::ClampToEdge, s.data());
    for (int a = 0; a < D; ++a) out.displacement(n, a) = s[a] + ui(n, a);
  });
  return out;
}

/// Per-node Jacobian, entry (i, j) = d f_i / d x_j.
template <int D>
std::vector<Mat<D>> jacobian_matrix(const VectorField<D>& f) {
  const auto& shape = f.shape();
  const auto strides = shape.strides();
  std::vector<Mat<D>> jac(shape.size());
  const double* data = f.values().data();
  for_each_node<D>(shape, [&](std::size_t n, const Index<D>& idx) {
    for (int i = 0; i < D; ++i) {
      for (int j = 0; j < D; ++j) jac[n][i][j] = detail::partial<D>(shape, strides, data, D, n, idx, i, j);
    }
  });
  return jac;
}

/// det(I + J_u) at every node.
template <int D>
std::vector<double> jacobian_determinant(const Transform<D>& t) {
  auto jac = jacobian_matrix(t.displacement);
  std::vector<double> out(jac.size());
  for (std::size_t n = 0; n < jac.size(); ++n) {
    for (int a = 0; a < D; ++a) jac[n][a][a] += 1.0;
    out[n] = detail::det<D>(jac[n]);
  }
  return out;
}

/// Max-norm (over interior nodes and components) of compose(t, inv) - id.
template <int D>
double inverse_residual(const Transform<D>& t, const Transform<D>& inv) {
  const auto r = compose(t, inv);
  double worst = 0.0;
  for_each_node<D>(t.shape(), [&](std::size_t n, const Index<D>& idx) {
    if (!t.shape().inside(idx, kInteriorRim)) return;
    for (int a = 0; a < D; ++a) worst = std::max(worst, std::abs(r.displacement(n, a)));
  });
  return worst;
}

/// Fixed-point inversion u_inv <- -u(x + u_inv(x)).
/// Throws NumericError when the interior residual stays above `tol`.
template <int D>
Transform<D> invert_transform(const Transform<D>& t, int max_iter = 50, double tol = 1e-4) {
  const auto& shape = t.shape();
  const auto strides = shape.strides();
  const double* src = t.displacement.values().data();
  Transform<D> inv{VectorField<D>(shape), t.kind};
  VectorField<D> next(shape);
  for (int it = 0; it < max_iter; ++it) {
    for_each_node<D>(shape, [&](std::size_t n, const Index<D>& idx) {
      Vec<D> x, s;
      for (int a = 0; a < D; ++a) x[a] = idx[a] + inv.displacement(n, a);
      detail::interpolate<D>(shape, strides, src, D, x, BoundaryPolicy::ClampToEdge, s.data());
      for (int a = 0; a < D; ++a) next(n, a) = -s[a];
    });
    std::swap(inv.displacement, next);
    if (inverse_residual(t, inv) < tol) return inv;
  }
  throw NumericError("inversion did not converge");
}

}  // namespace mmorph
