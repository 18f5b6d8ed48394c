#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <type_traits>

#include "mmorph/mmorph.hpp"

namespace mmorph::testing {

/// Smooth random field: cubic B-spline through i.i.d. control offsets with
/// lattice spacing `h`, rescaled so max |component| equals `peak`.
template <int D = 2>
VectorField<D> smooth_field(std::uint64_t seed, double peak, int size = 96, double h = 16.0) {
  const CounterRng rng(seed, 0x5eed);
  const auto shape = GridShape<D>::cube(size);
  VectorField<D> out(shape);
  if constexpr (D == 2) {
    auto g = ControlGrid<2>::covering(size, h);
    std::uint64_t c = 0;
    for (auto& o : g.offsets) o = {rng.uniform(c++, -1, 1), rng.uniform(c++, -1, 1)};
    out = bspline_field(g, shape);
  } else {
    // Sum of a few low-frequency sines; enough for 3D smoke tests.
    for_each_node<D>(shape, [&](std::size_t n, const Index<D>& idx) {
      for (int a = 0; a < D; ++a) {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double ph = 6.283 * rng.uniform(static_cast<std::uint64_t>(10 * a + k));
          v += std::sin(ph + 6.283 * idx[(a + k) % D] / (2.0 * size));
        }
        out(n, a) = v;
      }
    });
  }
  double m = 0.0;
  for (double x : out.values()) m = std::max(m, std::abs(x));
  return m > 0 ? out * (peak / m) : out;
}

/// Field a(x) = A (x - x0) + b.
template <int D>
VectorField<D> affine_field(const GridShape<D>& shape, const std::type_identity_t<Mat<D>>& A,
                            const std::type_identity_t<Vec<D>>& x0 = {}, const std::type_identity_t<Vec<D>>& b = {}) {
  VectorField<D> f(shape);
  for_each_node<D>(shape, [&](std::size_t n, const Index<D>& idx) {
    for (int i = 0; i < D; ++i) {
      double s = b[i];
      for (int j = 0; j < D; ++j) s += A[i][j] * (idx[j] - x0[j]);
      f(n, i) = s;
    }
  });
  return f;
}

template <int D>
double endpoint(const VectorField<D>& a, const VectorField<D>& b, std::size_t n) {
  double s = 0.0;
  for (int c = 0; c < D; ++c) s += (a(n, c) - b(n, c)) * (a(n, c) - b(n, c));
  return std::sqrt(s);
}

/// Mean / max endpoint difference over nodes at least `rim` from the border.
template <int D>
double interior_mean(const VectorField<D>& a, const VectorField<D>& b, int rim = kInteriorRim) {
  double s = 0.0;
  std::size_t count = 0;
  for_each_node<D>(a.shape(), [&](std::size_t n, const Index<D>& idx) {
    if (!a.shape().inside(idx, rim)) return;
    s += endpoint(a, b, n);
    ++count;
  });
  return s / static_cast<double>(count);
}

template <int D>
double interior_max(const VectorField<D>& a, const VectorField<D>& b, int rim = kInteriorRim) {
  double m = 0.0;
  for_each_node<D>(a.shape(), [&](std::size_t n, const Index<D>& idx) {
    if (a.shape().inside(idx, rim)) m = std::max(m, endpoint(a, b, n));
  });
  return m;
}

/// Two-channel sinusoid shifted by c: I(x) = pattern(x - c).
inline ScalarImage<2> shifted_pattern(int size, double period, const Vec<2>& c) {
  ScalarImage<2> img(GridShape<2>::cube(size), 2);
  for_each_node<2>(img.shape(), [&](std::size_t n, const Index<2>& idx) {
    img(n, 0) = sinusoid_value(idx[0] - c[0], period);
    img(n, 1) = sinusoid_value(idx[1] - c[1], period);
  });
  return img;
}

}  // namespace mmorph::testing
