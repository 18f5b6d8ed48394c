#pragma once

// Separable Gaussian smoothing and the 2x pyramid used by the estimator.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mmorph/field_ops.hpp"
#include "mmorph/grid.hpp"

namespace mmorph {

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

// In-place Gaussian blur (sigma in nodes) of a channel-interleaved array,
// clamping at the faces.
template <int D>
void gaussian_inplace(const GridShape<D>& shape, std::span<double> data, int channels, double sigma) {
  if (sigma <= 0.0) return;
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const auto strides = shape.strides();
  std::vector<double> line, out;
  for (int axis = 0; axis < D; ++axis) {
    const int len = shape.dims[axis];
    const std::size_t stride = static_cast<std::size_t>(strides[axis]);
    line.resize(static_cast<std::size_t>(len) * channels);
    out.resize(line.size());
    // Iterate over the start node of every line along `axis`.
    for_each_node<D>(shape, [&](std::size_t n0, const Index<D>& idx) {
      if (idx[axis] != 0) return;
      for (int i = 0; i < len; ++i) {
        for (int c = 0; c < channels; ++c) line[i * channels + c] = data[(n0 + i * stride) * channels + c];
      }
      for (int i = 0; i < len; ++i) {
        for (int c = 0; c < channels; ++c) {
          double s = 0.0;
          for (int j = -radius; j <= radius; ++j) {
            const int p = std::clamp(i + j, 0, len - 1);
            s += k[static_cast<std::size_t>(j + radius)] * line[p * channels + c];
          }
          out[i * channels + c] = s;
        }
      }
      for (int i = 0; i < len; ++i) {
        for (int c = 0; c < channels; ++c) data[(n0 + i * stride) * channels + c] = out[i * channels + c];
      }
    });
  }
}

template <int D>
GridShape<D> half_shape(const GridShape<D>& s) {
  Index<D> d;
  Vec<D> h;
  for (int a = 0; a < D; ++a) {
    d[a] = (s.dims[a] + 1) / 2;
    h[a] = s.spacing[a];
  }
  return GridShape<D>(d, h);
}

}  // namespace detail

template <int D>
ScalarImage<D> gaussian(ScalarImage<D> img, double sigma) {
  detail::gaussian_inplace<D>(img.shape(), img.values(), img.channels(), sigma);
  return img;
}

template <int D>
VectorField<D> gaussian(VectorField<D> f, double sigma) {
  detail::gaussian_inplace<D>(f.shape(), f.values(), D, sigma);
  return f;
}

/// Anti-aliased 2x decimation; coarse node i sits on fine node 2i.
template <int D>
ScalarImage<D> downsample(const ScalarImage<D>& img) {
  const auto blurred = gaussian(img, 1.0);
  const auto coarse = detail::half_shape(img.shape());
  ScalarImage<D> out(coarse, img.channels());
  const auto& fine = img.shape();
  for_each_node<D>(coarse, [&](std::size_t n, const Index<D>& idx) {
    Index<D> f;
    for (int a = 0; a < D; ++a) f[a] = 2 * idx[a];
    const std::size_t m = fine.linear(f);
    for (int c = 0; c < img.channels(); ++c) out(n, c) = blurred(m, c);
  });
  return out;
}

/// Resamples a coarse velocity onto `fine`, doubling magnitudes.
template <int D>
VectorField<D> upsample(const VectorField<D>& coarse, const GridShape<D>& fine) {
  VectorField<D> out(fine);
  const auto strides = coarse.shape().strides();
  for_each_node<D>(fine, [&](std::size_t n, const Index<D>& idx) {
    Vec<D> x, s;
    for (int a = 0; a < D; ++a) x[a] = 0.5 * idx[a];
    detail::interpolate<D>(coarse.shape(), strides, coarse.values().data(), D, x, BoundaryPolicy::ClampToEdge,
                           s.data());
    for (int a = 0; a < D; ++a) out(n, a) = 2.0 * s[a];
  });
  return out;
}

}  // namespace mmorph
