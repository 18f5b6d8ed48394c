#pragma once

// Grid containers for images, vector fields and transforms.
//
// Storage is row-major with the last axis fastest and channels interleaved,
// so node n, channel c lives at values[n * channels + c]. Coordinates are
// expressed in index units along (axis0, axis1[, axis2]); displacement
// components follow the same axis order.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mmorph/error.hpp"

namespace mmorph {

template <int D>
using Vec = std::array<double, D>;

template <int D>
using Mat = std::array<std::array<double, D>, D>;

template <int D>
using Index = std::array<int, D>;

template <int D>
struct GridShape {
  static_assert(D == 2 || D == 3, "only 2D and 3D grids are supported");

  Index<D> dims{};
  Vec<D> spacing{};

  GridShape() {
    dims.fill(4);
    spacing.fill(1.0);
  }

  explicit GridShape(Index<D> d) : GridShape(d, ones()) {}

  GridShape(Index<D> d, Vec<D> s) : dims(d), spacing(s) {
    for (int a = 0; a < D; ++a) {
      if (dims[a] < 4) {
        throw DataError("grid dimension must be >= 4 along every axis");
      }
      if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
        throw DataError("grid spacing must be positive and finite");
      }
    }
  }

  static GridShape cube(int n) {
    Index<D> d;
    d.fill(n);
    return GridShape(d);
  }

  std::size_t size() const {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }

  // Element stride (in nodes) of each axis.
  Index<D> strides() const {
    Index<D> s;
    s[D - 1] = 1;
    for (int a = D - 2; a >= 0; --a) s[a] = s[a + 1] * dims[a + 1];
    return s;
  }

  std::size_t linear(const Index<D>& idx) const {
    std::size_t n = 0;
    for (int a = 0; a < D; ++a) n = n * static_cast<std::size_t>(dims[a]) + static_cast<std::size_t>(idx[a]);
    return n;
  }

  Index<D> unravel(std::size_t n) const {
    Index<D> idx;
    for (int a = D - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(n % static_cast<std::size_t>(dims[a]));
      n /= static_cast<std::size_t>(dims[a]);
    }
    return idx;
  }

  // True when every index is at least `rim` nodes away from each face.
  bool inside(const Index<D>& idx, int rim) const {
    for (int a = 0; a < D; ++a) {
      if (idx[a] < rim || idx[a] > dims[a] - 1 - rim) return false;
    }
    return true;
  }

  friend bool operator==(const GridShape& l, const GridShape& r) {
    return l.dims == r.dims && l.spacing == r.spacing;
  }

 private:
  static Vec<D> ones() {
    Vec<D> s;
    s.fill(1.0);
    return s;
  }
};

// Rim width excluded by every "interior" tolerance statement.
inline constexpr int kInteriorRim = 2;

// Visits every node in storage order with its multi-index.
template <int D, class F>
void for_each_node(const GridShape<D>& shape, F&& f) {
  Index<D> idx{};
  const std::size_t n = shape.size();
  for (std::size_t i = 0; i < n; ++i) {
    f(i, static_cast<const Index<D>&>(idx));
    for (int a = D - 1; a >= 0; --a) {
      if (++idx[a] < shape.dims[a]) break;
      idx[a] = 0;
    }
  }
}

template <int D>
Vec<D> to_coord(const Index<D>& idx) {
  Vec<D> x;
  for (int a = 0; a < D; ++a) x[a] = static_cast<double>(idx[a]);
  return x;
}

// Multi-channel intensity grid (the frames of a sequence).
template <int D>
class ScalarImage {
 public:
  ScalarImage() = default;

  ScalarImage(GridShape<D> shape, int channels, double fill = 0.0)
      : shape_(shape), channels_(channels) {
    if (channels < 1) throw DataError("image needs at least one channel");
    values_.assign(shape_.size() * static_cast<std::size_t>(channels), fill);
  }

  const GridShape<D>& shape() const { return shape_; }
  int channels() const { return channels_; }
  std::size_t nodes() const { return shape_.size(); }

  double& operator()(std::size_t node, int c) { return values_[node * channels_ + c]; }
  double operator()(std::size_t node, int c) const { return values_[node * channels_ + c]; }

  std::span<double> values() & { return values_; }
  std::span<const double> values() const& { return values_; }
  void values() && = delete;  // would dangle

  friend bool operator==(const ScalarImage&, const ScalarImage&) = default;

 private:
  GridShape<D> shape_{};
  int channels_ = 1;
  std::vector<double> values_;
};

// Grid of D-vectors: a velocity field, momenta, or a displacement.
template <int D>
class VectorField {
 public:
  VectorField() = default;

  explicit VectorField(GridShape<D> shape, double fill = 0.0) : shape_(shape) {
    values_.assign(shape_.size() * D, fill);
  }

  VectorField(GridShape<D> shape, const Vec<D>& constant) : VectorField(shape) {
    for (std::size_t n = 0; n < nodes(); ++n) set(n, constant);
  }

  const GridShape<D>& shape() const { return shape_; }
  std::size_t nodes() const { return shape_.size(); }
  static constexpr int channels() { return D; }

  double& operator()(std::size_t node, int comp) { return values_[node * D + comp]; }
  double operator()(std::size_t node, int comp) const { return values_[node * D + comp]; }

  Vec<D> operator[](std::size_t node) const {
    Vec<D> v;
    for (int a = 0; a < D; ++a) v[a] = values_[node * D + a];
    return v;
  }

  void set(std::size_t node, const Vec<D>& v) {
    for (int a = 0; a < D; ++a) values_[node * D + a] = v[a];
  }

  std::span<double> values() & { return values_; }
  std::span<const double> values() const& { return values_; }
  void values() && = delete;  // would dangle

  VectorField& operator+=(const VectorField& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }

  VectorField& operator-=(const VectorField& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }

  VectorField& operator*=(double s) {
    for (double& x : values_) x *= s;
    return *this;
  }

  friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
  friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
  friend VectorField operator*(VectorField a, double s) { return a *= s; }
  friend VectorField operator*(double s, VectorField a) { return a *= s; }
  friend VectorField operator-(VectorField a) { return a *= -1.0; }

  friend bool operator==(const VectorField&, const VectorField&) = default;

 private:
  void check_same(const VectorField& o) const {
    if (!(shape_ == o.shape_)) throw DataError("vector field shape mismatch");
  }

  GridShape<D> shape_{};
  std::vector<double> values_;
};

enum class TransformKind { Eulerian, Lagrangian };

// phi(x) = x + u(x). The kind is bookkeeping only.
template <int D>
struct Transform {
  VectorField<D> displacement;
  TransformKind kind = TransformKind::Eulerian;

  static Transform identity(const GridShape<D>& shape, TransformKind kind = TransformKind::Eulerian) {
    return Transform{VectorField<D>(shape), kind};
  }

  const GridShape<D>& shape() const { return displacement.shape(); }

  friend bool operator==(const Transform&, const Transform&) = default;
};

enum class BoundaryPolicy { ClampToEdge, ZeroDisplacement };

template <class A, class B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (!(a.shape() == b.shape())) throw DataError(std::string(what) + ": shape mismatch");
}

}  // namespace mmorph
