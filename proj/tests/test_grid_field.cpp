#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "support.hpp"

using namespace mmorph;
using mmorph::testing::affine_field;
using mmorph::testing::interior_max;
using mmorph::testing::smooth_field;

TEST(GridShape, RejectsTinyAndBadSpacing) {
  EXPECT_THROW(GridShape<2>({3, 8}), DataError);
  EXPECT_THROW(GridShape<2>({8, 8}, {1.0, 0.0}), DataError);
  const GridShape<3> s({4, 5, 6});
  EXPECT_EQ(s.size(), 120u);
  EXPECT_EQ(s.strides(), (Index<3>{30, 6, 1}));
  EXPECT_EQ(s.unravel(s.linear({3, 2, 5})), (Index<3>{3, 2, 5}));
}

TEST(Sample, ReproducesNodes) {
  const auto f = smooth_field(1, 2.0, 32, 8.0);
  for_each_node<2>(f.shape(), [&](std::size_t n, const Index<2>& idx) {
    const auto v = sample(f, Vec<2>{double(idx[0]), double(idx[1])});
    ASSERT_EQ(v[0], f(n, 0));
    ASSERT_EQ(v[1], f(n, 1));
  });
}

TEST(Sample, MidpointIsAverage) {
  ScalarImage<2> img(GridShape<2>::cube(8), 1);
  img(img.shape().linear({3, 5}), 0) = 1.0;
  EXPECT_DOUBLE_EQ(sample(img, Vec<2>{2.5, 5.0})[0], 0.5);
  EXPECT_DOUBLE_EQ(sample(img, Vec<2>{3.0, 4.5})[0], 0.5);
}

TEST(Sample, AffineImageIsExact) {
  ScalarImage<2> img(GridShape<2>::cube(20), 1);
  auto affine = [](double x0, double x1) { return 0.3 * x0 - 0.7 * x1 + 2.0; };
  for_each_node<2>(img.shape(), [&](std::size_t n, const Index<2>& idx) { img(n, 0) = affine(idx[0], idx[1]); });
  const CounterRng rng(3, 0);
  for (std::uint64_t k = 0; k < 200; ++k) {
    const double x0 = rng.uniform(2 * k, 0.0, 19.0), x1 = rng.uniform(2 * k + 1, 0.0, 19.0);
    EXPECT_NEAR(sample(img, Vec<2>{x0, x1})[0], affine(x0, x1), 1e-6);
  }
}

TEST(Sample, NonFiniteCoordinateThrows) {
  const VectorField<2> f(GridShape<2>::cube(8));
  EXPECT_THROW(sample(f, Vec<2>{std::numeric_limits<double>::quiet_NaN(), 1.0}), DataError);
  EXPECT_THROW(sample(f, Vec<2>{1.0, std::numeric_limits<double>::infinity()}), DataError);
  try {
    sample(f, Vec<2>{NAN, 0.0});
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "invalid coordinate");
  }
}

TEST(Sample, BoundaryPolicies) {
  const VectorField<2> f(GridShape<2>::cube(8), Vec<2>{1.0, -2.0});
  const auto clamped = sample(f, Vec<2>{-3.0, 20.0});
  EXPECT_EQ(clamped, (Vec<2>{1.0, -2.0}));
  const auto zero = sample(f, Vec<2>{-3.0, 2.0}, BoundaryPolicy::ZeroDisplacement);
  EXPECT_EQ(zero, (Vec<2>{0.0, 0.0}));
  const auto batch = sample(f, std::vector<Vec<2>>{{1.5, 1.5}, {9.0, 0.0}}, BoundaryPolicy::ZeroDisplacement);
  EXPECT_EQ(batch[0], (Vec<2>{1.0, -2.0}));
  EXPECT_EQ(batch[1], (Vec<2>{0.0, 0.0}));
}

TEST(Warp, IdentityIsBitIdentical) {
  const auto img = sinusoid_pattern(32, 4, PatternAxis::Axis1);
  EXPECT_EQ(warp_image(img, Transform<2>::identity(img.shape())), img);
}

TEST(Warp, ConstantImageStaysConstant) {
  const ScalarImage<2> img(GridShape<2>::cube(32), 2, 0.37);
  const Transform<2> t{smooth_field(5, 4.0, 32, 8.0)};
  const auto w = warp_image(img, t);
  for (double v : w.values()) EXPECT_DOUBLE_EQ(v, 0.37);
}

TEST(Warp, TranslatedSinusoidWithinInterpolationBound) {
  const double period = 9.6;
  const auto img = sinusoid_pattern(96, 10, PatternAxis::Axis0);
  const Transform<2> t{VectorField<2>(img.shape(), Vec<2>{1.5, 0.0})};
  const auto w = warp_image(img, t);
  // Linear interpolation error <= h^2/8 * max|f''| with h = 1.
  const double k = 2.0 * std::numbers::pi / period;
  const double bound = 0.5 * k * k / 8.0;
  double worst = 0.0;
  for_each_node<2>(img.shape(), [&](std::size_t n, const Index<2>& idx) {
    if (!img.shape().inside(idx, kInteriorRim)) return;
    worst = std::max(worst, std::abs(w(n, 0) - sinusoid_value(idx[0] + 1.5, period)));
  });
  EXPECT_LT(worst, bound);
  EXPECT_GT(worst, 0.1 * bound);  // the oracle does see interpolation error
}

TEST(Compose, IdentityOnBothSides) {
  const Transform<2> phi{smooth_field(7, 3.0, 32, 8.0)};
  const auto id = Transform<2>::identity(phi.shape());
  EXPECT_EQ(compose(id, phi).displacement, phi.displacement);
  EXPECT_EQ(compose(phi, id).displacement, phi.displacement);
}

TEST(Compose, TranslationsAdd) {
  const auto shape = GridShape<2>::cube(16);
  const Transform<2> a{VectorField<2>(shape, Vec<2>{1.0, 0.0})};
  const Transform<2> b{VectorField<2>(shape, Vec<2>{0.0, 2.0})};
  const VectorField<2> expect(shape, Vec<2>{1.0, 2.0});
  EXPECT_EQ(interior_max(compose(a, b).displacement, expect), 0.0);
}

TEST(Compose, AffineProduct) {
  const auto shape = GridShape<2>::cube(40);
  const Vec<2> c{19.5, 19.5};
  const Mat<2> A{{{0.02, -0.03}, {0.01, -0.02}}};
  const Mat<2> B{{{-0.01, 0.02}, {0.03, 0.01}}};
  const Vec<2> a{0.3, -0.2}, b{-0.4, 0.1};
  const Transform<2> outer{affine_field(shape, A, c, a)};
  const Transform<2> inner{affine_field(shape, B, c, b)};
  // outer(inner(x)) - x = A (inner(x) - c) + a + (inner(x) - x).
  VectorField<2> expect(shape);
  for_each_node<2>(shape, [&](std::size_t n, const Index<2>& idx) {
    Vec<2> y;
    for (int i = 0; i < 2; ++i) y[i] = idx[i] + inner.displacement(n, i);
    for (int i = 0; i < 2; ++i) {
      expect(n, i) = a[i] + A[i][0] * (y[0] - c[0]) + A[i][1] * (y[1] - c[1]) + (y[i] - idx[i]);
    }
  });
  EXPECT_LT(interior_max(compose(outer, inner).displacement, expect), 1e-5);
}

TEST(Compose, PullbackAssociativity) {
  // warp(I, a o b) == warp(warp(I, a), b) up to interpolation error.
  const double period = 19.2;
  const auto img = sinusoid_pattern(96, 5, PatternAxis::Axis0);
  const Transform<2> a{smooth_field(11, 2.0)};
  const Transform<2> b{smooth_field(12, 2.0)};
  const auto lhs = warp_image(img, compose(a, b));
  const auto rhs = warp_image(warp_image(img, a), b);
  // Budget: one image interpolation on the left, two on the right (the
  // second on I o a, whose curvature grows with (1 + |Da|)^2), plus the
  // field interpolation of a, seen through |grad I|, on both sides.
  const double k = 2.0 * std::numbers::pi / period;
  const double interp = 0.5 * k * k / 8.0;
  double lip = 0.0, curv = 0.0;
  for (const auto& m : jacobian_matrix(a.displacement)) {
    lip = std::max(lip, std::abs(m[0][0]) + std::abs(m[0][1]));
  }
  const auto& shape = a.shape();
  for_each_node<2>(shape, [&](std::size_t n, const Index<2>& idx) {
    if (!shape.inside(idx, 1)) return;
    for (int j = 0; j < 2; ++j) {
      Index<2> lo = idx, hi = idx;
      --lo[j];
      ++hi[j];
      curv = std::max(curv, std::abs(a.displacement(shape.linear(hi), 0) - 2 * a.displacement(n, 0) +
                                     a.displacement(shape.linear(lo), 0)));
    }
  });
  const double field = 2.0 * curv / 8.0;
  const double bound = interp * (2.0 + (1.0 + lip) * (1.0 + lip)) + 2.0 * (0.5 * k) * field;
  double worst = 0.0;
  for_each_node<2>(img.shape(), [&](std::size_t n, const Index<2>& idx) {
    if (img.shape().inside(idx, 8)) worst = std::max(worst, std::abs(lhs(n, 0) - rhs(n, 0)));
  });
  EXPECT_LT(worst, bound);
  EXPECT_GT(worst, 0.0);
}

TEST(Jacobian, ConstantFieldIsZero) {
  const VectorField<2> f(GridShape<2>::cube(8), Vec<2>{3.0, -1.0});
  for (const auto& m : jacobian_matrix(f)) EXPECT_EQ(m, (Mat<2>{}));
}

TEST(Jacobian, LinearFieldIsExactEverywhere) {
  const Mat<2> A{{{0.5, -1.25}, {2.0, 0.75}}};
  const auto f = affine_field(GridShape<2>::cube(12), A);
  for (const auto& m : jacobian_matrix(f)) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(m[i][j], A[i][j], 1e-12);
    }
  }
}

TEST(Jacobian, AnisotropicSpacingScalesDerivatives) {
  const GridShape<2> shape({10, 10}, {2.0, 0.5});
  const auto f = affine_field(shape, Mat<2>{{{1.0, 0.0}, {0.0, 1.0}}});  // per index step
  const auto jac = jacobian_matrix(f);
  EXPECT_DOUBLE_EQ(jac[shape.linear({5, 5})][0][0], 0.5);
  EXPECT_DOUBLE_EQ(jac[shape.linear({5, 5})][1][1], 2.0);
}

TEST(Jacobian, SmoothFieldMatchesStencilOracles) {
  const auto f = smooth_field(21, 3.0);
  const auto& shape = f.shape();
  const auto jac = jacobian_matrix(f);
  // Independent central-difference oracle: must agree to rounding.
  // Five-point oracle: differs from the 3-point stencil by its truncation
  // error, bounded by max|f'''| / 6 (unit spacing) plus a higher-order term.
  double third = 0.0;
  for_each_node<2>(shape, [&](std::size_t, const Index<2>& idx) {
    if (!shape.inside(idx, 2)) return;
    for (int j = 0; j < 2; ++j) {
      auto at = [&](int k, int c) {
        Index<2> q = idx;
        q[j] += k;
        return f(shape.linear(q), c);
      };
      for (int c = 0; c < 2; ++c) {
        third = std::max(third, std::abs((at(2, c) - 2 * at(1, c) + 2 * at(-1, c) - at(-2, c)) / 2.0));
      }
    }
  });
  double worst3 = 0.0, worst5 = 0.0;
  for_each_node<2>(shape, [&](std::size_t n, const Index<2>& idx) {
    if (!shape.inside(idx, 2)) return;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        auto at = [&](int k) {
          Index<2> q = idx;
          q[j] += k;
          return f(shape.linear(q), i);
        };
        const double c3 = (at(1) - at(-1)) / 2.0;
        const double c5 = (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / 12.0;
        worst3 = std::max(worst3, std::abs(jac[n][i][j] - c3));
        worst5 = std::max(worst5, std::abs(jac[n][i][j] - c5));
      }
    }
  });
  EXPECT_LT(worst3, 1e-14);
  EXPECT_LT(worst5, 1.5 * third / 6.0);
}

TEST(Determinant, IdentityAndScaling) {
  const auto shape = GridShape<2>::cube(16);
  for (double d : jacobian_determinant(Transform<2>::identity(shape))) EXPECT_EQ(d, 1.0);
  const double s = 1.3;
  const Transform<2> scale{affine_field(shape, Mat<2>{{{s - 1, 0}, {0, s - 1}}}, Vec<2>{7.5, 7.5})};
  for (double d : jacobian_determinant(scale)) EXPECT_NEAR(d, s * s, 1e-12);
}

TEST(Determinant, ThreeDimensionalScaling) {
  const auto shape = GridShape<3>::cube(6);
  const Transform<3> t{affine_field(shape, Mat<3>{{{0.1, 0, 0}, {0, -0.2, 0}, {0, 0, 0.5}}})};
  for (double d : jacobian_determinant(t)) EXPECT_NEAR(d, 1.1 * 0.8 * 1.5, 1e-12);
}

TEST(Invert, TranslationAndIdentity) {
  const auto shape = GridShape<2>::cube(16);
  const Transform<2> t{VectorField<2>(shape, Vec<2>{1.25, -0.5})};
  const auto inv = invert_transform(t);
  EXPECT_EQ(inv.displacement, VectorField<2>(shape, Vec<2>{-1.25, 0.5}));
  const auto id = Transform<2>::identity(shape);
  EXPECT_EQ(invert_transform(id).displacement, id.displacement);
}

TEST(Invert, RandomBSplineField) {
  SynthConfig cfg;
  auto g = ControlGrid<2>::covering(cfg.size, cfg.cp_spacing());
  const CounterRng rng(31, 0);
  std::uint64_t c = 0;
  for (auto& o : g.offsets) o = {rng.uniform(c++, -1, 1), rng.uniform(c++, -1, 1)};
  auto u = bspline_field(g, GridShape<2>::cube(cfg.size));
  double m = 0.0;
  for (double x : u.values()) m = std::max(m, std::abs(x));
  const Transform<2> t{u * (4.8 / m)};
  for (double d : jacobian_determinant(t)) ASSERT_GT(d, 0.0);
  const auto inv = invert_transform(t, 50, 1e-4);
  EXPECT_LT(interior_max(compose(t, inv).displacement, VectorField<2>(t.shape())), 1e-3);
}

TEST(Invert, NonConvergenceIsNumericError) {
  const auto shape = GridShape<2>::cube(16);
  // Collapses axis 0 onto x0 = 7.5: no inverse exists.
  const Transform<2> fold{affine_field(shape, Mat<2>{{{-1.0, 0}, {0, 0}}}, Vec<2>{7.5, 7.5})};
  try {
    invert_transform(fold, 5, 1e-6);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_STREQ(e.what(), "inversion did not converge");
  }
}

TEST(ThreeD, ComposeAndWarp) {
  const auto shape = GridShape<3>::cube(8);
  const Transform<3> a{VectorField<3>(shape, Vec<3>{1, 0, 0})};
  const Transform<3> b{VectorField<3>(shape, Vec<3>{0, 0.5, -1})};
  EXPECT_EQ(interior_max(compose(a, b).displacement, VectorField<3>(shape, Vec<3>{1, 0.5, -1})), 0.0);
  ScalarImage<3> img(shape, 1);
  for_each_node<3>(shape, [&](std::size_t n, const Index<3>& idx) { img(n, 0) = 0.1 * idx[0] + 0.2 * idx[2]; });
  const auto w = warp_image(img, b);
  const std::size_t n = shape.linear({4, 4, 4});
  EXPECT_NEAR(w(n, 0), 0.1 * 4 + 0.2 * 3, 1e-12);
}

TEST(ShapeChecks, MismatchThrows) {
  const Transform<2> a = Transform<2>::identity(GridShape<2>::cube(8));
  const Transform<2> b = Transform<2>::identity(GridShape<2>::cube(9));
  EXPECT_THROW(compose(a, b), DataError);
  EXPECT_THROW(warp_image(ScalarImage<2>(GridShape<2>::cube(8), 1), b), DataError);
}
