#pragma once

// Synthetic tagged "movies": two-channel sinusoid patterns deformed by
// cubic B-spline free-form deformations whose control offsets are
// subdivided linearly in time, with ground-truth Lagrangian transforms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mmorph/error.hpp"
#include "mmorph/field_ops.hpp"
#include "mmorph/grid.hpp"
#include "mmorph/rng.hpp"

namespace mmorph {

struct SynthConfig {
  int size = 96;
  int frames = 3;
  int freq = 10;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;  // movie index within a corpus
  int reject_limit = 20;
  // Realized peak per-step displacement as a fraction of max_step.
  double step_fill = 0.84;

  double period() const { return static_cast<double>(size) / freq; }
  double max_step() const { return 0.5 * period(); }
  double max_total() const { return (frames - 1) * max_step(); }
  double cp_spacing() const { return 2.0 * max_total(); }

  void validate() const {
    if (size < 8) throw UsageError("size must be >= 8");
    if (frames < 2) throw UsageError("frames must be >= 2");
    if (freq < 1) throw UsageError("freq must be >= 1");
    if (!(period() > 2.0)) throw UsageError("pattern period must exceed 2 px");
    if (reject_limit < 1) throw UsageError("reject_limit must be >= 1");
    if (!(step_fill > 0.0 && step_fill <= 1.0)) throw UsageError("step_fill must lie in (0, 1]");
  }
};

enum class PatternAxis { Axis0 = 0, Axis1 = 1 };

/// 0.5 + 0.5 sin(2 pi x / P), the analytic tag profile.
inline double sinusoid_value(double x, double period) {
  return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * x / period);
}

/// Node-sampled single-channel sinusoid along `axis` with period size/freq.
inline ScalarImage<2> sinusoid_pattern(int size, int freq, PatternAxis axis) {
  const double period = static_cast<double>(size) / freq;
  ScalarImage<2> img(GridShape<2>::cube(size), 1);
  const int a = static_cast<int>(axis);
  for_each_node<2>(img.shape(), [&](std::size_t n, const Index<2>& idx) { img(n, 0) = sinusoid_value(idx[a], period); });
  return img;
}

/// Control lattice for a uniform cubic B-spline: point k along an axis sits
/// at (k - 1) * spacing, so one ring of points lies outside the image.
template <int D>
struct ControlGrid {
  Index<D> dims{};
  double spacing = 1.0;
  std::vector<Vec<D>> offsets;

  static ControlGrid covering(int size, double spacing) {
    ControlGrid g;
    g.spacing = spacing;
    g.dims.fill(static_cast<int>(std::ceil(size / spacing)) + 3);
    std::size_t n = 1;
    for (int d : g.dims) n *= static_cast<std::size_t>(d);
    g.offsets.assign(n, Vec<D>{});
    return g;
  }

  std::size_t linear(const Index<D>& k) const {
    std::size_t n = 0;
    for (int a = 0; a < D; ++a) n = n * static_cast<std::size_t>(dims[a]) + static_cast<std::size_t>(k[a]);
    return n;
  }
};

namespace detail {

inline std::array<double, 4> cubic_bspline_weights(double u) {
  const double u2 = u * u, u3 = u2 * u;
  return {(1.0 - u) * (1.0 - u) * (1.0 - u) / 6.0, (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
          (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0, u3 / 6.0};
}

}  // namespace detail

/// Tensor-product cubic B-spline interpolation of control offsets at nodes.
template <int D>
VectorField<D> bspline_field(const ControlGrid<D>& control, const GridShape<D>& shape) {
  if (!(control.spacing > 0)) throw DataError("malformed control grid: spacing must be positive");
  std::size_t expect = 1;
  for (int a = 0; a < D; ++a) {
    const int needed = static_cast<int>(std::floor((shape.dims[a] - 1) / control.spacing)) + 4;
    if (control.dims[a] < needed) throw DataError("malformed control grid: lattice does not cover the image");
    expect *= static_cast<std::size_t>(control.dims[a]);
  }
  if (control.offsets.size() != expect) throw DataError("malformed control grid: offset count mismatch");

  VectorField<D> out(shape);
  for_each_node<D>(shape, [&](std::size_t n, const Index<D>& idx) {
    Index<D> base;
    std::array<std::array<double, 4>, D> w;
    for (int a = 0; a < D; ++a) {
      const double t = idx[a] / control.spacing + 1.0;
      const int i = static_cast<int>(std::floor(t));
      base[a] = i - 1;
      w[a] = detail::cubic_bspline_weights(t - i);
    }
    Vec<D> acc{};
    Index<D> k;
    for (int corner = 0; corner < (1 << (2 * D)); ++corner) {
      double weight = 1.0;
      for (int a = 0; a < D; ++a) {
        const int o = (corner >> (2 * a)) & 3;
        k[a] = base[a] + o;
        weight *= w[a][static_cast<std::size_t>(o)];
      }
      const Vec<D>& c = control.offsets[control.linear(k)];
      for (int a = 0; a < D; ++a) acc[a] += weight * c[a];
    }
    out.set(n, acc);
  });
  return out;
}

struct MovieSample {
  std::vector<ScalarImage<2>> frames;
  // Index t holds the map for frame t; index 0 is the identity.
  std::vector<Transform<2>> gt_lagrangian;
  std::vector<Transform<2>> gt_forward;
  ControlGrid<2> total_offsets;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  int attempts = 1;
};

/// Largest per-component change of the ground-truth displacement between
/// consecutive frames, over interior nodes.
inline double max_step_motion(const MovieSample& m) {
  double worst = 0.0;
  const auto& shape = m.frames.front().shape();
  for (std::size_t t = 1; t < m.gt_lagrangian.size(); ++t) {
    const auto& a = m.gt_lagrangian[t].displacement;
    const auto& b = m.gt_lagrangian[t - 1].displacement;
    for_each_node<2>(shape, [&](std::size_t n, const Index<2>& idx) {
      if (!shape.inside(idx, kInteriorRim)) return;
      for (int c = 0; c < 2; ++c) worst = std::max(worst, std::abs(a(n, c) - b(n, c)));
    });
  }
  return worst;
}

namespace detail {

inline constexpr double kMinForwardDet = 0.05;
inline constexpr double kStepSlack = 0.1;
inline constexpr int kGeneratorInvertIters = 200;

// Renders a movie from fixed total offsets. Returns false when the sample
// must be rejected (fold, failed inversion, or per-step bound violated).
inline bool render_movie(const SynthConfig& cfg, const ControlGrid<2>& total, MovieSample& out) {
  const auto shape = GridShape<2>::cube(cfg.size);
  const double period = cfg.period();
  out.frames.clear();
  out.gt_lagrangian.clear();
  out.gt_forward.clear();
  out.total_offsets = total;
  for (int t = 0; t < cfg.frames; ++t) {
    ControlGrid<2> step = total;
    const double frac = static_cast<double>(t) / (cfg.frames - 1);
    for (auto& c : step.offsets) c = {c[0] * frac, c[1] * frac};
    Transform<2> g{bspline_field(step, shape), TransformKind::Lagrangian};
    for (double d : jacobian_determinant(g)) {
      if (!(d > kMinForwardDet)) return false;
    }
    ScalarImage<2> frame(shape, 2);
    for_each_node<2>(shape, [&](std::size_t n, const Index<2>& idx) {
      frame(n, 0) = sinusoid_value(idx[0] + g.displacement(n, 0), period);
      frame(n, 1) = sinusoid_value(idx[1] + g.displacement(n, 1), period);
    });
    Transform<2> inv;
    if (t == 0) {
      inv = Transform<2>::identity(shape, TransformKind::Lagrangian);
    } else {
      try {
        inv = invert_transform(g, kGeneratorInvertIters, 1e-4);
      } catch (const NumericError&) {
        return false;
      }
    }
    out.frames.push_back(std::move(frame));
    out.gt_forward.push_back(std::move(g));
    out.gt_lagrangian.push_back(std::move(inv));
  }
  return max_step_motion(out) <= cfg.max_step() + kStepSlack;
}

}  // namespace detail

/// Builds a movie from explicit total offsets; throws if it is rejected.
inline MovieSample movie_from_offsets(const SynthConfig& cfg, const ControlGrid<2>& total) {
  cfg.validate();
  MovieSample m;
  m.seed = cfg.seed;
  m.stream = cfg.stream;
  if (!detail::render_movie(cfg, total, m)) throw NumericError("offsets produce an invalid movie");
  return m;
}

inline MovieSample generate_movie(const SynthConfig& cfg) {
  cfg.validate();
  const double amp = cfg.max_total();
  MovieSample m;
  m.seed = cfg.seed;
  m.stream = cfg.stream;
  for (int attempt = 0; attempt < cfg.reject_limit; ++attempt) {
    const CounterRng rng(cfg.seed, cfg.stream);
    auto total = ControlGrid<2>::covering(cfg.size, cfg.cp_spacing());
    std::uint64_t counter = static_cast<std::uint64_t>(attempt) << 32;
    for (auto& c : total.offsets) {
      c[0] = rng.uniform(counter++, -amp, amp);
      c[1] = rng.uniform(counter++, -amp, amp);
    }
    // B-spline averaging shrinks the realized field well below the offset
    // range; rescale so the peak total motion is step_fill * max_total.
    const auto field = bspline_field(total, GridShape<2>::cube(cfg.size));
    double peak = 0.0;
    for (double x : field.values()) peak = std::max(peak, std::abs(x));
    if (peak > 0.0) {
      const double s = cfg.step_fill * amp / peak;
      for (auto& c : total.offsets) c = {c[0] * s, c[1] * s};
    }
    if (detail::render_movie(cfg, total, m)) {
      m.attempts = attempt + 1;
      return m;
    }
  }
  throw NumericError("rejection limit exceeded");
}

}  // namespace mmorph
