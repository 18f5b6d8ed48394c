#pragma once

// Loss terms and evaluation metrics. Every loss is a per-node mean so the
// weights do not depend on grid size.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "mmorph/error.hpp"
#include "mmorph/field_ops.hpp"
#include "mmorph/grid.hpp"

namespace mmorph {

struct LossWeights {
  double alpha = 0.008;
  double beta = 0.0;
  double gamma = 0.5;
  double epsilon = 1e-6;

  void validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0) throw UsageError("loss weights must be non-negative");
    if (!(epsilon > 0)) throw UsageError("epsilon must be positive");
  }
};

/// Fraction of each axis dropped on both sides before computing metrics.
struct CropSpec {
  double fraction = 0.10;

  template <int D>
  std::pair<Index<D>, Index<D>> bounds(const GridShape<D>& shape) const {
    if (!(fraction >= 0.0 && fraction <= 0.4)) throw UsageError("crop fraction must lie in [0, 0.4]");
    Index<D> lo, hi;
    for (int a = 0; a < D; ++a) {
      lo[a] = static_cast<int>(std::floor(fraction * shape.dims[a]));
      hi[a] = shape.dims[a] - lo[a];
      if (hi[a] <= lo[a]) throw UsageError("crop leaves no interior");
    }
    return {lo, hi};
  }

  template <int D>
  std::vector<std::size_t> nodes(const GridShape<D>& shape) const {
    const auto [lo, hi] = bounds(shape);
    std::vector<std::size_t> out;
    for_each_node<D>(shape, [&](std::size_t n, const Index<D>& idx) {
      for (int a = 0; a < D; ++a) {
        if (idx[a] < lo[a] || idx[a] >= hi[a]) return;
      }
      out.push_back(n);
    });
    return out;
  }
};

struct MetricsReport {
  double rmse = 0.0;
  double epe_mean = 0.0;
  double epe_median = 0.0;
  double negdet_pct = 0.0;
  double detauc = 1.0;
  double l_sim = 0.0;
  double l_smooth = 0.0;
  double l_inc = 0.0;
  double wall_time_s = 0.0;
  bool has_truth = false;
};

/// Mean squared intensity difference over nodes and channels.
template <int D>
double l_sim(const ScalarImage<D>& a, const ScalarImage<D>& b) {
  require_same_shape(a, b, "l_sim");
  if (a.channels() != b.channels()) throw DataError("l_sim: channel mismatch");
  const auto va = a.values();
  const auto vb = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = va[i] - vb[i];
    s += d * d;
  }
  return s / static_cast<double>(va.size());
}

/// Mean squared Frobenius norm of the displacement Jacobian.
template <int D>
double l_smooth(const VectorField<D>& u) {
  const auto jac = jacobian_matrix(u);
  double s = 0.0;
  for (const auto& m : jac) {
    for (const auto& row : m) {
      for (double x : row) s += x * x;
    }
  }
  return s / static_cast<double>(jac.size());
}

/// Per-node incompressibility penalty |log max(det, eps)| - min(det, 0).
inline double inc_penalty(double det, double epsilon) {
  return std::abs(std::log(std::max(det, epsilon))) - std::min(det, 0.0);
}

template <int D>
double l_inc(const Transform<D>& t, double epsilon = 1e-6) {
  if (!(epsilon > 0)) throw UsageError("epsilon must be positive");
  const auto dets = jacobian_determinant(t);
  double s = 0.0;
  for (double d : dets) s += inc_penalty(d, epsilon);
  return s / static_cast<double>(dets.size());
}

template <int D>
double rmse_metric(const ScalarImage<D>& reference, const ScalarImage<D>& warped, const CropSpec& crop = {}) {
  require_same_shape(reference, warped, "rmse_metric");
  if (reference.channels() != warped.channels()) throw DataError("rmse_metric: channel mismatch");
  const auto nodes = crop.nodes(reference.shape());
  double s = 0.0;
  for (std::size_t n : nodes) {
    for (int c = 0; c < reference.channels(); ++c) {
      const double d = reference(n, c) - warped(n, c);
      s += d * d;
    }
  }
  return std::sqrt(s / static_cast<double>(nodes.size() * reference.channels()));
}

struct EndPointError {
  double mean = 0.0;
  double median = 0.0;
};

/// Endpoint error over the crop. The median is the lower median.
template <int D>
EndPointError epe(const Transform<D>& pred, const Transform<D>& truth, const CropSpec& crop = {}) {
  require_same_shape(pred, truth, "epe");
  const auto nodes = crop.nodes(pred.shape());
  std::vector<double> err;
  err.reserve(nodes.size());
  double sum = 0.0;
  for (std::size_t n : nodes) {
    double s = 0.0;
    for (int a = 0; a < D; ++a) {
      const double d = pred.displacement(n, a) - truth.displacement(n, a);
      s += d * d;
    }
    err.push_back(std::sqrt(s));
    sum += err.back();
  }
  const auto mid = err.begin() + static_cast<std::ptrdiff_t>((err.size() - 1) / 2);
  std::nth_element(err.begin(), mid, err.end());
  return {sum / static_cast<double>(err.size()), *mid};
}

template <int D>
double neg_det_pct(const Transform<D>& t, const CropSpec& crop = {}) {
  const auto dets = jacobian_determinant(t);
  const auto nodes = crop.nodes(t.shape());
  std::size_t neg = 0;
  for (std::size_t n : nodes) neg += dets[n] < 0.0 ? 1 : 0;
  return 100.0 * static_cast<double>(neg) / static_cast<double>(nodes.size());
}

inline constexpr double kDetAucTauMax = 0.5;

/// Normalized area under F(tau) = fraction of nodes with |det - 1| <= tau,
/// tau in [0, 0.5]. F is a step function, so the integral is evaluated in
/// closed form: each node contributes max(0, tau_max - |det - 1|).
template <int D>
double det_auc(const Transform<D>& t, const CropSpec& crop = {}) {
  const auto dets = jacobian_determinant(t);
  const auto nodes = crop.nodes(t.shape());
  double area = 0.0;
  for (std::size_t n : nodes) area += std::max(0.0, kDetAucTauMax - std::abs(dets[n] - 1.0));
  return area / (kDetAucTauMax * static_cast<double>(nodes.size()));
}

struct TotalLoss {
  double eulerian = 0.0;
  double lagrangian = 0.0;
  double combined = 0.0;
};

/// Sequence objective L = L_eul + gamma * L_lag, reported as a diagnostic.
/// `eulerian[t]` maps frame t+1 onto frame t; `lagrangian[t-1]` maps frame t
/// onto frame 0.
template <int D>
TotalLoss l_total(const std::vector<ScalarImage<D>>& frames, const std::vector<Transform<D>>& eulerian,
                  const std::vector<Transform<D>>& lagrangian, const LossWeights& w) {
  w.validate();
  if (frames.size() < 2 || eulerian.size() + 1 != frames.size() || lagrangian.size() + 1 != frames.size()) {
    throw DataError("l_total: sequence length mismatch");
  }
  auto pair_loss = [&](const ScalarImage<D>& fixed, const ScalarImage<D>& moving, const Transform<D>& t) {
    return l_sim(fixed, warp_image(moving, t)) + w.alpha * l_smooth(t.displacement) + w.beta * l_inc(t, w.epsilon);
  };
  TotalLoss out;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) out.eulerian += pair_loss(frames[t], frames[t + 1], eulerian[t]);
  for (std::size_t t = 1; t < frames.size(); ++t) out.lagrangian += pair_loss(frames[0], frames[t], lagrangian[t - 1]);
  out.combined = out.eulerian + w.gamma * out.lagrangian;
  return out;
}

}  // namespace mmorph
