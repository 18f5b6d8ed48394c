#pragma once

// Sequence-level Lagrangian motion: direct registration, composition of
// Eulerian steps, and momenta / shooting / correction.
//
// Convention: Phi_0t pulls frame t back onto the reference,
// I_0 ~ I_t o Phi_0t. An Eulerian step phi maps frame t onto frame t-1,
// so Phi_0t = phi_(t-1)t o Phi_0(t-1). Example: if frame t is frame t-1
// shifted by +2 px along axis 1 (I_t(x) = I_(t-1)(x - 2 e1)), then
// phi(x) = x + 2 e1 and the displacements of consecutive steps add up.

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmorph/error.hpp"
#include "mmorph/estimator.hpp"
#include "mmorph/field_ops.hpp"
#include "mmorph/grid.hpp"
#include "mmorph/lie_algebra.hpp"

namespace mmorph {

enum class Method { Direct, Compose, Mmorph1, Mmorph2 };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Direct: return "direct";
    case Method::Compose: return "compose";
    case Method::Mmorph1: return "mmorph1";
    case Method::Mmorph2: return "mmorph2";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "direct") return Method::Direct;
  if (s == "compose") return Method::Compose;
  if (s == "mmorph1") return Method::Mmorph1;
  if (s == "mmorph2") return Method::Mmorph2;
  throw UsageError("unknown method '" + s + "'");
}

template <int D>
using PairEstimator = std::function<VectorField<D>(const ScalarImage<D>& fixed, const ScalarImage<D>& moving)>;

template <int D>
struct SequenceInput {
  std::vector<ScalarImage<D>> frames;
  int target_index = 1;

  void validate() const {
    if (frames.size() < 2) throw DataError("sequence needs at least two frames");
    if (target_index < 1 || target_index >= static_cast<int>(frames.size())) {
      throw DataError("target index out of range");
    }
    for (const auto& f : frames) {
      if (!(f.shape() == frames.front().shape()) || f.channels() != frames.front().channels()) {
        throw DataError("all frames must share shape and channels");
      }
    }
  }
};

template <int D>
struct MethodSpec {
  Method method = Method::Mmorph2;
  EstimatorConfig estimator{};
  ExpConfig exp{};
  int correction_passes = 1;
  // Frames used between reference and target, both included. Unset means
  // every frame; otherwise intermediate frames are spaced evenly.
  std::optional<int> frames_used;
  // Replaces estimate_svf when set (a learned model, a counting stub...).
  PairEstimator<D> estimator_override;

  VectorField<D> estimate(const ScalarImage<D>& fixed, const ScalarImage<D>& moving) const {
    if (estimator_override) return estimator_override(fixed, moving);
    return estimate_svf(fixed, moving, estimator);
  }
};

struct StageTimings {
  double eulerian_s = 0.0;
  double momenta_s = 0.0;
  double shooting_s = 0.0;
  double correction_s = 0.0;
  double total() const { return eulerian_s + momenta_s + shooting_s + correction_s; }
};

template <int D>
struct RegistrationResult {
  int target_index = 1;
  Transform<D> lagrangian;
  std::vector<Transform<D>> eulerian;
  std::optional<VectorField<D>> momenta;
  std::optional<Transform<D>> shot;  // exp(momenta), before correction
  std::optional<Transform<D>> residual;
  StageTimings timings;
};

namespace detail {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

/// Frame indices from 0 to `target` inclusive; `count` evenly spaced ones
/// when given, rounding toward the reference.
inline std::vector<int> frame_schedule(int target, std::optional<int> count) {
  std::vector<int> out;
  if (!count || *count >= target + 1) {
    for (int t = 0; t <= target; ++t) out.push_back(t);
    return out;
  }
  if (*count < 2) throw UsageError("frames_used must be >= 2");
  for (int j = 0; j < *count; ++j) {
    const int idx = static_cast<int>((static_cast<long long>(j) * target) / (*count - 1));
    if (out.empty() || idx != out.back()) out.push_back(idx);
  }
  return out;
}

template <int D>
RegistrationResult<D> register_direct(const SequenceInput<D>& seq, const MethodSpec<D>& spec) {
  seq.validate();
  detail::Stopwatch sw;
  RegistrationResult<D> r;
  r.target_index = seq.target_index;
  const auto v = spec.estimate(seq.frames[0], seq.frames[static_cast<std::size_t>(seq.target_index)]);
  r.timings.eulerian_s = sw.lap();
  r.lagrangian = mmorph::exp(v, spec.exp);
  r.lagrangian.kind = TransformKind::Lagrangian;
  r.timings.shooting_s = sw.lap();
  return r;
}

namespace detail {

// Eulerian velocities along `schedule`: entry k registers frame
// schedule[k+1] onto frame schedule[k].
template <int D>
std::vector<VectorField<D>> eulerian_velocities(const SequenceInput<D>& seq, const MethodSpec<D>& spec,
                                                const std::vector<int>& schedule) {
  std::vector<VectorField<D>> vs;
  for (std::size_t k = 0; k + 1 < schedule.size(); ++k) {
    vs.push_back(spec.estimate(seq.frames[static_cast<std::size_t>(schedule[k])],
                               seq.frames[static_cast<std::size_t>(schedule[k + 1])]));
  }
  return vs;
}

template <int D>
RegistrationResult<D> compose_from(const std::vector<VectorField<D>>& vs, const MethodSpec<D>& spec, int target) {
  detail::Stopwatch sw;
  RegistrationResult<D> r;
  r.target_index = target;
  r.lagrangian = Transform<D>::identity(vs.front().shape(), TransformKind::Lagrangian);
  for (const auto& v : vs) {
    r.eulerian.push_back(mmorph::exp(v, spec.exp));
    r.lagrangian = compose(r.eulerian.back(), r.lagrangian);
  }
  r.lagrangian.kind = TransformKind::Lagrangian;
  r.timings.shooting_s = sw.lap();
  return r;
}

template <int D>
RegistrationResult<D> mmorph_from(const SequenceInput<D>& seq, const std::vector<VectorField<D>>& vs,
                                  const MethodSpec<D>& spec, int target) {
  const MomentaOrder order = spec.method == Method::Mmorph1 ? MomentaOrder::Order1 : MomentaOrder::Order2;
  detail::Stopwatch sw;
  RegistrationResult<D> r;
  r.target_index = target;

  VectorField<D> p(vs.front().shape());
  for (const auto& v : vs) p = momenta_step(p, v, order);
  r.timings.momenta_s = sw.lap();

  Transform<D> phi = mmorph::exp(p, spec.exp);
  phi.kind = TransformKind::Lagrangian;
  r.timings.shooting_s = sw.lap();
  r.shot = phi;

  const auto& reference = seq.frames[0];
  const auto& moving = seq.frames[static_cast<std::size_t>(target)];
  for (int pass = 0; pass < spec.correction_passes; ++pass) {
    const auto v_res = spec.estimate(reference, warp_image(moving, phi));
    auto res = mmorph::exp(v_res, spec.exp);
    phi = compose(phi, res);
    r.residual = r.residual ? compose(*r.residual, res) : res;
  }
  r.timings.correction_s = sw.lap();

  phi.kind = TransformKind::Lagrangian;
  r.lagrangian = std::move(phi);
  r.momenta = std::move(p);
  return r;
}

}  // namespace detail

template <int D>
RegistrationResult<D> register_compose(const SequenceInput<D>& seq, const MethodSpec<D>& spec) {
  seq.validate();
  detail::Stopwatch sw;
  const auto schedule = frame_schedule(seq.target_index, spec.frames_used);
  const auto vs = detail::eulerian_velocities(seq, spec, schedule);
  const double est = sw.lap();
  auto r = detail::compose_from(vs, spec, seq.target_index);
  r.timings.eulerian_s = est;
  return r;
}

template <int D>
RegistrationResult<D> register_mmorph(const SequenceInput<D>& seq, const MethodSpec<D>& spec) {
  seq.validate();
  if (spec.method != Method::Mmorph1 && spec.method != Method::Mmorph2) {
    throw UsageError("register_mmorph needs mmorph1 or mmorph2");
  }
  detail::Stopwatch sw;
  const auto schedule = frame_schedule(seq.target_index, spec.frames_used);
  const auto vs = detail::eulerian_velocities(seq, spec, schedule);
  const double est = sw.lap();
  auto r = detail::mmorph_from(seq, vs, spec, seq.target_index);
  r.timings.eulerian_s = est;
  return r;
}

/// Compose or Mmorph result from precomputed consecutive-pair velocities;
/// vs[k] registers frame k+1 onto frame k and at least target entries are
/// needed. Timings exclude the estimation of `vs`.
template <int D>
RegistrationResult<D> register_from_velocities(const SequenceInput<D>& seq, const std::vector<VectorField<D>>& vs,
                                               const MethodSpec<D>& spec) {
  seq.validate();
  if (static_cast<int>(vs.size()) < seq.target_index) throw DataError("not enough Eulerian velocities");
  const std::vector<VectorField<D>> used(vs.begin(), vs.begin() + seq.target_index);
  switch (spec.method) {
    case Method::Compose: return detail::compose_from(used, spec, seq.target_index);
    case Method::Mmorph1:
    case Method::Mmorph2: return detail::mmorph_from(seq, used, spec, seq.target_index);
    case Method::Direct: break;
  }
  throw UsageError("register_from_velocities needs compose, mmorph1 or mmorph2");
}

template <int D>
RegistrationResult<D> register_sequence(const SequenceInput<D>& seq, const MethodSpec<D>& spec) {
  switch (spec.method) {
    case Method::Direct: return register_direct(seq, spec);
    case Method::Compose: return register_compose(seq, spec);
    case Method::Mmorph1:
    case Method::Mmorph2: return register_mmorph(seq, spec);
  }
  throw UsageError("unknown method");
}

/// Phi_0t for every t = 1..T-1. Compose and Mmorph estimate each
/// consecutive pair once and reuse it across targets.
template <int D>
std::vector<RegistrationResult<D>> run_sequence(const std::vector<ScalarImage<D>>& frames, const MethodSpec<D>& spec) {
  SequenceInput<D> seq{frames, 1};
  seq.validate();
  const int last = static_cast<int>(frames.size()) - 1;
  std::vector<RegistrationResult<D>> out;
  if (spec.method == Method::Direct || spec.frames_used) {
    for (int t = 1; t <= last; ++t) {
      seq.target_index = t;
      out.push_back(register_sequence(seq, spec));
    }
    return out;
  }
  detail::Stopwatch sw;
  const auto all = detail::eulerian_velocities(seq, spec, frame_schedule(last, std::nullopt));
  const double est = sw.lap();
  for (int t = 1; t <= last; ++t) {
    const std::vector<VectorField<D>> vs(all.begin(), all.begin() + t);
    auto r = spec.method == Method::Compose ? detail::compose_from(vs, spec, t) : detail::mmorph_from(seq, vs, spec, t);
    r.timings.eulerian_s = est * t / last;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mmorph
