#pragma once

// The mmorph subcommands as plain functions over option structs. Argument
// parsing lives in tools/mmorph.cpp.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmorph/error.hpp"
#include "mmorph/field_ops.hpp"
#include "mmorph/io/corpus.hpp"
#include "mmorph/io/mmf.hpp"
#include "mmorph/io/png.hpp"
#include "mmorph/io/report.hpp"
#include "mmorph/lie_algebra.hpp"
#include "mmorph/parallel.hpp"
#include "mmorph/pipeline.hpp"
#include "mmorph/synth.hpp"

namespace mmorph::cli {

namespace fs = std::filesystem;

// Calls f.template operator()<D>() for D in {2, 3}.
template <class F>
decltype(auto) with_dim(std::size_t dims, F&& f) {
  if (dims == 2) return f.template operator()<2>();
  if (dims == 3) return f.template operator()<3>();
  throw DataError("only 2D and 3D data are supported");
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  fs::path out;
  int count = 200;
  SynthConfig config{};
  bool force = false;
  int threads = 0;
};

inline void prepare_out_dir(const fs::path& out, bool force) {
  if (fs::exists(out) && !fs::is_directory(out)) throw DataError("'" + out.string() + "' is not a directory");
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!force) throw DataError("output directory '" + out.string() + "' is not empty (use --force)");
    for (const char* s : io::kSplitNames) fs::remove_all(out / s);
    fs::remove(out / "manifest.json");
  }
  fs::create_directories(out);
}

inline nlohmann::json cmd_synth(const SynthOptions& o) {
  if (o.count < 1) throw UsageError("count must be >= 1");
  o.config.validate();
  prepare_out_dir(o.out, o.force);
  const auto splits = io::split_counts(o.count);

  std::vector<int> attempts(static_cast<std::size_t>(o.count));
  parallel_for(static_cast<std::size_t>(o.count), resolve_threads(o.threads), [&](std::size_t i) {
    SynthConfig cfg = o.config;
    cfg.stream = i;
    const auto m = generate_movie(cfg);
    attempts[i] = m.attempts;
    const int idx = static_cast<int>(i);
    io::write_movie(m, o.out / io::split_of(idx, splits) / "movies" / std::to_string(idx));
  });

  nlohmann::json manifest;
  manifest["format"] = "MMF1";
  manifest["count"] = o.count;
  manifest["config"] = io::config_to_json(o.config);
  manifest["splits"] = {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}};
  manifest["attempts"] = attempts;
  io::write_json(manifest, o.out / "manifest.json");
  return manifest;
}

/// Regenerates movie `idx` of a corpus from its manifest.
inline MovieSample regenerate(const nlohmann::json& manifest, int idx) {
  SynthConfig cfg = io::config_from_json(manifest.at("config"));
  cfg.stream = static_cast<std::uint64_t>(idx);
  return generate_movie(cfg);
}

// ------------------------------------------------------------- register

struct EstimatorOverrides {
  std::optional<double> alpha, beta, sigma_fluid, sigma_diffusion, kappa;
  std::optional<int> levels, iters, squarings;

  void apply(EstimatorConfig& est, ExpConfig& exp) const {
    if (alpha) est.smooth_weight = *alpha;
    if (beta) est.inc_weight = *beta;
    if (sigma_fluid) est.sigma_fluid = *sigma_fluid;
    if (sigma_diffusion) est.sigma_diffusion = *sigma_diffusion;
    if (kappa) est.force_normalization = *kappa;
    if (levels) est.levels = *levels;
    if (iters) est.iters_per_level = *iters;
    if (squarings) {
      if (*squarings < 1) throw UsageError("squarings must be >= 1");
      est.exp.num_squarings = *squarings;
      exp.num_squarings = *squarings;
    }
    est.validate();
  }
};

struct RegisterOptions {
  std::string method = "mmorph2";
  std::vector<fs::path> frames;  // explicit frame files, or
  std::optional<fs::path> movie;  // a corpus movie directory
  std::optional<int> target;     // default: last frame
  fs::path out;
  EstimatorOverrides overrides;
  int corrections = 1;
  std::optional<int> frames_used;
  bool png = false;
};

inline nlohmann::json estimator_json(const EstimatorConfig& e, const ExpConfig& x) {
  return {{"levels", e.levels},
          {"iters_per_level", e.iters_per_level},
          {"sigma_fluid", e.sigma_fluid},
          {"sigma_diffusion", e.sigma_diffusion},
          {"kappa", e.force_normalization},
          {"alpha", e.smooth_weight},
          {"beta", e.inc_weight},
          {"stop_tol", e.stop_tol},
          {"squarings", x.num_squarings}};
}

template <int D>
nlohmann::json register_movie(const io::MovieData<D>& movie, const RegisterOptions& o) {
  const int last = static_cast<int>(movie.frames.size()) - 1;
  const int target = o.target.value_or(last);
  if (target < 1 || target > last) throw UsageError("target must lie in [1, " + std::to_string(last) + "]");

  MethodSpec<D> spec;
  spec.method = parse_method(o.method);
  o.overrides.apply(spec.estimator, spec.exp);
  if (o.corrections < 0) throw UsageError("corrections must be >= 0");
  spec.correction_passes = o.corrections;
  spec.frames_used = o.frames_used;

  SequenceInput<D> seq{movie.frames, target};
  const auto result = register_sequence(seq, spec);
  const auto& truth = movie.truth[static_cast<std::size_t>(target)];
  const LossWeights w{spec.estimator.smooth_weight, spec.estimator.inc_weight, 0.5, spec.estimator.epsilon};
  const auto metrics = io::evaluate(movie.frames, result, truth ? &*truth : nullptr, CropSpec{}, w);

  fs::create_directories(o.out);
  const std::string phi_name = "phi_0" + std::to_string(target) + ".mmf";
  io::write_mmf(io::to_container(result.lagrangian), o.out / phi_name);

  nlohmann::json doc;
  doc["method"] = to_string(spec.method);
  doc["frames"] = movie.frames.size();
  doc["target"] = target;
  doc["transform"] = phi_name;
  doc["metrics"] = io::to_json(metrics);
  doc["timings"] = io::to_json(result.timings);
  doc["estimator"] = estimator_json(spec.estimator, spec.exp);
  doc["correction_passes"] = spec.correction_passes;
  io::write_json(doc, o.out / "metrics.json");

  if (o.png) {
    if constexpr (D == 2) {
      const auto warped = warp_image(movie.frames[static_cast<std::size_t>(target)], result.lagrangian);
      for (int c = 0; c < warped.channels(); ++c) {
        const std::string sfx = "_c" + std::to_string(c) + ".png";
        io::export_channel_png(movie.frames.front(), c, o.out / ("reference" + sfx));
        io::export_channel_png(movie.frames[static_cast<std::size_t>(target)], c, o.out / ("target" + sfx));
        io::export_channel_png(warped, c, o.out / ("warped" + sfx));
      }
      io::export_det_png(result.lagrangian.shape(), jacobian_determinant(result.lagrangian), o.out / "detj.png");
    } else {
      warn("--png is only available for 2D data; skipped");
    }
  }
  return doc;
}

inline nlohmann::json cmd_register(const RegisterOptions& o) {
  if (o.movie && !o.frames.empty()) throw UsageError("give either --movie or --frames, not both");
  if (o.movie) {
    const auto probe = io::read_mmf(*o.movie / io::frame_name(0));
    return with_dim(probe.shape.size(), [&]<int D>() { return register_movie(io::read_movie<D>(*o.movie), o); });
  }
  if (o.frames.size() < 2) throw DataError("need at least two frames");
  for (const auto& f : o.frames) {
    if (!fs::exists(f)) throw DataError("frame '" + f.string() + "' not found");
  }
  const auto first = io::read_mmf(o.frames.front());
  return with_dim(first.shape.size(), [&]<int D>() {
    io::MovieData<D> m;
    m.id = "cli";
    for (const auto& f : o.frames) {
      m.frames.push_back(io::image_from<D>(io::read_mmf(f)));
      m.truth.emplace_back();
    }
    return register_movie(m, o);
  });
}

// ---------------------------------------------------------------- bench

struct BenchConfig {
  fs::path corpus_dir;
  std::vector<std::string> methods{"direct", "compose", "mmorph1", "mmorph2"};
  LossWeights weights{};
  CropSpec crop{};
  EstimatorConfig estimator{};
  ExpConfig exp{};
  int correction_passes = 1;
  int threads = 0;
  std::optional<int> limit;  // first N test movies only
  fs::path out;
};

/// Runs every method on one movie; Compose and Mmorph share one set of
/// Eulerian estimates, whose cost is charged to each of them.
inline std::vector<io::BenchRow> bench_movie(const io::MovieData<2>& movie, const std::vector<Method>& methods,
                                             const BenchConfig& cfg) {
  const int target = static_cast<int>(movie.frames.size()) - 1;
  SequenceInput<2> seq{movie.frames, target};
  MethodSpec<2> spec;
  spec.estimator = cfg.estimator;
  spec.exp = cfg.exp;
  spec.correction_passes = cfg.correction_passes;

  std::optional<std::vector<VectorField<2>>> vs;
  double vs_time = 0.0;
  std::vector<io::BenchRow> rows;
  const auto& truth = movie.truth[static_cast<std::size_t>(target)];
  for (const Method m : methods) {
    spec.method = m;
    RegistrationResult<2> r;
    if (m == Method::Direct) {
      r = register_direct(seq, spec);
    } else {
      if (!vs) {
        const auto t0 = std::chrono::steady_clock::now();
        vs = detail::eulerian_velocities(seq, spec, frame_schedule(target, std::nullopt));
        vs_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      r = register_from_velocities(seq, *vs, spec);
      r.timings.eulerian_s = vs_time;
    }
    rows.push_back({movie.id, to_string(m), static_cast<int>(movie.frames.size()),
                    io::evaluate(movie.frames, r, truth ? &*truth : nullptr, cfg.crop, cfg.weights)});
  }
  return rows;
}

struct BenchOutput {
  std::vector<io::BenchRow> rows;
  nlohmann::json summary;
};

inline BenchOutput cmd_bench(const BenchConfig& cfg) {
  std::vector<Method> methods;
  for (const auto& s : cfg.methods) methods.push_back(parse_method(s));
  if (methods.empty()) throw UsageError("no methods selected");
  cfg.weights.validate();
  cfg.estimator.validate();

  auto dirs = io::list_movies(cfg.corpus_dir, "test");
  if (cfg.limit && *cfg.limit < static_cast<int>(dirs.size())) dirs.resize(static_cast<std::size_t>(*cfg.limit));
  if (dirs.empty()) throw DataError("test split is empty");

  std::vector<std::vector<io::BenchRow>> per_movie(dirs.size());
  parallel_for(dirs.size(), resolve_threads(cfg.threads), [&](std::size_t i) {
    per_movie[i] = bench_movie(io::read_movie<2>(dirs[i]), methods, cfg);
  });

  BenchOutput out;
  for (auto& rs : per_movie) {
    for (auto& r : rs) out.rows.push_back(std::move(r));
  }
  std::vector<std::string> names;
  for (Method m : methods) names.push_back(to_string(m));
  out.summary = {{"movies", dirs.size()}, {"methods", io::summarize(out.rows, names)}};

  if (!cfg.out.empty()) {
    fs::create_directories(cfg.out);
    std::ofstream csv(cfg.out / "bench.csv");
    if (!csv) throw DataError("cannot write bench.csv");
    csv << io::kCsvHeader << '\n';
    for (const auto& r : out.rows) csv << io::csv_row(r) << '\n';
    io::write_json(out.summary, cfg.out / "summary.json");
  }
  return out;
}

// ---------------------------------------------------------------- field

inline void cmd_field_exp(const fs::path& in, const fs::path& out, const ExpConfig& cfg) {
  const auto c = io::read_mmf(in);
  with_dim(c.shape.size(), [&]<int D>() { io::write_mmf(io::to_container(mmorph::exp(io::field_from<D>(c), cfg)), out); });
}

inline void cmd_field_compose(const fs::path& outer, const fs::path& inner, const fs::path& out) {
  const auto a = io::read_mmf(outer), b = io::read_mmf(inner);
  with_dim(a.shape.size(), [&]<int D>() {
    io::write_mmf(io::to_container(compose(io::transform_from<D>(a), io::transform_from<D>(b))), out);
  });
}

inline void cmd_field_bracket(const fs::path& a, const fs::path& b, const fs::path& out) {
  const auto ca = io::read_mmf(a), cb = io::read_mmf(b);
  with_dim(ca.shape.size(), [&]<int D>() {
    io::write_mmf(io::to_container(lie_bracket(io::field_from<D>(ca), io::field_from<D>(cb))), out);
  });
}

inline void cmd_field_invert(const fs::path& in, const fs::path& out, int max_iter, double tol) {
  const auto c = io::read_mmf(in);
  with_dim(c.shape.size(), [&]<int D>() {
    io::write_mmf(io::to_container(invert_transform(io::transform_from<D>(c), max_iter, tol)), out);
  });
}

/// Writes det(I + J_u) as a one-channel image; a 2D map can also go to PNG.
inline void cmd_field_detmap(const fs::path& in, const fs::path& out, const std::optional<fs::path>& png) {
  const auto c = io::read_mmf(in);
  with_dim(c.shape.size(), [&]<int D>() {
    const auto t = io::transform_from<D>(c);
    const auto dets = jacobian_determinant(t);
    ScalarImage<D> img(t.shape(), 1);
    std::copy(dets.begin(), dets.end(), img.values().begin());
    io::write_mmf(io::to_container(img), out);
    if (png) {
      if constexpr (D == 2) {
        io::export_det_png(t.shape(), dets, *png);
      } else {
        throw UsageError("--png needs a 2D transform");
      }
    }
  });
}

}  // namespace mmorph::cli
