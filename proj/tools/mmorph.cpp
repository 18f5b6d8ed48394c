// mmorph command-line tool.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mmorph/cli/commands.hpp"

namespace {

using namespace mmorph;
namespace fs = std::filesystem;

void add_estimator_flags(CLI::App* app, cli::EstimatorOverrides& o) {
  app->add_option("--alpha", o.alpha, "smoothness weight (default 0.008)");
  app->add_option("--beta", o.beta, "incompressibility weight (default 0)");
  app->add_option("--levels", o.levels, "pyramid levels (default 3)");
  app->add_option("--iters", o.iters, "iterations per level (default 60)");
  app->add_option("--squarings", o.squarings, "scaling-and-squaring steps (default 7)");
  app->add_option("--sigma-fluid", o.sigma_fluid, "update smoothing sigma (default 1.0)");
  app->add_option("--sigma-diffusion", o.sigma_diffusion, "field smoothing sigma (default 1.5)");
  app->add_option("--kappa", o.kappa, "force normalization (default 1.0)");
}

int run(int argc, char** argv) {
  CLI::App app{"Lagrangian motion estimation for tagged image sequences"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress warnings");

  // synth
  cli::SynthOptions synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic movie corpus");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--count", synth.count, "number of movies (default 200)");
  s->add_option("--frames", synth.config.frames, "frames per movie (default 3)");
  s->add_option("--size", synth.config.size, "pixels per axis (default 96)");
  s->add_option("--freq", synth.config.freq, "pattern cycles per image (default 10)");
  s->add_option("--seed", synth.config.seed, "PRNG seed (default 0)");
  s->add_option("--step-fill", synth.config.step_fill, "peak per-step motion as a fraction of P/2 (default 0.84)");
  s->add_option("--reject-limit", synth.config.reject_limit, "resampling attempts per movie (default 20)");
  s->add_option("--threads", synth.threads, "worker threads (default MMORPH_THREADS or 1)");
  s->add_flag("--force", synth.force, "overwrite a non-empty output directory");

  // register
  cli::RegisterOptions reg;
  std::optional<std::string> movie;
  auto* r = app.add_subcommand("register", "estimate the Lagrangian transform of one sequence");
  r->add_option("--method", reg.method, "direct|compose|mmorph1|mmorph2 (default mmorph2)");
  r->add_option("--frames", reg.frames, "frame files in time order");
  r->add_option("--movie", movie, "corpus movie directory");
  r->add_option("--target", reg.target, "target frame index (default last)");
  r->add_option("--out", reg.out, "output directory")->required();
  r->add_option("--corrections", reg.corrections, "correction passes (default 1)");
  r->add_option("--frames-used", reg.frames_used, "evenly spaced frames to use, ends included");
  r->add_flag("--png", reg.png, "export grayscale PNGs of frames, warp and det J");
  add_estimator_flags(r, reg.overrides);

  // bench
  cli::BenchConfig bench;
  std::string methods = "direct,compose,mmorph1,mmorph2";
  cli::EstimatorOverrides bench_est;
  std::optional<int> limit;
  auto* b = app.add_subcommand("bench", "run methods over the test split of a corpus");
  b->add_option("--corpus", bench.corpus_dir, "corpus directory")->required();
  b->add_option("--out", bench.out, "output directory for bench.csv and summary.json")->required();
  b->add_option("--methods", methods, "comma-separated methods");
  b->add_option("--threads", bench.threads, "worker threads (default MMORPH_THREADS or 1)");
  b->add_option("--crop", bench.crop.fraction, "evaluation crop per side (default 0.10)");
  b->add_option("--corrections", bench.correction_passes, "correction passes (default 1)");
  b->add_option("--limit", limit, "only the first N test movies");
  add_estimator_flags(b, bench_est);

  // field
  auto* f = app.add_subcommand("field", "field algebra on MMF files");
  f->require_subcommand(1);
  std::string in, in2, out;
  std::optional<std::string> png;
  int squarings = ExpConfig{}.num_squarings, max_iter = 50;
  double tol = 1e-4;
  auto* fe = f->add_subcommand("exp", "exp of a velocity field");
  fe->add_option("in", in)->required();
  fe->add_option("out", out)->required();
  fe->add_option("--squarings", squarings, "scaling-and-squaring steps (default 7)");
  auto* fc = f->add_subcommand("compose", "outer o inner");
  fc->add_option("outer", in)->required();
  fc->add_option("inner", in2)->required();
  fc->add_option("out", out)->required();
  auto* fb = f->add_subcommand("bracket", "Lie bracket J_a b - J_b a");
  fb->add_option("a", in)->required();
  fb->add_option("b", in2)->required();
  fb->add_option("out", out)->required();
  auto* fi = f->add_subcommand("invert", "inverse of a transform");
  fi->add_option("in", in)->required();
  fi->add_option("out", out)->required();
  fi->add_option("--max-iter", max_iter, "fixed-point iterations (default 50)");
  fi->add_option("--tol", tol, "residual tolerance in px (default 1e-4)");
  auto* fd = f->add_subcommand("detmap", "Jacobian determinant map");
  fd->add_option("in", in)->required();
  fd->add_option("out", out)->required();
  fd->add_option("--png", png, "also write a PNG windowed to [0.5, 1.5]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  if (quiet) warnings_enabled() = false;

  if (s->parsed()) {
    const auto manifest = cli::cmd_synth(synth);
    std::cout << "wrote " << synth.count << " movies to " << synth.out.string() << '\n';
  } else if (r->parsed()) {
    if (movie) reg.movie = fs::path(*movie);
    const auto doc = cli::cmd_register(reg);
    std::cout << doc["metrics"].dump(2) << '\n';
  } else if (b->parsed()) {
    bench.methods.clear();
    std::stringstream ss(methods);
    for (std::string m; std::getline(ss, m, ',');) {
      if (!m.empty()) bench.methods.push_back(m);
    }
    bench_est.apply(bench.estimator, bench.exp);
    bench.weights.alpha = bench.estimator.smooth_weight;
    bench.weights.beta = bench.estimator.inc_weight;
    bench.limit = limit;
    const auto res = cli::cmd_bench(bench);
    std::cout << res.summary.dump(2) << '\n';
  } else if (fe->parsed()) {
    if (squarings < 1) throw UsageError("squarings must be >= 1");
    cli::cmd_field_exp(in, out, ExpConfig{squarings});
  } else if (fc->parsed()) {
    cli::cmd_field_compose(in, in2, out);
  } else if (fb->parsed()) {
    cli::cmd_field_bracket(in, in2, out);
  } else if (fi->parsed()) {
    cli::cmd_field_invert(in, out, max_iter, tol);
  } else if (fd->parsed()) {
    cli::cmd_field_detmap(in, out, png ? std::optional<fs::path>(*png) : std::nullopt);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mmorph::Error& e) {
    std::cerr << "mmorph: error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "mmorph: error: " << e.what() << '\n';
    return 2;
  }
}
