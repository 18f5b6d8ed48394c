#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmorph/cli/commands.hpp"
#include "support.hpp"

using namespace mmorph;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mmorph_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

io::MmfContainer random_container(std::uint64_t seed) {
  const CounterRng rng(seed, 9);
  io::MmfContainer c;
  c.kind = static_cast<io::MmfKind>(rng.bits(0) % 3);
  const int dims = 2 + static_cast<int>(rng.bits(1) % 2);
  for (int a = 0; a < dims; ++a) c.shape.push_back(4 + static_cast<int>(rng.bits(2 + a) % 6));
  for (int a = 0; a < dims; ++a) c.spacing.push_back(0.5 + rng.uniform(10 + a));
  c.channels = 1 + static_cast<int>(rng.bits(20) % 3);
  c.meta = {{"seed", seed}, {"note", "round trip"}};
  c.payload.resize(c.expected_values());
  for (std::size_t i = 0; i < c.payload.size(); ++i) {
    // Arbitrary bit patterns, NaN excluded so == is meaningful.
    std::uint64_t k = 1000 + 8 * i;
    float f;
    do {
      f = std::bit_cast<float>(static_cast<std::uint32_t>(rng.bits(k++)));
    } while (std::isnan(f));
    c.payload[i] = f;
  }
  return c;
}

}  // namespace

TEST(Mmf, RoundTripIsBitIdentical) {
  const auto dir = scratch("mmf");
  fs::create_directories(dir);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto c = random_container(s);
    io::write_mmf(c, dir / "x.mmf");
    const auto back = io::read_mmf(dir / "x.mmf");
    EXPECT_EQ(back, c);
    EXPECT_EQ(io::encode_mmf(back), slurp(dir / "x.mmf"));
  }
}

TEST(Mmf, ImageRoundTripAndSize) {
  const auto img = sinusoid_pattern(96, 10, PatternAxis::Axis0);
  ScalarImage<2> two(img.shape(), 2);
  for (std::size_t n = 0; n < img.nodes(); ++n) two(n, 0) = two(n, 1) = static_cast<float>(img(n, 0));
  const auto c = io::to_container(two);
  const auto bytes = io::encode_mmf(c);
  EXPECT_EQ(bytes.size(), 4 + 4 + io::header_json(c).size() + 73728);
  EXPECT_EQ(bytes.substr(0, 4), "MMF1");
  EXPECT_EQ(io::image_from<2>(io::decode_mmf(bytes)), two);
}

TEST(Mmf, TransformKeepsKind) {
  const Transform<2> t{mmorph::testing::smooth_field(3, 1.0, 16, 4.0), TransformKind::Lagrangian};
  const auto back = io::transform_from<2>(io::decode_mmf(io::encode_mmf(io::to_container(t))));
  EXPECT_EQ(back.kind, TransformKind::Lagrangian);
  for (std::size_t i = 0; i < t.displacement.values().size(); ++i) {
    EXPECT_EQ(back.displacement.values()[i], static_cast<float>(t.displacement.values()[i]));
  }
}

TEST(Mmf, Errors) {
  auto bytes = io::encode_mmf(random_container(1));
  std::string wrong = bytes;
  wrong[3] = '0';
  try {
    io::decode_mmf(wrong);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "not an MMF file");
  }
  try {
    io::decode_mmf(bytes.substr(0, bytes.size() - 2));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "corrupt container");
  }
  EXPECT_THROW(io::decode_mmf("MMF"), DataError);
  EXPECT_THROW(io::decode_mmf(std::string("MMF1\xff\x00\x00\x00{", 9)), DataError);
  EXPECT_THROW(io::read_mmf("/nonexistent/file.mmf"), DataError);
  EXPECT_THROW(io::field_from<2>(io::to_container(ScalarImage<2>(GridShape<2>::cube(4), 1))), DataError);
  EXPECT_THROW(io::image_from<3>(io::to_container(ScalarImage<2>(GridShape<2>::cube(4), 1))), DataError);
}

TEST(Mmf, NanWarnsButLoads) {
  auto c = io::to_container(ScalarImage<2>(GridShape<2>::cube(4), 1));
  c.payload[3] = std::numeric_limits<float>::quiet_NaN();
  ::testing::internal::CaptureStderr();
  const auto back = io::decode_mmf(io::encode_mmf(c));
  EXPECT_NE(::testing::internal::GetCapturedStderr().find("NaN"), std::string::npos);
  EXPECT_TRUE(std::isnan(back.payload[3]));
}

TEST(Report, JsonSchemaAndCsv) {
  MetricsReport m;
  m.rmse = 0.01;
  m.negdet_pct = 0.5;
  nlohmann::json doc{{"method", "mmorph2"}, {"frames", 3}, {"target", 2}, {"metrics", io::to_json(m)},
                     {"timings", io::to_json(StageTimings{})}};
  EXPECT_TRUE(io::validate_metrics_json(doc).empty());
  EXPECT_TRUE(doc["metrics"]["epe_mean"].is_null());
  doc["metrics"]["detauc"] = 2.0;
  EXPECT_FALSE(io::validate_metrics_json(doc).empty());
  doc["metrics"].erase("rmse");
  EXPECT_GE(io::validate_metrics_json(doc).size(), 2u);

  const io::BenchRow row{"7", "direct", 3, m};
  const auto line = io::csv_row(row);
  EXPECT_EQ(line.rfind("7,direct,3,0.01,", 0), 0u);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), std::count(io::kCsvHeader, io::kCsvHeader + std::strlen(io::kCsvHeader), ','));
}

TEST(Report, StatsUseLowerMedian) {
  const auto s = io::stats_of({4.0, 1.0, 3.0, 2.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.median, 2.0);
  EXPECT_NEAR(s.std, std::sqrt(1.25), 1e-15);
}

TEST(Corpus, SplitCounts) {
  const auto s = io::split_counts(10);
  EXPECT_EQ(s.train, 6);
  EXPECT_EQ(s.val, 2);
  EXPECT_EQ(s.test, 2);
  const auto t = io::split_counts(200);
  EXPECT_EQ(t.train + t.val + t.test, 200);
  EXPECT_EQ(t.test, 40);
}

TEST(Commands, SynthLayoutDeterminismAndForce) {
  const auto dir = scratch("synth");
  cli::SynthOptions o;
  o.out = dir;
  o.count = 10;
  o.config.seed = 5;
  o.config.size = 48;
  o.config.freq = 5;
  const auto manifest = cli::cmd_synth(o);
  EXPECT_EQ(io::list_movies(dir, "train").size(), 6u);
  EXPECT_EQ(io::list_movies(dir, "val").size(), 2u);
  EXPECT_EQ(io::list_movies(dir, "test").size(), 2u);
  const auto test_movie = dir / "test" / "movies" / "9";
  EXPECT_TRUE(fs::exists(test_movie / "frame_2.mmf"));
  EXPECT_TRUE(fs::exists(test_movie / "gt_1.mmf"));
  EXPECT_FALSE(fs::exists(test_movie / "gt_0.mmf"));

  // Manifest reconstructs the generator.
  const auto regen = cli::regenerate(io::read_json(dir / "manifest.json"), 9);
  auto c = io::to_container(regen.frames[2]);
  c.meta = {{"seed", regen.seed}, {"stream", regen.stream}, {"t", 2}};
  EXPECT_EQ(io::encode_mmf(c), slurp(test_movie / "frame_2.mmf"));

  const auto before = slurp(test_movie / "gt_2.mmf");
  EXPECT_THROW(cli::cmd_synth(o), DataError);
  o.force = true;
  o.threads = 3;
  cli::cmd_synth(o);
  EXPECT_EQ(slurp(test_movie / "gt_2.mmf"), before);

  o.config.freq = 0;
  EXPECT_THROW(cli::cmd_synth(o), UsageError);
}

TEST(Commands, RegisterStaticMovie) {
  const auto dir = scratch("register");
  fs::create_directories(dir / "movie");
  const auto f = mmorph::testing::shifted_pattern(48, 9.6, {0, 0});
  for (int t = 0; t < 3; ++t) io::write_mmf(io::to_container(f), dir / "movie" / io::frame_name(t));
  cli::RegisterOptions o;
  o.movie = dir / "movie";
  o.out = dir / "out";
  o.png = true;
  const auto doc = cli::cmd_register(o);
  EXPECT_LT(doc["metrics"]["rmse"].get<double>(), 1e-3);
  const auto written = io::read_json(dir / "out" / "metrics.json");
  EXPECT_TRUE(io::validate_metrics_json(written).empty());
  EXPECT_TRUE(fs::exists(dir / "out" / "phi_02.mmf"));
  EXPECT_TRUE(fs::exists(dir / "out" / "detj.png"));
  EXPECT_TRUE(fs::exists(dir / "out" / "warped_c1.png"));

  cli::RegisterOptions missing;
  missing.frames = {dir / "movie" / "frame_0.mmf", dir / "movie" / "frame_9.mmf"};
  missing.out = dir / "out2";
  EXPECT_THROW(cli::cmd_register(missing), DataError);
  cli::RegisterOptions bad_method = o;
  bad_method.method = "nope";
  EXPECT_THROW(cli::cmd_register(bad_method), UsageError);
}

TEST(Commands, BenchSummaryAndThreadInvariance) {
  const auto dir = scratch("bench");
  cli::SynthOptions s;
  s.out = dir / "corpus";
  s.count = 10;
  s.config.size = 48;
  s.config.freq = 5;
  cli::cmd_synth(s);

  cli::BenchConfig cfg;
  cfg.corpus_dir = s.out;
  cfg.methods = {"direct", "mmorph2"};
  cfg.estimator.iters_per_level = 10;
  cfg.threads = 1;
  cfg.out = dir / "one";
  const auto one = cli::cmd_bench(cfg);
  cfg.threads = 2;
  cfg.out = dir / "two";
  const auto two = cli::cmd_bench(cfg);
  ASSERT_EQ(one.rows.size(), 4u);
  ASSERT_EQ(two.rows.size(), 4u);
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    EXPECT_EQ(one.rows[i].movie_id, two.rows[i].movie_id);
    EXPECT_EQ(one.rows[i].metrics.rmse, two.rows[i].metrics.rmse);
    EXPECT_EQ(one.rows[i].metrics.epe_mean, two.rows[i].metrics.epe_mean);
    EXPECT_EQ(one.rows[i].metrics.negdet_pct, two.rows[i].metrics.negdet_pct);
  }
  EXPECT_EQ(one.summary["methods"].size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "one" / "bench.csv"));
  std::ifstream csv(dir / "one" / "bench.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, io::kCsvHeader);

  cfg.methods = {"bogus"};
  EXPECT_THROW(cli::cmd_bench(cfg), UsageError);
}

TEST(Commands, FieldOps) {
  const auto dir = scratch("field");
  fs::create_directories(dir);
  const auto shape = GridShape<2>::cube(16);
  io::write_mmf(io::to_container(VectorField<2>(shape, Vec<2>{1.0, 0.0})), dir / "v.mmf");
  io::write_mmf(io::to_container(Transform<2>{VectorField<2>(shape, Vec<2>{0.0, 2.0})}), dir / "t.mmf");
  cli::cmd_field_exp(dir / "v.mmf", dir / "e.mmf", ExpConfig{});
  cli::cmd_field_compose(dir / "e.mmf", dir / "t.mmf", dir / "c.mmf");
  const auto c = io::transform_from<2>(io::read_mmf(dir / "c.mmf"));
  EXPECT_NEAR(c.displacement(shape.linear({8, 8}), 0), 1.0, 1e-6);
  EXPECT_NEAR(c.displacement(shape.linear({8, 8}), 1), 2.0, 1e-6);
  cli::cmd_field_bracket(dir / "v.mmf", dir / "v.mmf", dir / "b.mmf");
  cli::cmd_field_invert(dir / "t.mmf", dir / "i.mmf", 50, 1e-4);
  EXPECT_NEAR(io::transform_from<2>(io::read_mmf(dir / "i.mmf")).displacement(0, 1), -2.0, 1e-6);
  cli::cmd_field_detmap(dir / "t.mmf", dir / "d.mmf", dir / "d.png");
  EXPECT_EQ(io::image_from<2>(io::read_mmf(dir / "d.mmf"))(5, 0), 1.0);
  EXPECT_TRUE(fs::exists(dir / "d.png"));
}

TEST(Parallel, ThreadsResolution) {
  EXPECT_EQ(resolve_threads(3), 3);
  ::setenv("MMORPH_THREADS", "2", 1);
  EXPECT_EQ(resolve_threads(0), 2);
  ::setenv("MMORPH_THREADS", "abc", 1);
  EXPECT_THROW(resolve_threads(0), UsageError);
  ::unsetenv("MMORPH_THREADS");
  EXPECT_EQ(resolve_threads(0), 1);
  std::vector<int> hit(50, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 50);
  EXPECT_THROW(parallel_for(5, 2, [](std::size_t i) {
                 if (i == 3) throw DataError("boom");
               }),
               DataError);
}

#ifdef MMORPH_BIN
TEST(Cli, ExitCodes) {
  const std::string bin = MMORPH_BIN;
  const auto dir = scratch("cli");
  auto run = [&](const std::string& args) {
    const int rc = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("synth --out " + (dir / "c").string() + " --freq 0"), 1);
  EXPECT_EQ(run("synth --out " + (dir / "c").string() + " --count 5 --size 32 --freq 4"), 0);
  EXPECT_EQ(run("synth --out " + (dir / "c").string() + " --count 5"), 2);
  EXPECT_EQ(run("register --frames " + (dir / "missing.mmf").string() + " --out " + dir.string()), 2);
  EXPECT_EQ(run("bench --corpus " + (dir / "c").string() + " --out " + (dir / "b").string() + " --methods warp"), 1);
  const auto t = dir / "fold.mmf";
  const auto shape = GridShape<2>::cube(16);
  io::write_mmf(io::to_container(Transform<2>{mmorph::testing::affine_field(shape, Mat<2>{{{-2.0, 0}, {0, 0}}},
                                                                             Vec<2>{7.5, 7.5})}),
                t);
  EXPECT_EQ(run("field invert " + t.string() + " " + (dir / "inv.mmf").string() + " --max-iter 3 --tol 1e-9"), 3);
  EXPECT_EQ(run("field detmap " + t.string() + " " + (dir / "det.mmf").string()), 0);
}
#endif
