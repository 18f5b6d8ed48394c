#pragma once

// On-disk corpus layout:
//
//   <out>/manifest.json
//   <out>/{train,val,test}/movies/<idx>/frame_<t>.mmf   t = 0..T-1
//   <out>/{train,val,test}/movies/<idx>/gt_<t>.mmf      t = 1..T-1
//
// <idx> is the global movie index, which is also the PRNG stream, so any
// movie can be regenerated from the manifest alone.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmorph/error.hpp"
#include "mmorph/io/mmf.hpp"
#include "mmorph/synth.hpp"

namespace mmorph::io {

namespace fs = std::filesystem;

inline constexpr const char* kSplitNames[3] = {"train", "val", "test"};

struct SplitCounts {
  int train = 0, val = 0, test = 0;
};

/// 6:2:2, train and val rounded down, test takes the remainder.
inline SplitCounts split_counts(int count) {
  SplitCounts s;
  s.train = count * 6 / 10;
  s.val = count * 2 / 10;
  s.test = count - s.train - s.val;
  return s;
}

inline const char* split_of(int idx, const SplitCounts& s) {
  if (idx < s.train) return "train";
  if (idx < s.train + s.val) return "val";
  return "test";
}

inline nlohmann::json config_to_json(const SynthConfig& c) {
  return {{"size", c.size},         {"frames", c.frames},     {"freq", c.freq},
          {"seed", c.seed},         {"reject_limit", c.reject_limit}, {"step_fill", c.step_fill}};
}

inline SynthConfig config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    c.size = j.at("size").get<int>();
    c.frames = j.at("frames").get<int>();
    c.freq = j.at("freq").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.reject_limit = j.at("reject_limit").get<int>();
    c.step_fill = j.at("step_fill").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad manifest config: ") + e.what());
  }
  return c;
}

inline std::string frame_name(int t) { return "frame_" + std::to_string(t) + ".mmf"; }
inline std::string gt_name(int t) { return "gt_" + std::to_string(t) + ".mmf"; }

inline void write_movie(const MovieSample& m, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < m.frames.size(); ++t) {
    auto c = to_container(m.frames[t]);
    c.meta = {{"seed", m.seed}, {"stream", m.stream}, {"t", t}};
    write_mmf(c, dir / frame_name(static_cast<int>(t)));
  }
  for (std::size_t t = 1; t < m.gt_lagrangian.size(); ++t) {
    auto c = to_container(m.gt_lagrangian[t]);
    c.meta["t"] = t;
    write_mmf(c, dir / gt_name(static_cast<int>(t)));
  }
}

template <int D>
struct MovieData {
  std::string id;
  std::vector<ScalarImage<D>> frames;
  std::vector<std::optional<Transform<D>>> truth;  // index t, empty at 0
};

template <int D>
MovieData<D> read_movie(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("movie directory '" + dir.string() + "' not found");
  MovieData<D> m;
  m.id = dir.filename().string();
  for (int t = 0; fs::exists(dir / frame_name(t)); ++t) {
    m.frames.push_back(image_from<D>(read_mmf(dir / frame_name(t))));
    std::optional<Transform<D>> gt;
    if (t > 0 && fs::exists(dir / gt_name(t))) gt = transform_from<D>(read_mmf(dir / gt_name(t)));
    m.truth.push_back(std::move(gt));
  }
  if (m.frames.size() < 2) throw DataError("movie '" + dir.string() + "' has fewer than two frames");
  return m;
}

/// Movie directories of one split, ordered by numeric index.
inline std::vector<fs::path> list_movies(const fs::path& corpus, const std::string& split) {
  const fs::path root = corpus / split / "movies";
  if (!fs::is_directory(root)) throw DataError("corpus has no '" + split + "' split at " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end(), [](const fs::path& a, const fs::path& b) {
    const auto sa = a.filename().string(), sb = b.filename().string();
    return sa.size() != sb.size() ? sa.size() < sb.size() : sa < sb;
  });
  return dirs;
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad JSON in '" + path.string() + "': " + e.what());
  }
}

inline void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f << j.dump(2) << '\n';
}

}  // namespace mmorph::io
