#pragma once

// MetricsReport evaluation and its JSON / CSV forms.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmorph/field_ops.hpp"
#include "mmorph/losses.hpp"
#include "mmorph/pipeline.hpp"

namespace mmorph::io {

/// Metrics of one registration result. `truth` enables EPE.
template <int D>
MetricsReport evaluate(const std::vector<ScalarImage<D>>& frames, const RegistrationResult<D>& r,
                       const Transform<D>* truth, const CropSpec& crop, const LossWeights& w) {
  const auto& phi = r.lagrangian;
  const auto warped = warp_image(frames[static_cast<std::size_t>(r.target_index)], phi);
  MetricsReport m;
  m.rmse = rmse_metric(frames.front(), warped, crop);
  if (truth) {
    const auto e = epe(phi, *truth, crop);
    m.epe_mean = e.mean;
    m.epe_median = e.median;
    m.has_truth = true;
  }
  m.negdet_pct = neg_det_pct(phi, crop);
  m.detauc = det_auc(phi, crop);
  m.l_sim = l_sim(frames.front(), warped);
  m.l_smooth = l_smooth(phi.displacement);
  m.l_inc = l_inc(phi, w.epsilon);
  m.wall_time_s = r.timings.total();
  return m;
}

inline nlohmann::json to_json(const MetricsReport& m) {
  nlohmann::json j;
  j["rmse"] = m.rmse;
  j["epe_mean"] = m.has_truth ? nlohmann::json(m.epe_mean) : nlohmann::json(nullptr);
  j["epe_median"] = m.has_truth ? nlohmann::json(m.epe_median) : nlohmann::json(nullptr);
  j["negdet_pct"] = m.negdet_pct;
  j["detauc"] = m.detauc;
  j["l_sim"] = m.l_sim;
  j["l_smooth"] = m.l_smooth;
  j["l_inc"] = m.l_inc;
  j["time_s"] = m.wall_time_s;
  return j;
}

inline nlohmann::json to_json(const StageTimings& t) {
  return {{"eulerian_s", t.eulerian_s},
          {"momenta_s", t.momenta_s},
          {"shooting_s", t.shooting_s},
          {"correction_s", t.correction_s}};
}

/// Checks a metrics.json document against the documented schema. Returns
/// the list of problems, empty when valid.
inline std::vector<std::string> validate_metrics_json(const nlohmann::json& j) {
  std::vector<std::string> problems;
  auto need_number = [&](const nlohmann::json& obj, const char* key, bool nullable) {
    if (!obj.contains(key)) {
      problems.push_back(std::string("missing ") + key);
    } else if (!(obj[key].is_number() || (nullable && obj[key].is_null()))) {
      problems.push_back(std::string("bad type for ") + key);
    }
  };
  if (!j.is_object()) return {"document is not an object"};
  if (!j.contains("method") || !j["method"].is_string()) problems.emplace_back("missing method");
  for (const char* k : {"frames", "target"}) {
    if (!j.contains(k) || !j[k].is_number_integer()) problems.push_back(std::string("missing ") + k);
  }
  if (!j.contains("metrics") || !j["metrics"].is_object()) {
    problems.emplace_back("missing metrics");
    return problems;
  }
  const auto& m = j["metrics"];
  for (const char* k : {"rmse", "negdet_pct", "detauc", "l_sim", "l_smooth", "l_inc", "time_s"}) need_number(m, k, false);
  need_number(m, "epe_mean", true);
  need_number(m, "epe_median", true);
  if (m.contains("negdet_pct") && m["negdet_pct"].is_number()) {
    const double v = m["negdet_pct"];
    if (v < 0 || v > 100) problems.emplace_back("negdet_pct out of range");
  }
  if (m.contains("detauc") && m["detauc"].is_number()) {
    const double v = m["detauc"];
    if (v < 0 || v > 1) problems.emplace_back("detauc out of range");
  }
  if (!j.contains("timings") || !j["timings"].is_object()) problems.emplace_back("missing timings");
  return problems;
}

struct BenchRow {
  std::string movie_id;
  std::string method;
  int frames = 0;
  MetricsReport metrics;
};

inline constexpr const char* kCsvHeader =
    "movie_id,method,T,rmse,epe_mean,epe_median,negdet_pct,detauc,l_sim,l_smooth,l_inc,time_s";

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string csv_row(const BenchRow& r) {
  const auto& m = r.metrics;
  std::string s = r.movie_id + "," + r.method + "," + std::to_string(r.frames);
  for (double v : {m.rmse, m.epe_mean, m.epe_median, m.negdet_pct, m.detauc, m.l_sim, m.l_smooth, m.l_inc,
                   m.wall_time_s}) {
    s += "," + format_number(v);
  }
  return s;
}

struct Stats {
  double mean = 0.0;
  double std = 0.0;  // population
  double median = 0.0;  // lower median, like epe
};

inline Stats stats_of(std::vector<double> xs) {
  Stats s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(xs.size()));
  const auto k = (xs.size() - 1) / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k), xs.end());
  s.median = xs[k];
  return s;
}

/// Summary over bench rows: one entry per method, in `methods` order, each
/// metric as {mean, std, median}.
inline nlohmann::json summarize(const std::vector<BenchRow>& rows, const std::vector<std::string>& methods) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& method : methods) {
    std::map<std::string, std::vector<double>> cols;
    std::size_t count = 0;
    for (const auto& r : rows) {
      if (r.method != method) continue;
      ++count;
      const auto& m = r.metrics;
      cols["rmse"].push_back(m.rmse);
      cols["epe_mean"].push_back(m.epe_mean);
      cols["epe_median"].push_back(m.epe_median);
      cols["negdet_pct"].push_back(m.negdet_pct);
      cols["detauc"].push_back(m.detauc);
      cols["l_sim"].push_back(m.l_sim);
      cols["l_smooth"].push_back(m.l_smooth);
      cols["l_inc"].push_back(m.l_inc);
      cols["time_s"].push_back(m.wall_time_s);
    }
    nlohmann::json entry{{"method", method}, {"movies", count}};
    for (auto& [name, xs] : cols) {
      const auto s = stats_of(std::move(xs));
      entry[name] = {{"mean", s.mean}, {"std", s.std}, {"median", s.median}};
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace mmorph::io
