// Copyright 2026 The fs2stream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fs2/config.hpp"
#include "fs2/core.hpp"
#include "fs2/metrics.hpp"
#include "fs2/stream.hpp"

namespace fs2 {

struct LogEntry {
  Group sensitive = Group::kPrivileged;
  Label truth = Label::kUnfavorable;
  Label prediction = Label::kUnfavorable;
};

using PredictionLog = std::vector<LogEntry>;

enum class FairnessMetric { kCspd, kCeod };
enum class PerformanceMetric { kBalancedAccuracy, kRecall };

inline std::string_view to_string(FairnessMetric m) { return m == FairnessMetric::kCspd ? "cspd" : "ceod"; }
inline std::string_view to_string(PerformanceMetric m) {
  return m == PerformanceMetric::kBalancedAccuracy ? "balanced_accuracy" : "recall";
}

inline FairnessMetric parse_fairness_metric(std::string_view s) {
  if (s == "cspd") return FairnessMetric::kCspd;
  if (s == "ceod") return FairnessMetric::kCeod;
  throw UsageError("unknown fairness metric '" + std::string(s) + "'");
}

inline PerformanceMetric parse_performance_metric(std::string_view s) {
  if (s == "balanced_accuracy" || s == "ba") return PerformanceMetric::kBalancedAccuracy;
  if (s == "recall") return PerformanceMetric::kRecall;
  throw UsageError("unknown performance metric '" + std::string(s) + "'");
}

struct TradeoffPoint {
  double bias = 0.0;
  double performance = 0.0;
};

// Majority predicted label; ties go to unfavorable.
inline Label majority_prediction(const PredictionLog& log) {
  std::size_t fav = 0;
  for (const auto& e : log) fav += is_favorable(e.prediction) ? 1 : 0;
  return 2 * fav > log.size() ? Label::kFavorable : Label::kUnfavorable;
}

// F_10 ... F_100. One seeded permutation is drawn and F_p replaces its
// first floor(p n) positions, so the substituted sets are nested.
inline std::vector<PredictionLog> build_pseudo_models(const PredictionLog& original, Label constant,
                                                      std::uint64_t seed) {
  if (original.empty()) throw ParameterError("prediction log is empty");
  const std::size_t n = original.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<PredictionLog> out;
  out.reserve(10);
  for (std::size_t k = 1; k <= 10; ++k) {
    PredictionLog log = original;
    const std::size_t count = k * n / 10;
    for (std::size_t i = 0; i < count; ++i) log[order[i]].prediction = constant;
    out.push_back(std::move(log));
  }
  return out;
}

// Replays the decayed parity recursion over a log. Steps taken while a group
// is still missing from the denominators are skipped; the recursion starts
// from 0 at the first step where both groups are present.
inline double replay_fairness(const PredictionLog& log, FairnessMetric m, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("decay factor must lie in [0,1]");
  std::array<std::uint64_t, 2> num{}, den{};
  double value = 0.0;
  bool started = false;
  for (const auto& e : log) {
    const std::size_t g = is_privileged(e.sensitive) ? 0 : 1;
    if (m == FairnessMetric::kCspd) {
      ++den[g];
      if (is_favorable(e.prediction)) ++num[g];
    } else if (is_favorable(e.truth)) {
      ++den[g];
      if (is_favorable(e.prediction)) ++num[g];
    }
    if (den[0] == 0 || den[1] == 0) continue;
    const double gap = static_cast<double>(num[0]) / static_cast<double>(den[0]) -
                       static_cast<double>(num[1]) / static_cast<double>(den[1]);
    value = decayed(value, gap, lambda);
    started = true;
  }
  if (!started) throw UndefinedMetricError(std::string(to_string(m)) + " still in warm-up at end of log");
  return value;
}

inline TradeoffPoint evaluate_point(const PredictionLog& log, FairnessMetric fm, PerformanceMetric pm,
                                    double lambda) {
  if (log.empty()) throw ParameterError("prediction log is empty");
  ConfusionAccumulator c;
  for (const auto& e : log) c.add(e.truth, e.prediction);
  TradeoffPoint p;
  p.bias = std::abs(replay_fairness(log, fm, lambda));
  p.performance = pm == PerformanceMetric::kBalancedAccuracy ? balanced_accuracy(c) : recall(c);
  return p;
}

struct TradeoffBaseline {
  // F_ori, F_10, ..., F_100.
  std::vector<TradeoffPoint> points;

  // Baseline as a function of bias: points sorted by bias, equal biases
  // averaged.
  std::vector<TradeoffPoint> curve() const {
    if (points.empty()) throw ParameterError("empty baseline");
    std::vector<TradeoffPoint> s = points;
    std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.bias < b.bias; });
    std::vector<TradeoffPoint> out;
    std::size_t i = 0;
    while (i < s.size()) {
      std::size_t j = i;
      double sum = 0.0;
      while (j < s.size() && s[j].bias == s[i].bias) sum += s[j++].performance;
      out.push_back({s[i].bias, sum / static_cast<double>(j - i)});
      i = j;
    }
    return out;
  }

  // Linear interpolation; biases outside the span clamp to the nearest end.
  double interpolate(double bias, bool* clamped = nullptr) const {
    return interpolate_curve(curve(), bias, clamped);
  }

  static double interpolate_curve(const std::vector<TradeoffPoint>& c, double bias, bool* clamped) {
    if (clamped) *clamped = bias < c.front().bias || bias > c.back().bias;
    if (bias <= c.front().bias) return c.front().performance;
    if (bias >= c.back().bias) return c.back().performance;
    const auto hi = std::upper_bound(c.begin(), c.end(), bias,
                                     [](double b, const TradeoffPoint& p) { return b < p.bias; });
    const auto lo = hi - 1;
    const double t = (bias - lo->bias) / (hi->bias - lo->bias);
    return lo->performance + t * (hi->performance - lo->performance);
  }
};

inline TradeoffBaseline build_baseline(const PredictionLog& original, FairnessMetric fm, PerformanceMetric pm,
                                       double lambda, Label constant, std::uint64_t seed) {
  TradeoffBaseline b;
  b.points.push_back(evaluate_point(original, fm, pm, lambda));
  for (const auto& log : build_pseudo_models(original, constant, seed)) {
    b.points.push_back(evaluate_point(log, fm, pm, lambda));
  }
  return b;
}

enum class Region { kWinWin = 1, kGood = 2, kInverted = 3, kPoor = 4, kLoseLose = 5 };

inline constexpr std::array<Region, 5> kAllRegions = {Region::kWinWin, Region::kGood, Region::kInverted,
                                                      Region::kPoor, Region::kLoseLose};

inline std::string_view to_string(Region r) {
  switch (r) {
    case Region::kWinWin: return "win-win";
    case Region::kGood: return "good";
    case Region::kInverted: return "inverted";
    case Region::kPoor: return "poor";
    case Region::kLoseLose: return "lose-lose";
  }
  return "?";
}

// No performance change with a bias increase counts as lose-lose.
inline Region classify_region(const TradeoffPoint& tech, const TradeoffPoint& original,
                              const TradeoffBaseline& baseline, bool* clamped = nullptr) {
  if (clamped) *clamped = false;
  const double dp = tech.performance - original.performance;
  const double db = tech.bias - original.bias;
  if (dp >= 0 && db <= 0 && !(dp == 0 && db == 0)) return Region::kWinWin;
  if (dp > 0 && db > 0) return Region::kInverted;
  if (dp <= 0 && db > 0) return Region::kLoseLose;
  return tech.performance > baseline.interpolate(tech.bias, clamped) ? Region::kGood : Region::kPoor;
}

// Exact integral of max(0, perf - baseline(b)) for b from the technique's
// bias to the largest baseline bias.
inline double region2_area(const TradeoffPoint& tech, const TradeoffBaseline& baseline) {
  const auto c = baseline.curve();
  const double lo = tech.bias;
  const double hi = c.back().bias;
  if (!(hi > lo)) return 0.0;
  // Knots of the clamped polyline restricted to [lo, hi].
  std::vector<TradeoffPoint> k;
  k.push_back({lo, TradeoffBaseline::interpolate_curve(c, lo, nullptr)});
  for (const auto& p : c) {
    if (p.bias > lo && p.bias < hi) k.push_back(p);
  }
  k.push_back({hi, c.back().performance});
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < k.size(); ++i) {
    const double w = k[i + 1].bias - k[i].bias;
    if (w <= 0) continue;
    const double g0 = tech.performance - k[i].performance;
    const double g1 = tech.performance - k[i + 1].performance;
    if (g0 >= 0 && g1 >= 0) {
      area += 0.5 * w * (g0 + g1);
    } else if (g0 > 0 || g1 > 0) {
      // Sign change inside the segment: keep the positive triangle.
      const double pos = std::max(g0, g1);
      const double neg = -std::min(g0, g1);
      area += 0.5 * w * pos * pos / (pos + neg);
    }
  }
  return area;
}

struct FbuRun {
  std::uint64_t seed = 1;
  PredictionLog original;
  std::vector<std::pair<std::string, PredictionLog>> techniques;
};

struct FbuOptions {
  std::vector<FairnessMetric> fairness = {FairnessMetric::kCspd, FairnessMetric::kCeod};
  std::vector<PerformanceMetric> performance = {PerformanceMetric::kBalancedAccuracy,
                                                PerformanceMetric::kRecall};
  double lambda = 0.5;
  // Unset: the original log's majority prediction.
  std::optional<Label> constant;
};

struct FbuCase {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::string technique;
  FairnessMetric fairness = FairnessMetric::kCspd;
  PerformanceMetric performance = PerformanceMetric::kBalancedAccuracy;
  TradeoffPoint point;
  TradeoffPoint original;
  Region region = Region::kPoor;
  bool clamped = false;
  std::optional<double> area;
};

struct FbuBaselineRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  FairnessMetric fairness = FairnessMetric::kCspd;
  PerformanceMetric performance = PerformanceMetric::kBalancedAccuracy;
  Label constant = Label::kUnfavorable;
  TradeoffBaseline baseline;
};

struct TechniqueSummary {
  std::string name;
  std::array<std::size_t, 5> counts{};
  std::array<double, 5> percentages{};
  std::size_t cases = 0;
  std::vector<double> region2_areas;
  double mean_region2_area() const {
    if (region2_areas.empty()) return 0.0;
    return std::accumulate(region2_areas.begin(), region2_areas.end(), 0.0) /
           static_cast<double>(region2_areas.size());
  }
};

struct FbuReport {
  double lambda = 0.5;
  std::vector<FbuBaselineRecord> baselines;
  std::vector<FbuCase> cases;
  std::vector<TechniqueSummary> techniques;
  std::size_t clamped_cases = 0;
};

inline FbuReport fbu_report(const std::vector<FbuRun>& runs, const FbuOptions& opt) {
  if (runs.empty()) throw ParameterError("fbu needs at least one run");
  if (opt.fairness.empty() || opt.performance.empty()) throw ParameterError("fbu needs metrics");
  FbuReport rep;
  rep.lambda = opt.lambda;
  for (const auto& [name, log] : runs.front().techniques) {
    TechniqueSummary t;
    t.name = name;
    rep.techniques.push_back(t);
  }
  if (rep.techniques.empty()) throw ParameterError("fbu needs at least one technique");
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    if (run.original.empty()) throw ParameterError("prediction log is empty");
    if (run.techniques.size() != rep.techniques.size()) {
      throw ProtocolError("run " + std::to_string(r) + " lists a different technique set");
    }
    for (std::size_t t = 0; t < run.techniques.size(); ++t) {
      if (run.techniques[t].first != rep.techniques[t].name) {
        throw ProtocolError("run " + std::to_string(r) + " lists a different technique set");
      }
      if (run.techniques[t].second.size() != run.original.size()) {
        throw ProtocolError("log length mismatch for technique '" + run.techniques[t].first + "' in run " +
                            std::to_string(r) + ": " + std::to_string(run.techniques[t].second.size()) +
                            " vs " + std::to_string(run.original.size()));
      }
    }
    const Label constant = opt.constant.value_or(majority_prediction(run.original));
    for (const auto fm : opt.fairness) {
      for (const auto pm : opt.performance) {
        FbuBaselineRecord rec{r, run.seed, fm, pm, constant,
                              build_baseline(run.original, fm, pm, opt.lambda, constant, run.seed)};
        const TradeoffPoint orig = rec.baseline.points.front();
        for (std::size_t t = 0; t < run.techniques.size(); ++t) {
          FbuCase c;
          c.run = r;
          c.seed = run.seed;
          c.technique = run.techniques[t].first;
          c.fairness = fm;
          c.performance = pm;
          c.point = evaluate_point(run.techniques[t].second, fm, pm, opt.lambda);
          c.original = orig;
          c.region = classify_region(c.point, orig, rec.baseline, &c.clamped);
          if (c.region == Region::kGood) c.area = region2_area(c.point, rec.baseline);
          auto& s = rep.techniques[t];
          ++s.counts[static_cast<std::size_t>(c.region) - 1];
          ++s.cases;
          if (c.area) s.region2_areas.push_back(*c.area);
          if (c.clamped) ++rep.clamped_cases;
          rep.cases.push_back(std::move(c));
        }
        rep.baselines.push_back(std::move(rec));
      }
    }
  }
  for (auto& s : rep.techniques) {
    for (std::size_t i = 0; i < 5; ++i) {
      s.percentages[i] = 100.0 * static_cast<double>(s.counts[i]) / static_cast<double>(s.cases);
    }
  }
  return rep;
}

// seq,sensitive,truth,prediction with sensitive 1/0 and labels 1/-1.
inline void write_prediction_log(std::ostream& os, const PredictionLog& log) {
  os << "seq,sensitive,truth,prediction\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    os << i << ',' << (is_privileged(log[i].sensitive) ? 1 : 0) << ',' << to_int(log[i].truth) << ','
       << to_int(log[i].prediction) << '\n';
  }
}

inline PredictionLog read_prediction_log(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("prediction log is empty");
  const auto header = split_csv_line(line);
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cs = col("sensitive"), ct = col("truth"), cp = col("prediction");
  PredictionLog log;
  std::size_t lineno = 1;
  const auto label = [&](const std::string& v) {
    if (v == "1") return Label::kFavorable;
    if (v == "-1" || v == "0") return Label::kUnfavorable;
    throw RowError(lineno, "invalid label '" + v + "'");
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw RowError(lineno, "expected " + std::to_string(header.size()) + " fields");
    LogEntry e;
    const std::string s = trim(f[cs]);
    if (s == "1") e.sensitive = Group::kPrivileged;
    else if (s == "0") e.sensitive = Group::kUnprivileged;
    else throw RowError(lineno, "invalid sensitive value '" + s + "'");
    e.truth = label(trim(f[ct]));
    e.prediction = label(trim(f[cp]));
    log.push_back(e);
  }
  if (log.empty()) throw SchemaError("prediction log has no rows");
  return log;
}

}  // namespace fs2
