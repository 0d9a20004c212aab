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


#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fs2/fbu.hpp"
#include "oracles.hpp"

namespace fs2 {
namespace {

constexpr Label F = Label::kFavorable;
constexpr Label U = Label::kUnfavorable;
constexpr Group P = Group::kPrivileged;
constexpr Group N = Group::kUnprivileged;

PredictionLog random_log(std::size_t n, std::uint64_t seed, double priv_bias = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  PredictionLog log;
  for (std::size_t i = 0; i < n; ++i) {
    LogEntry e;
    e.sensitive = u(rng) < 0.5 ? P : N;
    e.truth = u(rng) < 0.4 ? F : U;
    const double p_fav = (is_favorable(e.truth) ? 0.7 : 0.2) + (is_privileged(e.sensitive) ? priv_bias : -priv_bias);
    e.prediction = u(rng) < p_fav ? F : U;
    log.push_back(e);
  }
  return log;
}

// Groups alternate and each pair shares truth, so group label rates match
// after every pair.
PredictionLog parity_log(std::size_t pairs, Label constant_prediction = U, bool perfect = true) {
  PredictionLog log;
  for (std::size_t i = 0; i < pairs; ++i) {
    const Label y = i % 2 ? U : F;
    for (const Group g : {P, N}) log.push_back({g, y, perfect ? y : constant_prediction});
  }
  return log;
}

TradeoffBaseline line(double b0, double p0, double b1, double p1) {
  TradeoffBaseline base;
  for (int i = 0; i <= 10; ++i) {
    const double t = i / 10.0;
    base.points.push_back({b0 + t * (b1 - b0), p0 + t * (p1 - p0)});
  }
  return base;
}

TEST(PseudoModels, CountsAndNesting) {
  PredictionLog log(10, LogEntry{P, U, U});
  const auto models = build_pseudo_models(log, F, 3);
  ASSERT_EQ(models.size(), 10u);
  for (std::size_t k = 0; k < 10; ++k) {
    const auto fav = std::count_if(models[k].begin(), models[k].end(), [](auto& e) { return is_favorable(e.prediction); });
    EXPECT_EQ(static_cast<std::size_t>(fav), k + 1);
    if (k > 0) {
      for (std::size_t i = 0; i < 10; ++i) {
        if (is_favorable(models[k - 1][i].prediction)) EXPECT_TRUE(is_favorable(models[k][i].prediction));
      }
    }
  }
  EXPECT_THROW(build_pseudo_models({}, F, 1), ParameterError);
}

TEST(PseudoModels, FlooredCounts) {
  PredictionLog log(37, LogEntry{N, F, U});
  const auto models = build_pseudo_models(log, F, 1);
  for (std::size_t k = 1; k <= 10; ++k) {
    const auto fav = std::count_if(models[k - 1].begin(), models[k - 1].end(),
                                   [](auto& e) { return is_favorable(e.prediction); });
    EXPECT_EQ(static_cast<std::size_t>(fav), k * 37 / 10);
  }
}

TEST(PseudoModels, FullReplacementHasExactlyZeroBias) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto log = random_log(300, seed);
    for (const Label c : {F, U}) {
      const auto models = build_pseudo_models(log, c, seed);
      for (const double lambda : {0.0, 0.5, 0.99, 1.0}) {
        EXPECT_EQ(evaluate_point(models.back(), FairnessMetric::kCspd, PerformanceMetric::kBalancedAccuracy, lambda).bias, 0.0);
        EXPECT_EQ(evaluate_point(models.back(), FairnessMetric::kCeod, PerformanceMetric::kRecall, lambda).bias, 0.0);
      }
    }
  }
}

TEST(PseudoModels, MajorityPredictionTiesGoUnfavorable) {
  EXPECT_EQ(majority_prediction({{P, F, F}, {N, F, U}}), U);
  EXPECT_EQ(majority_prediction({{P, F, F}, {N, F, F}, {N, F, U}}), F);
}

TEST(EvaluatePoint, PerfectParityLog) {
  const auto p = evaluate_point(parity_log(50), FairnessMetric::kCspd, PerformanceMetric::kBalancedAccuracy, 0.0);
  EXPECT_EQ(p.bias, 0.0);
  EXPECT_EQ(p.performance, 1.0);
}

TEST(EvaluatePoint, ConstantLogOnBalancedLabels) {
  for (const Label c : {F, U}) {
    const auto log = parity_log(50, c, false);
    const auto p = evaluate_point(log, FairnessMetric::kCspd, PerformanceMetric::kBalancedAccuracy, 0.5);
    EXPECT_EQ(p.bias, 0.0);
    EXPECT_DOUBLE_EQ(p.performance, 0.5);
  }
}

TEST(EvaluatePoint, HandBuiltLogMatchesRecount) {
  const auto log = random_log(20, 42);
  const double lambda = 0.3;
  // Recount: cumulative rates from scratch, recursion from the first step
  // where both groups are present.
  double m = 0.0;
  for (std::size_t t = 0; t < log.size(); ++t) {
    double fav[2] = {0, 0}, tot[2] = {0, 0};
    for (std::size_t i = 0; i <= t; ++i) {
      const int g = is_privileged(log[i].sensitive) ? 0 : 1;
      tot[g] += 1;
      fav[g] += is_favorable(log[i].prediction);
    }
    if (tot[0] == 0 || tot[1] == 0) continue;
    m = (1 - lambda) * (fav[0] / tot[0] - fav[1] / tot[1]) + lambda * m;
  }
  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (const auto& e : log) {
    if (is_favorable(e.truth)) (is_favorable(e.prediction) ? tp : fn) += 1;
    else (is_favorable(e.prediction) ? fp : tn) += 1;
  }
  const auto p = evaluate_point(log, FairnessMetric::kCspd, PerformanceMetric::kBalancedAccuracy, lambda);
  EXPECT_NEAR(p.bias, std::abs(m), 1e-12);
  EXPECT_NEAR(p.performance, 0.5 * (tp / (tp + fn) + tn / (tn + fp)), 1e-12);
}

TEST(EvaluatePoint, UndefinedMetrics) {
  const PredictionLog one_group = {{P, F, F}, {P, U, U}};
  EXPECT_THROW(evaluate_point(one_group, FairnessMetric::kCspd, PerformanceMetric::kBalancedAccuracy, 0.5),
               UndefinedMetricError);
  const PredictionLog one_class = {{P, F, F}, {N, F, U}};
  EXPECT_THROW(evaluate_point(one_class, FairnessMetric::kCspd, PerformanceMetric::kBalancedAccuracy, 0.5),
               UndefinedMetricError);
  EXPECT_NO_THROW(evaluate_point(one_class, FairnessMetric::kCspd, PerformanceMetric::kRecall, 0.5));
}

TEST(Regions, OriginalPointIsPoor) {
  const auto base = line(0.2, 0.8, 0.0, 0.5);
  EXPECT_EQ(classify_region(base.points[0], base.points[0], base), Region::kPoor);
}

TEST(Regions, QuadrantCases) {
  const auto base = line(0.2, 0.8, 0.0, 0.5);
  const TradeoffPoint o = base.points[0];
  EXPECT_EQ(classify_region({0.15, 0.82}, o, base), Region::kWinWin);
  EXPECT_EQ(classify_region({0.25, 0.82}, o, base), Region::kInverted);
  EXPECT_EQ(classify_region({0.25, 0.70}, o, base), Region::kLoseLose);
  EXPECT_EQ(classify_region({0.25, 0.80}, o, base), Region::kLoseLose);
  EXPECT_EQ(classify_region({0.20, 0.85}, o, base), Region::kWinWin);
  EXPECT_EQ(classify_region({0.10, 0.80}, o, base), Region::kWinWin);
}

TEST(Regions, TradeoffQuadrantUsesInterpolation) {
  const auto base = line(0.2, 0.8, 0.0, 0.5);
  const TradeoffPoint o = base.points[0];
  EXPECT_NEAR(base.interpolate(0.1), 0.65, 1e-12);
  EXPECT_EQ(classify_region({0.1, 0.75}, o, base), Region::kGood);
  EXPECT_EQ(classify_region({0.1, 0.65}, o, base), Region::kPoor);
  EXPECT_EQ(classify_region({0.1, 0.60}, o, base), Region::kPoor);
}

TEST(Regions, ClampOutsideSpan) {
  TradeoffBaseline base = line(0.2, 0.8, 0.05, 0.5);
  bool clamped = false;
  EXPECT_EQ(base.interpolate(0.01, &clamped), 0.5);
  EXPECT_TRUE(clamped);
  EXPECT_EQ(classify_region({0.0, 0.6}, base.points[0], base, &clamped), Region::kGood);
  EXPECT_TRUE(clamped);
}

TEST(Regions, EqualBiasesAveraged) {
  TradeoffBaseline base;
  base.points = {{0.2, 0.8}, {0.1, 0.6}, {0.1, 0.7}, {0.0, 0.5}};
  EXPECT_NEAR(base.interpolate(0.1), 0.65, 1e-12);
}

TEST(Regions, MatchesOracleOnRandomConfigurations) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 2000; ++t) {
    TradeoffBaseline base;
    for (int i = 0; i < 11; ++i) base.points.push_back({0.3 * u(rng), 0.5 + 0.5 * u(rng)});
    base.points.back().bias = 0.0;
    const TradeoffPoint tech{0.35 * u(rng), 0.4 + 0.6 * u(rng)};
    EXPECT_EQ(classify_region(tech, base.points[0], base), oracle::region_of(tech, base.points[0], base));
  }
}

TEST(Area, GeometryExamples) {
  const auto flat = line(0.0, 0.5, 0.2, 0.5);
  EXPECT_NEAR(region2_area({0.1, 0.7}, flat), 0.02, 1e-12);
  const auto rising = line(0.0, 0.5, 0.2, 0.8);
  EXPECT_NEAR(region2_area({0.0, 0.8}, rising), 0.03, 1e-12);
  EXPECT_NEAR(oracle::numeric_area({0.0, 0.8}, rising), 0.03, 1e-6);
  const auto falling = line(0.2, 0.8, 0.0, 0.5);
  EXPECT_EQ(region2_area({0.1, 0.65}, falling), 0.0);
  EXPECT_EQ(region2_area({0.2, 0.8}, falling), 0.0);
}

TEST(Area, MatchesNumericIntegration) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    TradeoffBaseline base;
    for (int i = 0; i < 11; ++i) base.points.push_back({0.3 * u(rng), 0.5 + 0.5 * u(rng)});
    const TradeoffPoint tech{0.3 * u(rng), 0.5 + 0.5 * u(rng)};
    EXPECT_NEAR(region2_area(tech, base), oracle::numeric_area(tech, base), 1e-6);
  }
}

TEST(Area, Monotone) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    TradeoffBaseline base;
    for (int i = 0; i < 11; ++i) base.points.push_back({0.3 * u(rng), 0.5 + 0.5 * u(rng)});
    const TradeoffPoint tech{0.3 * u(rng), 0.5 + 0.5 * u(rng)};
    const double a = region2_area(tech, base);
    EXPECT_GE(region2_area({tech.bias, tech.performance + 0.01}, base), a - 1e-15);
    EXPECT_GE(region2_area({tech.bias * 0.9, tech.performance}, base), a - 1e-15);
  }
}

FbuRun make_run(std::uint64_t seed, const std::vector<std::pair<std::string, PredictionLog>>& techs) {
  FbuRun r;
  r.seed = seed;
  r.original = random_log(400, seed);
  r.techniques = techs;
  return r;
}

TEST(Report, CaseCountFormula) {
  const auto r = fbu_report({make_run(1, {{"a", random_log(400, 9, 0.1)}})}, FbuOptions{});
  ASSERT_EQ(r.techniques.size(), 1u);
  EXPECT_EQ(r.techniques[0].cases, 4u);
  EXPECT_EQ(r.cases.size(), 4u);
  EXPECT_EQ(r.baselines.size(), 4u);
  for (const auto& b : r.baselines) {
    ASSERT_EQ(b.baseline.points.size(), 11u);
    EXPECT_EQ(b.baseline.points.back().bias, 0.0);
  }
  double sum = 0;
  for (double p : r.techniques[0].percentages) sum += p;
  EXPECT_NEAR(sum, 100.0, 0.01);
}

TEST(Report, AllWinWin) {
  FbuRun r;
  r.seed = 1;
  const auto perfect = parity_log(100);
  r.original = perfect;
  for (std::size_t i = 0; i < r.original.size(); ++i) {
    r.original[i].prediction = is_privileged(r.original[i].sensitive) ? F : U;
  }
  r.techniques = {{"perfect", perfect}};
  FbuOptions opt;
  opt.lambda = 0.0;
  const auto rep = fbu_report({r}, opt);
  EXPECT_EQ(rep.techniques[0].counts[0], 4u);
  EXPECT_DOUBLE_EQ(rep.techniques[0].percentages[0], 100.0);
}

TEST(Report, DuplicateTechniqueGetsIdenticalRegions) {
  const auto log = random_log(400, 11, 0.15);
  const auto rep = fbu_report({make_run(2, {{"x", log}, {"x", log}})}, FbuOptions{});
  EXPECT_EQ(rep.techniques[0].counts, rep.techniques[1].counts);
}

TEST(Report, GoodCasesCarryAreas) {
  std::size_t good = 0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const auto rep = fbu_report({make_run(s, {{"t", random_log(400, 100 + s, 0.05)}})}, FbuOptions{});
    for (const auto& c : rep.cases) {
      EXPECT_EQ(c.area.has_value(), c.region == Region::kGood);
      if (c.area) {
        ++good;
        EXPECT_GE(*c.area, 0.0);
      }
    }
  }
  SUCCEED() << good << " good cases";
}

TEST(Report, MismatchedLengthsAreProtocolErrors) {
  EXPECT_THROW(fbu_report({make_run(1, {{"short", random_log(399, 2)}})}, FbuOptions{}), ProtocolError);
  auto a = make_run(1, {{"t", random_log(400, 3)}});
  auto b = make_run(2, {{"u", random_log(400, 4)}});
  EXPECT_THROW(fbu_report({a, b}, FbuOptions{}), ProtocolError);
}

TEST(Report, Deterministic) {
  const auto run = [] {
    return fbu_report({make_run(3, {{"t", random_log(400, 5, 0.1)}}), make_run(4, {{"t", random_log(400, 6, 0.1)}})},
                      FbuOptions{});
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.cases.size(), b.cases.size());
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    EXPECT_EQ(a.cases[i].region, b.cases[i].region);
    EXPECT_EQ(a.cases[i].point.bias, b.cases[i].point.bias);
  }
}

TEST(PredictionLogCsv, RoundTrip) {
  const auto log = random_log(50, 8);
  std::stringstream ss;
  write_prediction_log(ss, log);
  const auto back = read_prediction_log(ss);
  ASSERT_EQ(back.size(), log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(back[i].sensitive, log[i].sensitive);
    EXPECT_EQ(back[i].truth, log[i].truth);
    EXPECT_EQ(back[i].prediction, log[i].prediction);
  }
}

TEST(PredictionLogCsv, Errors) {
  std::stringstream missing("seq,sensitive,truth\n0,1,1\n");
  EXPECT_THROW(read_prediction_log(missing), SchemaError);
  std::stringstream bad("seq,sensitive,truth,prediction\n0,1,1,1\n1,2,1,1\n");
  try {
    read_prediction_log(bad);
    FAIL();
  } catch (const RowError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

}  // namespace
}  // namespace fs2
