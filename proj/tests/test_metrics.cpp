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

#include "fs2/metrics.hpp"

namespace fs2 {
namespace {

TEST(ImbalanceRatio, HandCases) {
  EXPECT_DOUBLE_EQ(imbalance_ratio(3, 7), 0.3);
  EXPECT_DOUBLE_EQ(imbalance_ratio(5, 5), 0.5);
  EXPECT_DOUBLE_EQ(imbalance_ratio(0, 10), 0.0);
  EXPECT_THROW(imbalance_ratio(0, 0), UndefinedMetricError);
}

TEST(Decay, OneStep) {
  EXPECT_DOUBLE_EQ(decayed(0.1, 0.2, 0.5), 0.15);
  EXPECT_DOUBLE_EQ(decayed(0.05, 0.9, 1.0), 0.05);
  EXPECT_DOUBLE_EQ(decayed(0.3, 0.2, 0.0), 0.2);
}

TEST(Cspd, NoDecayIsCurrentGap) {
  FairnessAccumulator f(0.0);
  for (int i = 0; i < 5; ++i) f.update_cspd(Group::kPrivileged, i < 4);
  FairnessValue v;
  for (int i = 0; i < 5; ++i) v = f.update_cspd(Group::kUnprivileged, i < 3);
  EXPECT_NEAR(v.value, 0.2, 1e-12);
  EXPECT_FALSE(v.warmup);
}

TEST(Cspd, HandSequence) {
  FairnessAccumulator f(0.5);
  auto v = f.update_cspd(Group::kPrivileged, true);
  EXPECT_DOUBLE_EQ(v.value, 0.5);
  EXPECT_TRUE(v.warmup);
  v = f.update_cspd(Group::kUnprivileged, false);
  EXPECT_DOUBLE_EQ(v.value, 0.75);
  EXPECT_FALSE(v.warmup);
  v = f.update_cspd(Group::kUnprivileged, true);
  EXPECT_DOUBLE_EQ(v.value, 0.625);
}

TEST(Cspd, EqualRatesStayZero) {
  for (double lambda : {0.0, 0.3, 0.9, 1.0}) {
    FairnessAccumulator f(lambda);
    EXPECT_EQ(f.update_cspd(Group::kPrivileged, false).value, 0.0);
    EXPECT_EQ(f.update_cspd(Group::kUnprivileged, false).value, 0.0);
  }
}

TEST(Ceod, NoDecayIsTprGap) {
  FairnessAccumulator f(0.0);
  for (int i = 0; i < 10; ++i) f.update_ceod(Group::kPrivileged, true, i < 9);
  FairnessValue v;
  for (int i = 0; i < 10; ++i) v = f.update_ceod(Group::kUnprivileged, true, i < 7);
  EXPECT_NEAR(v.value, 0.2, 1e-12);
}

TEST(Ceod, PerfectPredictionsGiveZero) {
  FairnessAccumulator f(0.5);
  FairnessValue v;
  for (int i = 0; i < 10; ++i) {
    v = f.update_ceod(i % 2 ? Group::kPrivileged : Group::kUnprivileged, true, true);
  }
  // Only the first call saw a single group.
  EXPECT_NEAR(v.value, -std::pow(0.5, 10), 1e-15);
}

TEST(Ceod, UnfavorableTruthAdvancesRecursionOnly) {
  FairnessAccumulator f(0.5);
  f.update_ceod(Group::kPrivileged, true, true);
  f.update_ceod(Group::kUnprivileged, true, false);
  const double before = f.ceod();
  const auto v = f.update_ceod(Group::kUnprivileged, false, true);
  EXPECT_EQ(f.positives(Group::kUnprivileged), 1u);
  EXPECT_DOUBLE_EQ(v.value, decayed(before, 1.0, 0.5));
}

TEST(Ceod, WarmupUntilBothGroupsHavePositives) {
  FairnessAccumulator f(0.5);
  EXPECT_TRUE(f.update_ceod(Group::kPrivileged, true, true).warmup);
  EXPECT_TRUE(f.update_ceod(Group::kUnprivileged, false, true).warmup);
  EXPECT_FALSE(f.update_ceod(Group::kUnprivileged, true, true).warmup);
}

TEST(Ceod, FullDecayKeepsHistory) {
  FairnessAccumulator f(1.0);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(f.update_ceod(Group::kPrivileged, true, false).value, 0.0);
  }
}

TEST(Accumulator, RejectsLambdaOutsideUnitInterval) {
  EXPECT_THROW(FairnessAccumulator(-0.1), ParameterError);
  EXPECT_THROW(FairnessAccumulator(1.1), ParameterError);
}

TEST(Confusion, BalancedAccuracyAndRecall) {
  ConfusionAccumulator c;
  c.tp = 8;
  c.fn = 2;
  c.tn = 6;
  c.fp = 4;
  EXPECT_DOUBLE_EQ(balanced_accuracy(c), 0.7);
  c = {};
  c.tp = 4;
  c.fn = 1;
  EXPECT_DOUBLE_EQ(recall(c), 0.8);
  c.fn = 0;
  EXPECT_DOUBLE_EQ(recall(c), 1.0);
  c.tp = 0;
  c.fn = 3;
  EXPECT_DOUBLE_EQ(recall(c), 0.0);
}

TEST(Confusion, DegenerateClassifiers) {
  ConfusionAccumulator perfect, constant;
  for (int i = 0; i < 10; ++i) {
    const Label y = i % 3 ? Label::kFavorable : Label::kUnfavorable;
    perfect.add(y, y);
    constant.add(y, Label::kFavorable);
  }
  EXPECT_DOUBLE_EQ(balanced_accuracy(perfect), 1.0);
  EXPECT_DOUBLE_EQ(balanced_accuracy(constant), 0.5);
}

TEST(Confusion, UndefinedMetrics) {
  ConfusionAccumulator c;
  EXPECT_THROW(recall(c), UndefinedMetricError);
  c.add(Label::kFavorable, Label::kFavorable);
  EXPECT_THROW(balanced_accuracy(c), UndefinedMetricError);
  EXPECT_NO_THROW(recall(c));
}

// Incremental values against a replay that recomputes cumulative rates
// from scratch at every step.
TEST(Property, IncrementalMatchesReplay) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const double lambda = std::uniform_real_distribution<double>(0, 1)(rng);
    const int n = 1 + static_cast<int>(rng() % 100);
    std::vector<std::array<bool, 3>> rows;
    FairnessAccumulator f(lambda);
    double cspd = 0, ceod = 0;
    for (int t = 0; t < n; ++t) {
      rows.push_back({rng() % 2 == 0, rng() % 3 == 0, rng() % 2 == 0});
      const auto& r = rows.back();
      const Group g = r[0] ? Group::kPrivileged : Group::kUnprivileged;
      const auto a = f.update_cspd(g, r[2]);
      const auto b = f.update_ceod(g, r[1], r[2]);
      double fav[2] = {0, 0}, tot[2] = {0, 0}, tp[2] = {0, 0}, pos[2] = {0, 0};
      for (const auto& q : rows) {
        const int s = q[0] ? 0 : 1;
        tot[s] += 1;
        fav[s] += q[2];
        if (q[1]) {
          pos[s] += 1;
          tp[s] += q[2];
        }
      }
      const auto rate = [](double x, double y) { return y == 0 ? 0.0 : x / y; };
      cspd = (1 - lambda) * (rate(fav[0], tot[0]) - rate(fav[1], tot[1])) + lambda * cspd;
      ceod = (1 - lambda) * (rate(tp[0], pos[0]) - rate(tp[1], pos[1])) + lambda * ceod;
      EXPECT_NEAR(a.value, cspd, 1e-12);
      EXPECT_NEAR(b.value, ceod, 1e-12);
    }
  }
}

}  // namespace
}  // namespace fs2
