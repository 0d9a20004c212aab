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

#include "fs2/pipeline.hpp"
#include "fs2/stream.hpp"

namespace fs2 {
namespace {

SubgroupCounters counts(std::uint64_t pf, std::uint64_t pu, std::uint64_t uf, std::uint64_t uu) {
  SubgroupCounters c;
  c.observed = {pf, pu, uf, uu};
  return c;
}

TEST(BalR, HandCases) {
  EXPECT_DOUBLE_EQ(compute_balR(counts(20, 35, 10, 35)), 0.3);
  EXPECT_DOUBLE_EQ(compute_balR(counts(25, 25, 25, 25)), 0.5);
  auto c = counts(20, 35, 10, 35);
  c.synthesized[index_of(Subgroup::kUnprivilegedFavorable)] = 40;
  EXPECT_DOUBLE_EQ(compute_balR(c), 0.5);
}

TEST(FairR, HandCases) {
  EXPECT_DOUBLE_EQ(compute_fairR(counts(5, 5, 5, 5)), 1.0);
  EXPECT_NEAR(compute_fairR(counts(6, 4, 2, 8)), 0.6, 1e-12);
  EXPECT_EQ(compute_fairR(counts(6, 4, 0, 0)), 0.0);
}

TEST(Deficit, FairnessOnlyTargetsUnprivilegedFavorable) {
  const auto c = counts(30, 20, 10, 40);
  ASSERT_GE(compute_balR(c), 0.4);
  const auto d = select_deficit_subgroup(c, 0.4, 0.9, 1000);
  EXPECT_EQ(d.target, Subgroup::kUnprivilegedFavorable);
  EXPECT_GT(d.n_num, 0u);
  EXPECT_FALSE(d.whole_class);
}

TEST(Deficit, BothViolatedFavorableMinority) {
  const auto c = counts(20, 30, 5, 45);
  ASSERT_LT(compute_balR(c), 0.4);
  ASSERT_LT(compute_fairR(c), 0.9);
  const auto d = select_deficit_subgroup(c, 0.4, 0.9, 1000);
  EXPECT_EQ(d.target, Subgroup::kUnprivilegedFavorable);
  EXPECT_TRUE(d.closes_all);
  auto after = c;
  after.synthesized[index_of(d.target)] += d.n_num;
  EXPECT_GE(compute_balR(after), 0.4);
  EXPECT_GE(compute_fairR(after), 0.9);
}

TEST(Deficit, EqualizingRatesNeedsTwenty) {
  const auto c = counts(30, 20, 10, 20);
  const auto d = select_deficit_subgroup(c, 0.4, 1.0, 1000);
  EXPECT_EQ(d.target, Subgroup::kUnprivilegedFavorable);
  EXPECT_EQ(d.n_num, 20u);
  auto after = c;
  after.synthesized[index_of(d.target)] += d.n_num;
  EXPECT_DOUBLE_EQ(group_rates(after, Group::kPrivileged).rate(), 0.6);
  EXPECT_DOUBLE_EQ(group_rates(after, Group::kUnprivileged).rate(), 0.6);
}

TEST(Deficit, SmallestCountThatCloses) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    auto c = counts(1 + rng() % 60, 1 + rng() % 60, 1 + rng() % 60, 1 + rng() % 60);
    const auto d = select_deficit_subgroup(c, 0.4, 0.9, 100000);
    if (d.n_num == 0 || !d.closes_all) continue;
    auto after = c;
    after.synthesized[index_of(d.target)] += d.n_num;
    EXPECT_GE(compute_balR(after), 0.4);
    EXPECT_GE(compute_fairR(after), 0.9);
    auto less = c;
    less.synthesized[index_of(d.target)] += d.n_num - 1;
    EXPECT_FALSE(compute_balR(less) >= 0.4 && compute_fairR(less) >= 0.9);
  }
}

TEST(Deficit, ClassOnlyIgnoresFairness) {
  const auto c = counts(30, 20, 10, 40);
  const auto d = select_deficit_subgroup(c, 0.4, 0.9, 1000, false);
  EXPECT_EQ(d.n_num, 0u);
  const auto e = select_deficit_subgroup(counts(20, 40, 5, 35), 0.4, 0.9, 1000, false);
  EXPECT_TRUE(e.whole_class);
  EXPECT_EQ(e.target_class, Label::kFavorable);
}

TEST(FS2Config, Validation) {
  FS2Config c;
  EXPECT_NO_THROW(c.validate());
  c.p1 = 0.6;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.f1 = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.lambda = 2;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.min_size = 1;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Technique, Names) {
  EXPECT_EQ(parse_technique("class-only"), Technique::kClassOnly);
  EXPECT_EQ(to_string(parse_technique("class-only-rebalance")), "class-only-rebalance");
  EXPECT_THROW(parse_technique("smote"), UsageError);
}

std::unique_ptr<OnlineLearner> tree() { return std::make_unique<HoeffdingTree>(); }

Instance cell(std::uint64_t seq, Subgroup g, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double shift = is_favorable(label_of(g)) ? 1.0 : -1.0;
  return Instance{{shift + n(rng), n(rng), n(rng)}, group_of(g), label_of(g), seq};
}

TEST(Pipeline, BalancedFairStreamNeverSynthesizes) {
  FS2Config cfg;
  cfg.p1 = 0.5;
  cfg.f1 = 1.0;
  cfg.min_size = 200;
  cfg.max_window = 200;
  Pipeline p(cfg, Technique::kFs2, tree());
  std::mt19937_64 rng(1);
  for (std::uint64_t i = 0; i < 3000; ++i) {
    const auto o = p.step(cell(i, kAllSubgroups[i % 4], rng));
    EXPECT_EQ(o.synthetics, 0u);
  }
  EXPECT_EQ(p.stats().total_synthetics(), 0u);
}

TEST(Pipeline, NoRebalanceBelowMinSize) {
  FS2Config cfg;
  cfg.min_size = 100;
  Pipeline p(cfg, Technique::kFs2, tree());
  std::mt19937_64 rng(2);
  for (std::uint64_t i = 0; i < 99; ++i) {
    const auto o = p.step(cell(i, i % 10 ? Subgroup::kPrivilegedUnfavorable : Subgroup::kUnprivilegedFavorable, rng));
    EXPECT_FALSE(o.rebalance_attempted);
    EXPECT_FALSE(o.balR.has_value());
  }
  EXPECT_EQ(p.stats().total_synthetics(), 0u);
}

StreamConfig biased_stream(std::uint64_t seed, std::uint64_t length) {
  StreamConfig c;
  c.seed = seed;
  c.length = length;
  c.n_features = 5;
  c.favorable_mean = {1, 1, 0.5, 0, 0};
  c.unfavorable_mean = {0, 0, 0, 0, 0};
  c.favorable_std.assign(5, 1.0);
  c.unfavorable_std.assign(5, 1.0);
  // Privileged favorable rate 0.6, unprivileged 0.2, half the population privileged.
  c.imbalance = {{0, 0.4}};
  const auto [f, u] = bias_table(0.4, 0.5, 3.0);
  c.p_privileged_given_favorable = f;
  c.p_privileged_given_unfavorable = u;
  return c;
}

TEST(Pipeline, CompletedRoundsMeetThresholdsAndCountersStayConsistent) {
  FS2Config cfg;
  Pipeline p(cfg, Technique::kFs2, tree());
  SyntheticStream s(biased_stream(5, 4000));
  std::uint64_t completed = 0;
  while (auto d = s.next()) {
    const auto o = p.step(*d);
    const auto rc = recount(p.window());
    ASSERT_EQ(rc, p.counters()) << "seq " << d->seq;
    if (o.rebalance_completed) {
      ++completed;
      EXPECT_GE(compute_balR(rc), 0.4);
      EXPECT_GE(compute_fairR(rc), 0.9);
    }
  }
  EXPECT_GT(completed, 0u);
  EXPECT_GT(p.stats().synthesized[index_of(Subgroup::kUnprivilegedFavorable)], 0u);
}

TEST(Pipeline, NoRebalanceBaselineNeverSynthesizes) {
  Pipeline p(FS2Config{}, Technique::kNoRebalance, tree());
  SyntheticStream s(biased_stream(6, 2000));
  while (auto d = s.next()) p.step(*d);
  EXPECT_EQ(p.stats().total_synthetics(), 0u);
}

TEST(Pipeline, ClassOnlyBalancesClassesOnly) {
  Pipeline p(FS2Config{}, Technique::kClassOnly, tree());
  auto cfg = biased_stream(7, 3000);
  cfg.imbalance = {{0, 0.2}};
  SyntheticStream s(cfg);
  while (auto d = s.next()) {
    const auto o = p.step(*d);
    if (o.rebalance_completed) EXPECT_GE(compute_balR(recount(p.window())), 0.4);
  }
  EXPECT_GT(p.stats().total_synthetics(), 0u);
  EXPECT_EQ(p.stats().synthesized[index_of(Subgroup::kPrivilegedUnfavorable)], 0u);
  EXPECT_EQ(p.stats().synthesized[index_of(Subgroup::kUnprivilegedUnfavorable)], 0u);
}

TEST(Pipeline, WindowCapHolds) {
  FS2Config cfg;
  cfg.max_window = 300;
  Pipeline p(cfg, Technique::kFs2, tree());
  SyntheticStream s(biased_stream(8, 1500));
  while (auto d = s.next()) {
    p.step(*d);
    ASSERT_LE(p.window().size(), 300u);
  }
}

TEST(Pipeline, DeterministicGivenSeed) {
  const auto run = [] {
    Pipeline p(FS2Config{}, Technique::kFs2, tree());
    SyntheticStream s(biased_stream(9, 1500));
    std::vector<int> preds;
    while (auto d = s.next()) preds.push_back(to_int(p.step(*d).prediction));
    return std::make_pair(preds, p.stats().total_synthetics());
  };
  EXPECT_EQ(run(), run());
}

TEST(Pipeline, DriftShrinksWindow) {
  auto cfg = biased_stream(10, 6000);
  DriftPoint d;
  d.seq = 3000;
  d.favorable_mean = {-3, -3, -3, 0, 0};
  d.unfavorable_mean = {3, 3, 3, 0, 0};
  cfg.drift = {d};
  FS2Config fc;
  fc.max_window = 0;
  Pipeline p(fc, Technique::kFs2, tree());
  SyntheticStream s(cfg);
  bool changed_after = false;
  while (auto x = s.next()) {
    const auto o = p.step(*x);
    for (const auto& e : o.drift_events) {
      if (e.level == DriftLevel::kChange && x->seq >= 3000) {
        changed_after = true;
        EXPECT_LE(o.window_length, e.window_len_after);
      }
    }
    ASSERT_EQ(recount(p.window()), p.counters());
  }
  EXPECT_TRUE(changed_after);
}

TEST(Pipeline, RejectsBadInstances) {
  Pipeline p(FS2Config{}, Technique::kFs2, tree());
  EXPECT_THROW(p.step(Instance{{}, Group::kPrivileged, Label::kFavorable, 0}), ValueError);
  EXPECT_THROW(Pipeline(FS2Config{}, Technique::kFs2, nullptr), ParameterError);
}

}  // namespace
}  // namespace fs2
