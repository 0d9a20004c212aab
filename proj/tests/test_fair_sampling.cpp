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
#include <set>

#include "fs2/fair_sampling.hpp"
#include "oracles.hpp"

namespace fs2 {
namespace {

std::vector<Point> blobs(std::size_t per, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < per; ++i) pts.push_back({g(rng), g(rng)});
  for (std::size_t i = 0; i < per; ++i) pts.push_back({10 + g(rng), 10 + g(rng)});
  return pts;
}

TEST(Clustering, TwoBlobsPickTwo) {
  const auto pts = blobs(20, 1);
  const auto r = cluster_and_filter(pts, 2, 4, 7);
  EXPECT_EQ(r.clustering.k, 2u);
  for (std::size_t i = 1; i < 20; ++i) EXPECT_EQ(r.clustering.assignment[i], r.clustering.assignment[0]);
  for (std::size_t i = 21; i < 40; ++i) EXPECT_EQ(r.clustering.assignment[i], r.clustering.assignment[20]);
  EXPECT_NE(r.clustering.assignment[0], r.clustering.assignment[20]);
}

TEST(Clustering, ChosenKHasBestMeanSilhouette) {
  const auto pts = blobs(15, 2);
  const auto r = cluster_and_filter(pts, 2, 5, 3);
  const DistanceMatrix d(pts);
  for (std::size_t k = 2; k <= 5; ++k) {
    const auto c = kmeans(pts, k, 3);
    const auto s = silhouette_scores(d, c);
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    EXPECT_LE(mean, r.clustering.mean_silhouette + 1e-12);
  }
}

TEST(Clustering, IdenticalSamplesDegenerate) {
  const std::vector<Point> pts(12, Point{1.0, 1.0});
  const auto r = cluster_and_filter(pts, 2, 4, 1);
  EXPECT_EQ(r.clustering.k, 1u);
  EXPECT_TRUE(r.clustering.degenerate);
  EXPECT_EQ(r.report.retained.size(), 12u);
}

TEST(Clustering, FourSamplesTwoClusters) {
  const std::vector<Point> pts = {{0.0}, {0.1}, {5.0}, {5.1}};
  const auto r = cluster_and_filter(pts, 2, 2, 1);
  EXPECT_EQ(r.clustering.k, 2u);
  ASSERT_EQ(r.clustering.assignment.size(), 4u);
  for (auto a : r.clustering.assignment) EXPECT_LT(a, 2u);
}

TEST(Clustering, TooFewSamples) {
  const std::vector<Point> pts = {{0.0}, {1.0}, {2.0}};
  EXPECT_THROW(cluster_and_filter(pts, 2, 2, 1), InsufficientDataError);
}

TEST(Silhouette, Formula) {
  const std::vector<Point> pts = {{0.0}, {1.0}, {3.0}};
  Clustering c;
  c.k = 2;
  c.assignment = {0, 0, 1};
  const auto s = silhouette_scores(DistanceMatrix(pts), c);
  EXPECT_NEAR(s[0], 2.0 / 3.0, 1e-12);
  EXPECT_EQ(s[2], 0.0);
}

TEST(Silhouette, EquidistantScoresZero) {
  const std::vector<Point> pts = {{0.0}, {1.0}, {-1.0}};
  Clustering c;
  c.k = 2;
  c.assignment = {0, 0, 1};
  EXPECT_EQ(silhouette_scores(DistanceMatrix(pts), c)[0], 0.0);
}

TEST(Silhouette, FilterDropsFloorOfFifthLowestFirst) {
  const std::vector<double> s = {0.5, 0.1, 0.9, 0.1, 0.3, 0.8, 0.7, 0.6, 0.4, 0.2};
  const auto kept = retain_after_filter(s);
  EXPECT_EQ(kept.size(), 8u);
  EXPECT_EQ(std::count(kept.begin(), kept.end(), 1u), 0);
  EXPECT_EQ(std::count(kept.begin(), kept.end(), 3u), 0);
  // Ties at the cut go to the lower index.
  const auto tie = retain_after_filter({0.2, 0.2, 0.2, 0.2, 0.2});
  EXPECT_EQ(tie, (std::vector<std::size_t>{1, 2, 3, 4}));
  for (std::size_t n = 1; n < 60; ++n) {
    EXPECT_EQ(retain_after_filter(std::vector<double>(n, 0.0)).size(), n - n / 5);
  }
}

TEST(ClusterWeights, ExactDivision) {
  const std::vector<std::size_t> cl = {0, 0, 0, 0, 0, 0, 1, 1, 1, 2};
  const auto w = cluster_weights(cl, std::vector<bool>(10, true), 3, 10);
  EXPECT_EQ(w.weight, (std::vector<double>{0.6, 0.3, 0.1}));
  EXPECT_EQ(w.quota, (std::vector<std::uint64_t>{6, 3, 1}));
}

TEST(ClusterWeights, LargestRemainderTieGoesLow) {
  const std::vector<std::size_t> cl = {0, 1};
  const auto w = cluster_weights(cl, {true, true}, 2, 3);
  EXPECT_EQ(w.weight, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(w.quota, (std::vector<std::uint64_t>{2, 1}));
}

TEST(ClusterWeights, SingleClusterAndNonMinority) {
  const std::vector<std::size_t> cl = {0, 0, 1, 1};
  const auto w = cluster_weights(cl, {true, true, false, false}, 2, 7);
  EXPECT_EQ(w.weight, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(w.quota, (std::vector<std::uint64_t>{7, 0}));
  EXPECT_THROW(cluster_weights(cl, std::vector<bool>(4, false), 2, 3), CannotSynthesizeError);
}

TEST(Apportion, AlwaysSumsToTotal) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 2000; ++t) {
    std::vector<std::uint64_t> parts(1 + rng() % 8);
    for (auto& p : parts) p = rng() % 50;
    if (std::all_of(parts.begin(), parts.end(), [](auto p) { return p == 0; })) parts[0] = 1;
    const std::uint64_t total = rng() % 500;
    const auto q = apportion(parts, total);
    EXPECT_EQ(std::accumulate(q.begin(), q.end(), std::uint64_t{0}), total);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (parts[i] == 0) EXPECT_EQ(q[i], 0u);
    }
  }
}

TEST(Interpolate, ConvexCombination) {
  EXPECT_EQ(interpolate({0.0, 0.0}, {2.0, 4.0}, 0.5), (Point{1.0, 2.0}));
  EXPECT_EQ(interpolate({1.0}, {3.0}, 0.0), (Point{1.0}));
  EXPECT_EQ(interpolate({1.0}, {3.0}, 1.0), (Point{3.0}));
}

std::vector<Candidate> pool_of(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Candidate> pool(n);
  for (std::size_t i = 0; i < n; ++i) {
    pool[i].key = 100 + i;
    pool[i].cluster = i % k;
    pool[i].raw = {g(rng) + 5.0 * static_cast<double>(i % k), g(rng)};
    pool[i].z = pool[i].raw;
    pool[i].sensitive = Group::kUnprivileged;
    pool[i].label = Label::kFavorable;
  }
  return pool;
}

TEST(FairGenerate, OneTimeWhenSupplySuffices) {
  const auto pool = pool_of(3, 1, 1);
  ClusterWeights w;
  w.quota = {3};
  std::set<std::uint64_t> used;
  std::mt19937_64 rng(1);
  const auto out = fair_generate(pool, {true, true, true}, w, {}, used, rng);
  ASSERT_EQ(out.size(), 3u);
  std::multiset<std::uint64_t> templates;
  for (const auto& s : out) templates.insert(s.template_key);
  for (std::uint64_t key = 100; key < 103; ++key) EXPECT_EQ(templates.count(key), 1u);
}

TEST(FairGenerate, ReuseStaysOnSegments) {
  const auto pool = pool_of(2, 1, 2);
  ClusterWeights w;
  w.quota = {5};
  std::set<std::uint64_t> used;
  std::mt19937_64 rng(2);
  const std::vector<bool> minority = {true, true};
  const auto out = fair_generate(pool, minority, w, {}, used, rng);
  ASSERT_EQ(out.size(), 5u);
  for (const auto& s : out) EXPECT_TRUE(oracle::on_any_segment(s.instance.features, pool, minority, 0));
}

TEST(FairGenerate, SegmentOracleAcrossClusters) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto pool = pool_of(40, 3, seed);
    std::vector<bool> minority(40);
    for (std::size_t i = 0; i < 40; ++i) minority[i] = i % 4 != 0;
    std::vector<std::size_t> cl(40);
    for (std::size_t i = 0; i < 40; ++i) cl[i] = pool[i].cluster;
    const auto w = cluster_weights(cl, minority, 3, 25);
    std::set<std::uint64_t> used;
    std::mt19937_64 rng(seed);
    const auto out = fair_generate(pool, minority, w, {}, used, rng);
    ASSERT_EQ(out.size(), 25u);
    for (const auto& s : out) {
      const auto t = std::find_if(pool.begin(), pool.end(), [&](const auto& c) { return c.key == s.template_key; });
      const auto n = std::find_if(pool.begin(), pool.end(), [&](const auto& c) { return c.key == s.neighbor_key; });
      ASSERT_NE(t, pool.end());
      ASSERT_NE(n, pool.end());
      EXPECT_EQ(t->cluster, n->cluster);
      EXPECT_TRUE(minority[static_cast<std::size_t>(t - pool.begin())]);
      EXPECT_TRUE(minority[static_cast<std::size_t>(n - pool.begin())]);
      EXPECT_TRUE(oracle::on_any_segment(s.instance.features, pool, minority, t->cluster));
      EXPECT_EQ(s.instance.label, Label::kFavorable);
    }
  }
}

TEST(FairGenerate, LedgerPersistsAcrossCalls) {
  const auto pool = pool_of(4, 1, 3);
  ClusterWeights w;
  w.quota = {2};
  std::set<std::uint64_t> used;
  std::mt19937_64 rng(3);
  const std::vector<bool> minority(4, true);
  const auto a = fair_generate(pool, minority, w, {}, used, rng);
  const auto b = fair_generate(pool, minority, w, {}, used, rng);
  std::set<std::uint64_t> keys;
  for (const auto& s : a) keys.insert(s.template_key);
  for (const auto& s : b) keys.insert(s.template_key);
  EXPECT_EQ(keys.size(), 4u);
}

TEST(FairGenerate, OrphanedQuotaMovesToPopulatedClusters) {
  const auto pool = pool_of(6, 2, 4);
  ClusterWeights w;
  w.quota = {3, 3};
  std::vector<bool> minority = {true, false, true, false, true, false};
  std::set<std::uint64_t> used;
  std::mt19937_64 rng(4);
  const auto out = fair_generate(pool, minority, w, {}, used, rng);
  EXPECT_EQ(out.size(), 6u);
  for (const auto& s : out) EXPECT_EQ((s.template_key - 100) % 2, 0u);
}

TEST(Standardizer, ZeroSpreadMapsToZero) {
  Standardizer s;
  for (int i = 0; i < 10; ++i) s.observe(std::vector<double>{1.0, static_cast<double>(i)});
  const auto z = s.transform(std::vector<double>{1.0, 4.5});
  EXPECT_EQ(z[0], 0.0);
  EXPECT_NEAR(z[1], 0.0, 1e-12);
}

}  // namespace
}  // namespace fs2
