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
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "fs2/core.hpp"
#include "fs2/learners.hpp"

namespace fs2 {

using Point = std::vector<double>;

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

// Running z-score over every feature vector it has seen.
class Standardizer {
 public:
  void observe(std::span<const double> x) {
    if (moments_.size() != x.size()) moments_.resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) moments_[j].add(x[j]);
  }
  Point transform(std::span<const double> x) const {
    Point z(x.begin(), x.end());
    for (std::size_t j = 0; j < z.size() && j < moments_.size(); ++j) {
      const double sd = std::sqrt(moments_[j].variance());
      z[j] = sd > 1e-9 ? (z[j] - moments_[j].mean) / sd : 0.0;
    }
    return z;
  }

 private:
  std::vector<RunningMoments> moments_;
};

// Condensed symmetric distance matrix.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(const std::vector<Point>& pts) : n_(pts.size()), d_(n_ * (n_ ? n_ - 1 : 0) / 2) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) d_[index(i, j)] = euclidean(pts[i], pts[j]);
    }
  }
  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    return i < j ? d_[index(i, j)] : d_[index(j, i)];
  }
  std::size_t size() const { return n_; }

 private:
  std::size_t index(std::size_t i, std::size_t j) const { return i * n_ - i * (i + 1) / 2 + (j - i - 1); }
  std::size_t n_;
  std::vector<double> d_;
};

struct Clustering {
  std::size_t k = 1;
  std::vector<std::size_t> assignment;
  std::vector<Point> centroids;
  double mean_silhouette = 0.0;
  // All samples identical: a single cluster, no silhouette filtering.
  bool degenerate = false;
};

struct KMeansParams {
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;
};

// Lloyd iterations from a k-means++ seeding. Nearest-centroid ties go to the
// lower cluster id.
inline Clustering kmeans(const std::vector<Point>& pts, std::size_t k, std::uint64_t seed, KMeansParams p = {}) {
  const std::size_t n = pts.size();
  if (k == 0 || n < k) throw InsufficientDataError("k-means needs at least k samples");
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + k);
  Clustering c;
  c.k = k;
  c.centroids.reserve(k);
  c.centroids.push_back(pts[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (c.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(pts[i], c.centroids.back()));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= d2[pick];
        if (u < 0.0) break;
      }
    }
    c.centroids.push_back(pts[pick]);
  }

  c.assignment.assign(n, 0);
  const std::size_t dim = pts[0].size();
  for (std::size_t iter = 0; iter < p.max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < k; ++m) {
        const double d = squared_distance(pts[i], c.centroids[m]);
        if (d < best) {
          best = d;
          c.assignment[i] = m;
        }
      }
    }
    std::vector<Point> next(k, Point(dim, 0.0));
    std::vector<std::size_t> size(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++size[c.assignment[i]];
      for (std::size_t j = 0; j < dim; ++j) next[c.assignment[i]][j] += pts[i][j];
    }
    for (std::size_t m = 0; m < k; ++m) {
      if (size[m] == 0) {
        // Re-seed an empty cluster at the sample farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = squared_distance(pts[i], c.centroids[c.assignment[i]]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        next[m] = pts[far];
        continue;
      }
      for (double& v : next[m]) v /= static_cast<double>(size[m]);
    }
    double shift = 0.0;
    for (std::size_t m = 0; m < k; ++m) shift = std::max(shift, euclidean(next[m], c.centroids[m]));
    c.centroids = std::move(next);
    if (shift <= p.tolerance) break;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < k; ++m) {
      const double d = squared_distance(pts[i], c.centroids[m]);
      if (d < best) {
        best = d;
        c.assignment[i] = m;
      }
    }
  }
  return c;
}

struct SilhouetteReport {
  std::vector<double> scores;
  // Indices kept after dropping the lowest-scoring fraction, ascending.
  std::vector<std::size_t> retained;
};

inline constexpr double kSilhouetteDropFraction = 0.20;

inline std::vector<double> silhouette_scores(const DistanceMatrix& dist, const Clustering& c) {
  if (c.k < 2) throw ParameterError("silhouette undefined for fewer than two clusters");
  const std::size_t n = dist.size();
  std::vector<std::size_t> size(c.k, 0);
  for (auto a : c.assignment) ++size[a];
  for (auto s : size) {
    if (s == 0) throw ParameterError("silhouette undefined with an empty cluster");
  }
  std::vector<double> scores(n, 0.0);
  std::vector<double> sum(c.k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = c.assignment[i];
    if (size[own] == 1) continue;  // singleton clusters score 0
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sum[c.assignment[j]] += dist(i, j);
    }
    const double a = sum[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < c.k; ++m) {
      if (m != own) b = std::min(b, sum[m] / static_cast<double>(size[m]));
    }
    const double denom = std::max(a, b);
    scores[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return scores;
}

// Drops floor(fraction * n) lowest scores; among equal scores the lower
// index goes first.
inline std::vector<std::size_t> retain_after_filter(const std::vector<double>& scores,
                                                    double fraction = kSilhouetteDropFraction) {
  const std::size_t n = scores.size();
  const auto drop = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(drop), order.end());
  std::sort(kept.begin(), kept.end());
  return kept;
}

inline SilhouetteReport silhouette(const std::vector<Point>& pts, const Clustering& c) {
  SilhouetteReport r;
  r.scores = silhouette_scores(DistanceMatrix(pts), c);
  r.retained = retain_after_filter(r.scores);
  return r;
}

inline std::size_t default_k_max(std::size_t n) { return std::min<std::size_t>(8, n / 10); }

namespace detail {

inline std::size_t distinct_points(const std::vector<Point>& pts, std::size_t cap) {
  std::vector<const Point*> seen;
  for (const auto& p : pts) {
    if (std::none_of(seen.begin(), seen.end(), [&](const Point* q) { return *q == p; })) {
      seen.push_back(&p);
      if (seen.size() >= cap) break;
    }
  }
  return seen.size();
}

}  // namespace detail

struct ClusterResult {
  Clustering clustering;
  SilhouetteReport report;
};

// Runs k-means for every k in [k_min, k_max], keeps the k with the highest
// mean silhouette (smaller k on ties), then filters its lowest silhouettes.
inline ClusterResult cluster_and_filter(const std::vector<Point>& pts, std::size_t k_min, std::size_t k_max,
                                        std::uint64_t seed, KMeansParams p = {}) {
  const std::size_t n = pts.size();
  if (k_min < 1) throw ParameterError("k_min must be positive");
  if (n < 2 * k_min) throw InsufficientDataError("clustering needs at least 2*k_min samples");
  k_max = std::max(k_max, k_min);
  ClusterResult out;
  const std::size_t distinct = detail::distinct_points(pts, k_max + 1);
  if (distinct <= 1 || k_max < 2) {
    out.clustering.k = 1;
    out.clustering.assignment.assign(n, 0);
    Point centroid(pts[0].size(), 0.0);
    for (const auto& x : pts) {
      for (std::size_t j = 0; j < x.size(); ++j) centroid[j] += x[j] / static_cast<double>(n);
    }
    out.clustering.centroids = {centroid};
    out.clustering.degenerate = distinct <= 1;
    out.report.scores.assign(n, 0.0);
    out.report.retained.resize(n);
    std::iota(out.report.retained.begin(), out.report.retained.end(), 0);
    return out;
  }

  const DistanceMatrix dist(pts);
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t k = std::max<std::size_t>(k_min, 2); k <= k_max; ++k) {
    if (k > distinct) break;
    Clustering c = kmeans(pts, k, seed, p);
    std::vector<std::size_t> size(k, 0);
    for (auto a : c.assignment) ++size[a];
    if (std::count(size.begin(), size.end(), 0u) > 0) continue;
    auto scores = silhouette_scores(dist, c);
    c.mean_silhouette = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(n);
    if (c.mean_silhouette > best_mean) {
      best_mean = c.mean_silhouette;
      out.clustering = std::move(c);
      out.report.scores = std::move(scores);
    }
  }
  if (out.clustering.assignment.empty()) {
    throw InsufficientDataError("no admissible clustering in the requested k range");
  }
  out.report.retained = retain_after_filter(out.report.scores);
  return out;
}

inline Clustering cluster(const std::vector<Point>& pts, std::size_t k_min, std::size_t k_max,
                          std::uint64_t seed) {
  return cluster_and_filter(pts, k_min, k_max, seed).clustering;
}

struct ClusterWeights {
  std::vector<std::uint64_t> minority_count;  // N_i
  std::uint64_t minority_total = 0;           // N_Total
  std::vector<double> weight;                 // W_i = N_i / N_Total
  std::vector<std::uint64_t> quota;           // G_i, sums to N_num
};

// Largest-remainder apportionment of `total` proportional to `parts`; equal
// remainders favour the lower index.
inline std::vector<std::uint64_t> apportion(const std::vector<std::uint64_t>& parts, std::uint64_t total) {
  const std::uint64_t denom = std::accumulate(parts.begin(), parts.end(), std::uint64_t{0});
  std::vector<std::uint64_t> out(parts.size(), 0);
  if (denom == 0) return out;
  std::vector<std::uint64_t> rem(parts.size(), 0);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const unsigned __int128 num = static_cast<unsigned __int128>(total) * parts[i];
    out[i] = static_cast<std::uint64_t>(num / denom);
    rem[i] = static_cast<std::uint64_t>(num % denom);
    assigned += out[i];
  }
  std::vector<std::size_t> order(parts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[order[i]];
  return out;
}

// `cluster_of[i]` is the cluster of retained sample i; `minority[i]` marks
// the samples of the class or subgroup being synthesized.
inline ClusterWeights cluster_weights(std::span<const std::size_t> cluster_of, const std::vector<bool>& minority,
                                      std::size_t k, std::uint64_t n_num) {
  if (cluster_of.size() != minority.size()) throw ParameterError("cluster and minority sizes differ");
  ClusterWeights w;
  w.minority_count.assign(k, 0);
  for (std::size_t i = 0; i < cluster_of.size(); ++i) {
    if (cluster_of[i] >= k) throw ParameterError("cluster id out of range");
    if (minority[i]) ++w.minority_count[cluster_of[i]];
  }
  w.minority_total = std::accumulate(w.minority_count.begin(), w.minority_count.end(), std::uint64_t{0});
  if (w.minority_total == 0) throw CannotSynthesizeError("no retained minority samples");
  w.weight.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    w.weight[i] = static_cast<double>(w.minority_count[i]) / static_cast<double>(w.minority_total);
  }
  w.quota = apportion(w.minority_count, n_num);
  return w;
}

// a + gap (b - a), clamped per coordinate to the segment.
inline Point interpolate(const Point& a, const Point& b, double gap) {
  if (a.size() != b.size()) throw DimensionError("interpolation endpoints differ in dimension");
  Point out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    out[j] = std::clamp(a[j] + gap * (b[j] - a[j]), std::min(a[j], b[j]), std::max(a[j], b[j]));
  }
  return out;
}

// One synthesis candidate: a retained window sample with its raw features
// (interpolated) and standardized features (used for neighbour search).
struct Candidate {
  std::uint64_t key = 0;  // window seq
  std::size_t cluster = 0;
  Point raw;
  Point z;
  Group sensitive = Group::kPrivileged;
  Label label = Label::kUnfavorable;
};

struct Synthetic {
  Instance instance;
  std::uint64_t template_key = 0;
  std::uint64_t neighbor_key = 0;
  double gap = 0.0;
};

struct FairGenerateParams {
  std::size_t k_neighbors = 5;
  // seq stamped on every synthetic instance.
  std::uint64_t seq = 0;
};

// Within-cluster SMOTE. For each cluster, quota[i] templates are drawn from
// its minority candidates, each template used at most once per phase unless
// the quota exceeds the available samples; each synthetic lies on the
// segment between the template and one of its k nearest same-cluster
// minority neighbours. `used` carries the one-time ledger across calls.
inline std::vector<Synthetic> fair_generate(std::span<const Candidate> pool, const std::vector<bool>& minority,
                                            const ClusterWeights& quota, FairGenerateParams p,
                                            std::set<std::uint64_t>& used, std::mt19937_64& rng) {
  const std::size_t k = quota.quota.size();
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (minority[i] && pool[i].cluster < k) members[pool[i].cluster].push_back(i);
  }

  std::vector<std::uint64_t> target = quota.quota;
  std::uint64_t orphaned = 0;
  std::vector<std::uint64_t> available(k, 0);
  for (std::size_t c = 0; c < k; ++c) {
    if (members[c].empty()) {
      orphaned += target[c];
      target[c] = 0;
    } else {
      available[c] = members[c].size();
    }
  }
  if (orphaned > 0) {
    if (std::all_of(available.begin(), available.end(), [](auto v) { return v == 0; })) {
      throw CannotSynthesizeError("quota assigned but no cluster holds minority samples");
    }
    const auto extra = apportion(available, orphaned);
    for (std::size_t c = 0; c < k; ++c) target[c] += extra[c];
  }

  std::vector<Synthetic> out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (target[c] == 0) continue;
    const auto& m = members[c];
    std::vector<std::size_t> fresh;
    for (auto i : m) {
      if (!used.count(pool[i].key)) fresh.push_back(i);
    }
    std::shuffle(fresh.begin(), fresh.end(), rng);
    std::vector<std::size_t> templates;
    for (std::size_t t = 0; t < fresh.size() && templates.size() < target[c]; ++t) templates.push_back(fresh[t]);
    // Demand beyond supply: cycle through the cluster again in fresh random orders.
    while (templates.size() < target[c]) {
      std::vector<std::size_t> again = m;
      std::shuffle(again.begin(), again.end(), rng);
      for (std::size_t t = 0; t < again.size() && templates.size() < target[c]; ++t) templates.push_back(again[t]);
    }

    for (auto ti : templates) {
      const Candidate& tpl = pool[ti];
      used.insert(tpl.key);
      std::vector<std::pair<double, std::size_t>> near;
      near.reserve(m.size());
      for (auto j : m) {
        if (j != ti) near.emplace_back(squared_distance(tpl.z, pool[j].z), j);
      }
      const std::size_t kk = std::min(p.k_neighbors, near.size());
      std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(kk), near.end());
      std::size_t ni = ti;
      if (kk > 0) ni = near[std::uniform_int_distribution<std::size_t>(0, kk - 1)(rng)].second;
      const Candidate& nb = pool[ni];
      const double gap = unit(rng);

      Synthetic s;
      s.template_key = tpl.key;
      s.neighbor_key = nb.key;
      s.gap = gap;
      s.instance.sensitive = tpl.sensitive;
      s.instance.label = tpl.label;
      s.instance.seq = p.seq;
      s.instance.features = interpolate(tpl.raw, nb.raw, gap);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace fs2
