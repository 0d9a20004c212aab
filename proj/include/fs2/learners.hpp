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
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fs2/core.hpp"

namespace fs2 {

struct Prediction {
  Label label = Label::kUnfavorable;
  // Set when the learner has not been trained yet and returned the default.
  bool cold_start = false;
};

class OnlineLearner {
 public:
  virtual ~OnlineLearner() = default;
  virtual Prediction predict(std::span<const double> x) const = 0;
  virtual void train(std::span<const double> x, Label y) = 0;
  virtual std::unique_ptr<OnlineLearner> clone() const = 0;
  virtual std::string name() const = 0;
};

// Welford running moments plus observed range for one feature.
struct RunningMoments {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
    min = std::min(min, x);
    max = std::max(max, x);
  }
  // Population variance (divides by n).
  double variance() const { return n == 0 ? 0.0 : m2 / static_cast<double>(n); }
};

inline constexpr double kVarianceFloor = 1e-9;

inline double log_gaussian(double x, double mean, double variance) {
  const double v = std::max(variance, kVarianceFloor);
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * v) - d * d / (2.0 * v);
}

inline std::size_t class_slot(Label y) { return is_favorable(y) ? 0 : 1; }
inline Label slot_class(std::size_t i) { return i == 0 ? Label::kFavorable : Label::kUnfavorable; }

// Per-class feature moments shared by the naive Bayes learner and the
// Hoeffding tree leaves.
struct ClassConditionalStats {
  std::array<std::uint64_t, 2> count{};
  std::array<std::vector<RunningMoments>, 2> features;

  void add(std::span<const double> x, Label y) {
    const auto c = class_slot(y);
    if (features[c].size() != x.size()) features[c].resize(x.size());
    ++count[c];
    for (std::size_t j = 0; j < x.size(); ++j) features[c][j].add(x[j]);
  }

  std::uint64_t total() const { return count[0] + count[1]; }

  // Gaussian naive Bayes argmax. Ties and unseen classes resolve to
  // unfavorable.
  Label naive_bayes(std::span<const double> x, const std::array<double, 2>& prior) const {
    std::array<double, 2> score{};
    for (std::size_t c = 0; c < 2; ++c) {
      if (prior[c] <= 0.0) {
        score[c] = -std::numeric_limits<double>::infinity();
        continue;
      }
      score[c] = std::log(prior[c]);
      for (std::size_t j = 0; j < x.size() && j < features[c].size(); ++j) {
        score[c] += log_gaussian(x[j], features[c][j].mean, features[c][j].variance());
      }
    }
    return score[0] > score[1] ? Label::kFavorable : Label::kUnfavorable;
  }
};

class GaussianNaiveBayes final : public OnlineLearner {
 public:
  Prediction predict(std::span<const double> x) const override {
    if (stats_.total() == 0) return {Label::kUnfavorable, true};
    check_dim(x);
    const double n = static_cast<double>(stats_.total());
    return {stats_.naive_bayes(x, {stats_.count[0] / n, stats_.count[1] / n}), false};
  }

  void train(std::span<const double> x, Label y) override {
    if (dim_ == 0) dim_ = x.size();
    check_dim(x);
    stats_.add(x, y);
  }

  std::unique_ptr<OnlineLearner> clone() const override {
    return std::make_unique<GaussianNaiveBayes>(*this);
  }
  std::string name() const override { return "naive-bayes"; }

  std::uint64_t class_count(Label y) const { return stats_.count[class_slot(y)]; }
  const RunningMoments& moments(Label y, std::size_t feature) const {
    return stats_.features[class_slot(y)].at(feature);
  }

 private:
  void check_dim(std::span<const double> x) const {
    if (x.size() != dim_) {
      throw DimensionError("expected " + std::to_string(dim_) + " features, got " + std::to_string(x.size()));
    }
  }

  ClassConditionalStats stats_;
  std::size_t dim_ = 0;
};

struct HoeffdingTreeParams {
  std::uint64_t grace_period = 200;
  double split_confidence = 1e-7;
  double tie_threshold = 0.05;
  // Candidate thresholds evaluated per numeric feature.
  std::size_t split_candidates = 10;
};

inline double binary_entropy(double a, double b) {
  const double n = a + b;
  if (n <= 0.0) return 0.0;
  double h = 0.0;
  for (double v : {a, b}) {
    if (v > 0.0) h -= (v / n) * std::log2(v / n);
  }
  return h;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Hoeffding tree over numeric features. Split candidates come from a
// per-class Gaussian approximation of each feature at the leaf. Leaves
// predict with whichever of majority class or naive Bayes has been more
// accurate on the instances they have seen.
class HoeffdingTree final : public OnlineLearner {
 public:
  struct Node {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    // Leaf state.
    std::array<double, 2> prior{};  // class mass inherited from the parent split
    ClassConditionalStats stats;
    std::uint64_t seen_at_last_eval = 0;
    std::uint64_t majority_correct = 0;
    std::uint64_t bayes_correct = 0;
  };

  explicit HoeffdingTree(HoeffdingTreeParams p = {}) : p_(p) {
    if (p_.grace_period == 0) throw ParameterError("grace period must be positive");
    if (!(p_.split_confidence > 0.0 && p_.split_confidence < 1.0)) {
      throw ParameterError("split confidence must lie in (0,1)");
    }
    if (p_.split_candidates == 0) throw ParameterError("split_candidates must be positive");
    nodes_.emplace_back();
  }

  Prediction predict(std::span<const double> x) const override {
    if (trained_ == 0) return {Label::kUnfavorable, true};
    check_dim(x);
    return {leaf_predict(nodes_[route(x)], x), false};
  }

  void train(std::span<const double> x, Label y) override {
    if (dim_ == 0) dim_ = x.size();
    check_dim(x);
    ++trained_;
    const std::size_t id = route(x);
    {
      Node& leaf = nodes_[id];
      if (leaf.stats.total() > 0) {
        if (majority(leaf) == y) ++leaf.majority_correct;
        if (bayes(leaf, x) == y) ++leaf.bayes_correct;
      }
      leaf.stats.add(x, y);
    }
    Node& leaf = nodes_[id];
    if (leaf.stats.total() - leaf.seen_at_last_eval >= p_.grace_period) {
      leaf.seen_at_last_eval = leaf.stats.total();
      try_split(id);
    }
  }

  std::unique_ptr<OnlineLearner> clone() const override { return std::make_unique<HoeffdingTree>(*this); }
  std::string name() const override { return "hoeffding-tree"; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t split_count() const { return (nodes_.size() - 1) / 2; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const HoeffdingTreeParams& params() const { return p_; }

  std::size_t route(std::span<const double> x) const {
    std::size_t id = 0;
    while (!nodes_[id].leaf) {
      const Node& n = nodes_[id];
      id = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return id;
  }

  // Hoeffding bound for a gain range of one bit.
  double hoeffding_bound(double n) const {
    return std::sqrt(std::log(1.0 / p_.split_confidence) / (2.0 * n));
  }

 private:
  struct Candidate {
    double gain = 0.0;
    double threshold = 0.0;
    std::array<double, 2> left{};
    std::array<double, 2> right{};
  };

  void check_dim(std::span<const double> x) const {
    if (x.size() != dim_) {
      throw DimensionError("expected " + std::to_string(dim_) + " features, got " + std::to_string(x.size()));
    }
  }

  static Label majority(const Node& n) {
    const double fav = n.prior[0] + static_cast<double>(n.stats.count[0]);
    const double unf = n.prior[1] + static_cast<double>(n.stats.count[1]);
    return fav > unf ? Label::kFavorable : Label::kUnfavorable;
  }

  static Label bayes(const Node& n, std::span<const double> x) {
    const double total = static_cast<double>(n.stats.total());
    if (total == 0.0) return majority(n);
    return n.stats.naive_bayes(x, {n.stats.count[0] / total, n.stats.count[1] / total});
  }

  static Label leaf_predict(const Node& n, std::span<const double> x) {
    if (n.stats.count[0] == 0 || n.stats.count[1] == 0) return majority(n);
    return n.bayes_correct > n.majority_correct ? bayes(n, x) : majority(n);
  }

  Candidate best_for_feature(const Node& leaf, std::size_t j) const {
    Candidate best;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < 2; ++c) {
      if (leaf.stats.count[c] == 0) continue;
      lo = std::min(lo, leaf.stats.features[c][j].min);
      hi = std::max(hi, leaf.stats.features[c][j].max);
    }
    if (!(hi > lo)) return best;
    const double parent = binary_entropy(static_cast<double>(leaf.stats.count[0]),
                                         static_cast<double>(leaf.stats.count[1]));
    const double total = static_cast<double>(leaf.stats.total());
    const double steps = static_cast<double>(p_.split_candidates + 1);
    for (std::size_t i = 1; i <= p_.split_candidates; ++i) {
      const double t = lo + (hi - lo) * static_cast<double>(i) / steps;
      Candidate cand;
      cand.threshold = t;
      for (std::size_t c = 0; c < 2; ++c) {
        const double cnt = static_cast<double>(leaf.stats.count[c]);
        if (cnt == 0.0) continue;
        const RunningMoments& m = leaf.stats.features[c][j];
        const double sd = std::sqrt(m.variance());
        double frac_left;
        if (sd <= 0.0) {
          frac_left = m.mean <= t ? 1.0 : 0.0;
        } else {
          frac_left = normal_cdf((t - m.mean) / sd);
        }
        cand.left[c] = cnt * frac_left;
        cand.right[c] = cnt - cand.left[c];
      }
      const double wl = cand.left[0] + cand.left[1];
      const double wr = cand.right[0] + cand.right[1];
      cand.gain = parent - (wl / total) * binary_entropy(cand.left[0], cand.left[1]) -
                  (wr / total) * binary_entropy(cand.right[0], cand.right[1]);
      if (cand.gain > best.gain) best = cand;
    }
    return best;
  }

  void try_split(std::size_t id) {
    const Node& leaf = nodes_[id];
    if (leaf.stats.count[0] == 0 || leaf.stats.count[1] == 0) return;
    Candidate best;
    std::size_t best_feature = 0;
    double second = 0.0;  // the no-split option has gain 0
    for (std::size_t j = 0; j < dim_; ++j) {
      const Candidate c = best_for_feature(leaf, j);
      if (c.gain > best.gain) {
        second = std::max(second, best.gain);
        best = c;
        best_feature = j;
      } else {
        second = std::max(second, c.gain);
      }
    }
    if (best.gain <= 1e-12) return;
    const double eps = hoeffding_bound(static_cast<double>(leaf.stats.total()));
    if (!(best.gain - second > eps || eps < p_.tie_threshold)) return;

    Node left;
    Node right;
    left.prior = best.left;
    right.prior = best.right;
    const std::size_t li = nodes_.size();
    nodes_.push_back(std::move(left));
    nodes_.push_back(std::move(right));
    Node& parent = nodes_[id];
    parent.leaf = false;
    parent.feature = best_feature;
    parent.threshold = best.threshold;
    parent.left = li;
    parent.right = li + 1;
    parent.stats = {};
  }

  HoeffdingTreeParams p_;
  std::vector<Node> nodes_;
  std::size_t dim_ = 0;
  std::uint64_t trained_ = 0;
};

}  // namespace fs2
