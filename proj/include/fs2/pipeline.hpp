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
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fs2/adwin.hpp"
#include "fs2/core.hpp"
#include "fs2/fair_sampling.hpp"
#include "fs2/learners.hpp"
#include "fs2/metrics.hpp"

namespace fs2 {

enum class Technique { kFs2, kNoRebalance, kClassOnly };

inline std::string_view to_string(Technique t) {
  switch (t) {
    case Technique::kFs2:
      return "fs2";
    case Technique::kNoRebalance:
      return "no-rebalance";
    case Technique::kClassOnly:
      return "class-only-rebalance";
  }
  return "?";
}

inline Technique parse_technique(std::string_view s) {
  if (s == "fs2") return Technique::kFs2;
  if (s == "no-rebalance") return Technique::kNoRebalance;
  if (s == "class-only-rebalance" || s == "class-only") return Technique::kClassOnly;
  throw UsageError("unknown technique '" + std::string(s) + "'");
}

struct SamplerConfig {
  std::size_t k_min = 2;
  std::size_t k_max = 8;
  std::size_t k_neighbors = 5;
  // Clustering runs on at most this many of the most recent window samples.
  std::size_t max_cluster_samples = 1000;
  // Arrivals between re-clusterings; a window shrink always forces one.
  std::uint64_t recluster_interval = 250;
};

struct FS2Config {
  std::uint64_t min_size = 200;
  double p1 = 0.4;
  double f1 = 0.9;
  double lambda = 0.5;
  double delta = 0.002;
  // Upper bound on |W|; 0 leaves the window to the drift detectors alone.
  std::uint64_t max_window = 2000;
  std::size_t max_rounds = 10;
  SamplerConfig sampler;
  std::uint64_t seed = 1;

  void validate() const {
    if (min_size < 2) throw ParameterError("min_size must be >= 2");
    if (!(p1 > 0.0 && p1 <= 0.5)) throw ParameterError("p1 must lie in (0, 0.5]");
    if (!(f1 > 0.0 && f1 <= 1.0)) throw ParameterError("f1 must lie in (0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0, 1]");
    if (!(delta > 0.0 && delta < 0.1)) throw ParameterError("delta must lie in (0, 0.1)");
    if (max_rounds == 0) throw ParameterError("max_rounds must be positive");
    if (sampler.k_min < 1 || sampler.k_max < sampler.k_min) throw ParameterError("invalid cluster k range");
    if (sampler.k_neighbors == 0) throw ParameterError("k_neighbors must be positive");
    if (sampler.max_cluster_samples < 2 * sampler.k_min) {
      throw ParameterError("max_cluster_samples must allow at least 2*k_min samples");
    }
    if (sampler.recluster_interval == 0) throw ParameterError("recluster_interval must be positive");
  }
};

// Imbalance ratio over window plus synthetic counts.
inline double compute_balR(const SubgroupCounters& c) {
  const std::uint64_t fav = c.class_total(Label::kFavorable);
  const std::uint64_t unf = c.class_total(Label::kUnfavorable);
  if (fav + unf == 0) return 0.0;
  return imbalance_ratio(std::min(fav, unf), std::max(fav, unf));
}

struct GroupRates {
  std::uint64_t favorable = 0;
  std::uint64_t total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(favorable) / static_cast<double>(total); }
};

inline GroupRates group_rates(const SubgroupCounters& c, Group g) {
  GroupRates r;
  r.favorable = c.combined(subgroup_of(g, Label::kFavorable));
  r.total = r.favorable + c.combined(subgroup_of(g, Label::kUnfavorable));
  return r;
}

// Data-level parity ratio: 1 - |favorable rate(priv) - favorable rate(unpriv)|.
// A group with no members makes the window maximally unfair (0).
inline double compute_fairR(const SubgroupCounters& c) {
  const GroupRates p = group_rates(c, Group::kPrivileged);
  const GroupRates u = group_rates(c, Group::kUnprivileged);
  if (p.total == 0 || u.total == 0) return 0.0;
  return 1.0 - std::fabs(p.rate() - u.rate());
}

struct DeficitChoice {
  Subgroup target = Subgroup::kUnprivilegedFavorable;
  // Class-only rebalancing draws templates from the whole minority class.
  bool whole_class = false;
  Label target_class = Label::kFavorable;
  std::uint64_t n_num = 0;
  // True when adding n_num to the target satisfies every active constraint.
  bool closes_all = false;
};

namespace detail {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  void intersect(const Interval& o) {
    lo = std::max(lo, o.lo);
    hi = std::min(hi, o.hi);
  }
  static Interval empty() { return {1.0, 0.0}; }
};

// Real N for which adding N instances of `cell` keeps balR >= p1.
inline Interval balance_interval(const SubgroupCounters& c, Subgroup cell, double p1) {
  const Label y = label_of(cell);
  const double x = static_cast<double>(c.class_total(y));
  const double o = static_cast<double>(c.class_total(other(y)));
  const double t = x + o;
  return {(p1 * t - x) / (1.0 - p1), o / p1 - t};
}

// Real N for which adding N instances of `cell` keeps fairR >= f1.
inline Interval fairness_interval(const SubgroupCounters& c, Subgroup cell, double f1) {
  const Group g = group_of(cell);
  const GroupRates h = group_rates(c, other(g));
  if (h.total == 0) return Interval::empty();
  const GroupRates own = group_rates(c, g);
  const double a = static_cast<double>(own.favorable);
  const double b = static_cast<double>(own.total);
  const double gap = 1.0 - f1;
  const double lower = h.rate() - gap;
  const double upper = h.rate() + gap;
  Interval r;
  if (is_favorable(label_of(cell))) {
    // (a + N) / (b + N) within [lower, upper]
    if (lower < 1.0) {
      r.lo = (lower * b - a) / (1.0 - lower);
    } else if (a != b) {
      return Interval::empty();
    }
    if (upper < 1.0) r.hi = (upper * b - a) / (1.0 - upper);
  } else {
    // a / (b + N) within [lower, upper]
    if (lower > 0.0) r.hi = a / lower - b;
    if (upper > 0.0) {
      r.lo = a / upper - b;
    } else if (a != 0.0) {
      return Interval::empty();
    }
  }
  return r;
}

inline SubgroupCounters with_added(SubgroupCounters c, Subgroup cell, std::uint64_t n) {
  c.synthesized[index_of(cell)] += n;
  return c;
}

// Smallest integer N in [1, cap] inside `range` for which `ok` holds, probing
// around the analytic bound to absorb rounding.
inline std::optional<std::uint64_t> smallest_feasible(const Interval& range, std::uint64_t cap,
                                                      const std::function<bool(std::uint64_t)>& ok) {
  if (cap == 0 || !(range.lo <= range.hi + 1.0)) return std::nullopt;
  const double lo = std::max(1.0, std::ceil(range.lo - 1e-9));
  const double hi = std::min(static_cast<double>(cap), std::floor(range.hi + 1e-9) + 1.0);
  if (lo > hi) return std::nullopt;
  auto n = static_cast<std::uint64_t>(lo);
  for (int probe = 0; probe < 3 && n <= cap; ++probe, ++n) {
    if (ok(n)) {
      while (n > 1 && ok(n - 1)) --n;
      return n;
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Picks what to synthesize next and how many. With p1 violated the target is
// the minority class, in the group whose favorable rate moves toward parity;
// with only f1 violated it is whichever of (low-rate group, favorable) or
// (high-rate group, unfavorable) closes the parity gap with fewer samples.
// The count is the smallest one that satisfies both constraints; failing
// that, the one that closes the more violated constraint. Never exceeds cap.
// Zero when nothing is violated.
inline DeficitChoice select_deficit_subgroup(const SubgroupCounters& c, double p1, double f1, std::uint64_t cap,
                                             bool check_fairness = true) {
  using detail::Interval;
  DeficitChoice out;
  if (cap == 0) return out;
  const double bal = compute_balR(c);
  const double fair = compute_fairR(c);
  const bool bal_bad = p1 > bal;
  const bool fair_bad = check_fairness && f1 > fair;
  if (!bal_bad && !fair_bad) {
    out.closes_all = true;
    return out;
  }
  const auto satisfied = [&](const SubgroupCounters& x) {
    return !(p1 > compute_balR(x)) && !(check_fairness && f1 > compute_fairR(x));
  };

  const std::uint64_t fav = c.class_total(Label::kFavorable);
  const std::uint64_t unf = c.class_total(Label::kUnfavorable);
  const Label minority = fav <= unf ? Label::kFavorable : Label::kUnfavorable;

  if (!check_fairness) {
    out.whole_class = true;
    out.target_class = minority;
    out.target = subgroup_of(Group::kPrivileged, minority);
    const Interval r = detail::balance_interval(c, out.target, p1);
    const auto n = detail::smallest_feasible(r, cap, [&](std::uint64_t k) {
      return !(p1 > compute_balR(detail::with_added(c, out.target, k)));
    });
    out.n_num = n.value_or(1);
    out.closes_all = n.has_value();
    return out;
  }

  const GroupRates pr = group_rates(c, Group::kPrivileged);
  const GroupRates ur = group_rates(c, Group::kUnprivileged);
  // Absent groups count as rate 0 so they are the ones that receive favorables.
  const Group low = pr.total == 0 ? Group::kPrivileged
                                  : (ur.total == 0 || ur.rate() <= pr.rate() ? Group::kUnprivileged : Group::kPrivileged);
  const Group high = other(low);

  std::vector<Subgroup> primary;
  if (bal_bad) {
    primary.push_back(is_favorable(minority) ? subgroup_of(low, Label::kFavorable)
                                             : subgroup_of(high, Label::kUnfavorable));
  } else {
    primary.push_back(subgroup_of(low, Label::kFavorable));
    primary.push_back(subgroup_of(high, Label::kUnfavorable));
  }

  const auto both = [&](Subgroup cell) -> std::optional<std::uint64_t> {
    Interval r = detail::balance_interval(c, cell, p1);
    r.intersect(detail::fairness_interval(c, cell, f1));
    return detail::smallest_feasible(r, cap, [&](std::uint64_t k) { return satisfied(detail::with_added(c, cell, k)); });
  };

  std::optional<std::pair<std::uint64_t, Subgroup>> best;
  for (Subgroup cell : primary) {
    if (auto n = both(cell); n && (!best || *n < best->first)) best = {{*n, cell}};
  }
  if (!best) {
    for (Subgroup cell : kAllSubgroups) {
      if (std::find(primary.begin(), primary.end(), cell) != primary.end()) continue;
      if (auto n = both(cell); n && (!best || *n < best->first)) best = {{*n, cell}};
    }
  }
  if (best) {
    out.target = best->second;
    out.n_num = best->first;
    out.closes_all = true;
    return out;
  }

  // Nothing closes both at once: close the larger deficit this round.
  out.target = primary.front();
  const bool balance_first = bal_bad && (!fair_bad || (p1 - bal) >= (f1 - fair));
  const Interval r = balance_first ? detail::balance_interval(c, out.target, p1)
                                   : detail::fairness_interval(c, out.target, f1);
  const auto n = detail::smallest_feasible(r, cap, [&](std::uint64_t k) {
    const SubgroupCounters x = detail::with_added(c, out.target, k);
    return balance_first ? !(p1 > compute_balR(x)) : !(f1 > compute_fairR(x));
  });
  out.n_num = n.value_or(1);
  out.closes_all = false;
  return out;
}

struct DriftEvent {
  std::uint64_t seq = 0;
  std::string detector;  // "error" or "fairness"
  DriftLevel level = DriftLevel::kNone;
  std::uint64_t window_len_before = 0;
  std::uint64_t window_len_after = 0;
};

struct StepOutcome {
  std::uint64_t seq = 0;
  Label prediction = Label::kUnfavorable;
  Label truth = Label::kUnfavorable;
  Group sensitive = Group::kPrivileged;
  bool cold_start = false;
  FairnessValue cspd;
  FairnessValue ceod;
  std::optional<double> balanced_accuracy;
  std::optional<double> recall;
  std::vector<DriftEvent> drift_events;
  std::uint64_t synthetics = 0;
  std::size_t rounds = 0;
  bool rebalance_attempted = false;
  // The synthesis loop exited because both thresholds held.
  bool rebalance_completed = false;
  std::string warning;
  std::optional<double> balR;
  std::optional<double> fairR;
  std::uint64_t window_length = 0;
};

struct PipelineStats {
  std::uint64_t steps = 0;
  std::array<std::uint64_t, 4> arrived{};
  std::array<std::uint64_t, 4> synthesized{};
  std::uint64_t completed_rebalances = 0;
  std::uint64_t aborted_rebalances = 0;
  std::uint64_t capped_rebalances = 0;
  std::uint64_t reclusterings = 0;

  std::uint64_t total_synthetics() const {
    return synthesized[0] + synthesized[1] + synthesized[2] + synthesized[3];
  }
};

// The prequential FS2 loop. One Pipeline owns one learner, one window and
// the two drift detectors; call step() once per arriving instance.
class Pipeline {
 public:
  Pipeline(FS2Config cfg, Technique technique, std::unique_ptr<OnlineLearner> learner)
      : cfg_(std::move(cfg)),
        technique_(technique),
        learner_(std::move(learner)),
        error_detector_(AdwinParams{cfg_.delta}),
        fairness_detector_(AdwinParams{cfg_.delta}),
        fairness_(cfg_.lambda),
        rng_(cfg_.seed) {
    cfg_.validate();
    if (!learner_) throw ParameterError("pipeline needs a learner");
  }

  StepOutcome step(const Instance& d) {
    validate(d);
    StepOutcome out;
    out.seq = d.seq;
    out.truth = d.label;
    out.sensitive = d.sensitive;
    ++stats_.steps;
    ++stats_.arrived[index_of(d.subgroup())];

    // (1) test
    const Prediction pred = learner_->predict(d.features);
    out.prediction = pred.label;
    out.cold_start = pred.cold_start;
    confusion_.add(d.label, pred.label);
    const bool pred_fav = is_favorable(pred.label);
    out.cspd = fairness_.update_cspd(d.sensitive, pred_fav);
    out.ceod = fairness_.update_ceod(d.sensitive, is_favorable(d.label), pred_fav);
    if (confusion_.tp + confusion_.fn > 0) out.recall = recall(confusion_);
    if (confusion_.tp + confusion_.fn > 0 && confusion_.tn + confusion_.fp > 0) {
      out.balanced_accuracy = balanced_accuracy(confusion_);
    }

    // (2) train, (3) window and counters
    learner_->train(d.features, d.label);
    standardizer_.observe(d.features);
    window_.push(d);
    ++counters_.observed[index_of(d.subgroup())];
    if (cfg_.max_window > 0 && window_.size() > cfg_.max_window) drop_oldest(window_.size() - cfg_.max_window);

    // (4) detectors, (5) shrink on change
    const double err = pred.label == d.label ? 0.0 : 1.0;
    const double parity = pred_fav ? (is_privileged(d.sensitive) ? 1.0 : 0.0) : 0.5;
    std::uint64_t keep = window_.size();
    bool changed = false;
    const auto feed = [&](AdaptiveWindow& det, bool& was_warning, double v, const char* name) {
      const DriftSignal s = det.insert(v);
      if (s.level == DriftLevel::kChange) {
        out.drift_events.push_back({d.seq, name, s.level, s.window_len_before, s.window_len_after});
        keep = std::min<std::uint64_t>(keep, s.window_len_after);
        changed = true;
      } else if (s.level == DriftLevel::kWarning && !was_warning) {
        out.drift_events.push_back({d.seq, name, s.level, s.window_len_before, s.window_len_after});
      }
      was_warning = det.in_warning();
    };
    feed(error_detector_, error_warning_, err, "error");
    feed(fairness_detector_, fairness_warning_, parity, "fairness");
    if (changed) {
      if (keep < window_.size()) drop_oldest(window_.size() - keep);
      cache_.valid = false;
    }
    out.window_length = window_.size();

    // (6)-(8) rebalance
    if (technique_ != Technique::kNoRebalance && window_.size() >= cfg_.min_size) rebalance(d.seq, out);
    return out;
  }

  const SlidingWindow& window() const { return window_; }
  const SubgroupCounters& counters() const { return counters_; }
  const FairnessAccumulator& fairness() const { return fairness_; }
  const ConfusionAccumulator& confusion() const { return confusion_; }
  const OnlineLearner& learner() const { return *learner_; }
  const PipelineStats& stats() const { return stats_; }
  const FS2Config& config() const { return cfg_; }
  Technique technique() const { return technique_; }
  const AdaptiveWindow& error_detector() const { return error_detector_; }
  const AdaptiveWindow& fairness_detector() const { return fairness_detector_; }

 private:
  struct SamplerCache {
    bool valid = false;
    std::uint64_t built_at = 0;
    std::size_t k = 1;
    std::vector<Candidate> pool;
  };

  bool fairness_checked() const { return technique_ == Technique::kFs2; }

  bool needs_rebalance(double bal, double fair) const {
    return cfg_.p1 > bal || (fairness_checked() && cfg_.f1 > fair);
  }

  void rebalance(std::uint64_t seq, StepOutcome& out) {
    double bal = compute_balR(counters_);
    double fair = compute_fairR(counters_);
    out.balR = bal;
    out.fairR = fair;
    if (!needs_rebalance(bal, fair)) return;
    out.rebalance_attempted = true;
    std::set<std::uint64_t> used;
    while (needs_rebalance(bal, fair)) {
      if (out.rounds == cfg_.max_rounds) {
        out.warning = "rebalancing stopped after " + std::to_string(cfg_.max_rounds) + " rounds";
        ++stats_.capped_rebalances;
        return;
      }
      const DeficitChoice choice =
          select_deficit_subgroup(counters_, cfg_.p1, cfg_.f1, window_.size(), fairness_checked());
      try {
        out.synthetics += synthesize(choice, seq, used);
      } catch (const CannotSynthesizeError& e) {
        out.warning = std::string("rebalancing aborted: ") + e.what();
        ++stats_.aborted_rebalances;
        return;
      } catch (const InsufficientDataError& e) {
        out.warning = std::string("rebalancing aborted: ") + e.what();
        ++stats_.aborted_rebalances;
        return;
      }
      ++out.rounds;
      bal = compute_balR(counters_);
      fair = compute_fairR(counters_);
      out.balR = bal;
      out.fairR = fair;
    }
    out.rebalance_completed = true;
    ++stats_.completed_rebalances;
  }

  void refresh_cache() {
    if (cache_.valid && stats_.steps - cache_.built_at < cfg_.sampler.recluster_interval) return;
    const std::size_t n = std::min<std::size_t>(window_.size(), cfg_.sampler.max_cluster_samples);
    const std::size_t first = window_.size() - n;
    std::vector<Point> pts;
    pts.reserve(n);
    for (std::size_t i = first; i < window_.size(); ++i) pts.push_back(standardizer_.transform(window_[i].instance.features));
    const std::size_t k_max = std::max(cfg_.sampler.k_min, std::min(cfg_.sampler.k_max, n / 10));
    const ClusterResult res = cluster_and_filter(pts, cfg_.sampler.k_min, k_max, cfg_.seed + stats_.steps);
    cache_.pool.clear();
    cache_.pool.reserve(res.report.retained.size());
    for (auto i : res.report.retained) {
      const Instance& inst = window_[first + i].instance;
      cache_.pool.push_back(Candidate{inst.seq, res.clustering.assignment[i], inst.features, std::move(pts[i]),
                                      inst.sensitive, inst.label});
    }
    cache_.k = res.clustering.k;
    cache_.built_at = stats_.steps;
    cache_.valid = true;
    ++stats_.reclusterings;
  }

  std::uint64_t synthesize(const DeficitChoice& choice, std::uint64_t seq, std::set<std::uint64_t>& used) {
    refresh_cache();
    const std::uint64_t oldest = window_.empty() ? 0 : window_[0].instance.seq;
    std::vector<Candidate> pool;
    std::vector<std::size_t> cluster_of;
    std::vector<bool> minority;
    for (const auto& cand : cache_.pool) {
      if (cand.key < oldest) continue;
      pool.push_back(cand);
      cluster_of.push_back(cand.cluster);
      minority.push_back(choice.whole_class ? cand.label == choice.target_class
                                            : subgroup_of(cand.sensitive, cand.label) == choice.target);
    }
    const ClusterWeights quota = cluster_weights(cluster_of, minority, cache_.k, choice.n_num);
    const auto synthetic =
        fair_generate(pool, minority, quota, FairGenerateParams{cfg_.sampler.k_neighbors, seq}, used, rng_);
    for (const auto& s : synthetic) {
      learner_->train(s.instance.features, s.instance.label);
      const std::size_t slot = window_.find(s.template_key);
      const Subgroup g = s.instance.subgroup();
      ++window_[slot].gen_count;
      ++counters_.synthesized[index_of(g)];
      ++stats_.synthesized[index_of(g)];
    }
    return synthetic.size();
  }

  void drop_oldest(std::size_t count) {
    for (std::size_t i = 0; i < count && !window_.empty(); ++i) {
      const WindowSlot s = window_.pop_front();
      --counters_.observed[index_of(s.tag)];
      counters_.synthesized[index_of(s.tag)] -= s.gen_count;
    }
  }

  FS2Config cfg_;
  Technique technique_;
  std::unique_ptr<OnlineLearner> learner_;
  SlidingWindow window_;
  SubgroupCounters counters_;
  AdaptiveWindow error_detector_;
  AdaptiveWindow fairness_detector_;
  bool error_warning_ = false;
  bool fairness_warning_ = false;
  FairnessAccumulator fairness_;
  ConfusionAccumulator confusion_;
  Standardizer standardizer_;
  std::mt19937_64 rng_;
  SamplerCache cache_;
  PipelineStats stats_;
};

}  // namespace fs2
