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

#include <cmath>
#include <cstdint>
#include <deque>
#include <string_view>
#include <vector>

#include "fs2/core.hpp"

namespace fs2 {

// ln(2 ln(n) / delta): the confidence term of the adaptive-windowing cut.
// Evaluated at delta for the change level and at 10*delta for the warning
// level.
inline double level_error(double n, double delta) {
  if (!(n >= 2.0)) throw ParameterError("level_error requires n >= 2");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("level_error requires delta in (0,1)");
  return std::log(2.0 * std::log(n) / delta);
}

enum class DriftLevel { kNone, kWarning, kChange };

inline std::string_view to_string(DriftLevel l) {
  switch (l) {
    case DriftLevel::kNone:
      return "none";
    case DriftLevel::kWarning:
      return "warning";
    case DriftLevel::kChange:
      return "change";
  }
  return "?";
}

struct DriftSignal {
  DriftLevel level = DriftLevel::kNone;
  std::uint64_t window_len_before = 0;
  std::uint64_t window_len_after = 0;
};

struct AdwinParams {
  double delta = 0.002;
  double warning_factor = 10.0;
  // Buckets allowed per capacity tier before the two oldest are merged.
  std::size_t max_buckets = 5;
  // Cut tests run every `clock` insertions.
  std::size_t clock = 1;
  std::uint64_t min_window = 10;
  std::uint64_t min_subwindow = 5;
};

// Adaptive window over a real-valued stream, compressed as an exponential
// histogram: tier i holds up to max_buckets buckets of 2^i items each.
class AdaptiveWindow {
 public:
  struct Bucket {
    std::uint64_t count = 0;
    double sum = 0.0;
    // Sum of squared deviations from the bucket mean.
    double m2 = 0.0;
  };

  explicit AdaptiveWindow(AdwinParams p = {}) : p_(p) {
    if (!(p_.delta > 0.0 && p_.delta * p_.warning_factor < 1.0)) {
      throw ParameterError("adwin requires 0 < delta and warning_factor * delta < 1");
    }
    if (p_.warning_factor < 1.0) throw ParameterError("adwin warning_factor must be >= 1");
    if (p_.max_buckets < 2) throw ParameterError("adwin max_buckets must be >= 2");
    if (p_.clock == 0) throw ParameterError("adwin clock must be positive");
    if (p_.min_subwindow == 0) throw ParameterError("adwin min_subwindow must be positive");
  }

  DriftSignal insert(double value) {
    DriftSignal sig;
    sig.window_len_before = width_ + 1;
    append(value);
    compress();
    ++ticks_;
    if (ticks_ % p_.clock == 0 && width_ > p_.min_window) {
      bool warning = false;
      bool change = false;
      // Keep dropping the oldest bucket while some cut is significant.
      while (true) {
        const auto [cut_change, cut_warning] = scan();
        warning = warning || cut_warning;
        if (!cut_change) break;
        change = true;
        drop_oldest();
      }
      if (change) {
        sig.level = DriftLevel::kChange;
        in_warning_ = false;
      } else if (warning) {
        sig.level = DriftLevel::kWarning;
        if (!in_warning_) warning_since_ = ticks_;
        in_warning_ = true;
      } else {
        in_warning_ = false;
      }
    }
    sig.window_len_after = width_;
    return sig;
  }

  double mean() const {
    if (width_ == 0) throw UndefinedMetricError("mean of an empty adaptive window");
    return sum_ / static_cast<double>(width_);
  }
  // Population variance of the retained values.
  double variance() const { return width_ == 0 ? 0.0 : m2_ / static_cast<double>(width_); }
  std::uint64_t width() const { return width_; }
  std::size_t bucket_count() const {
    std::size_t n = 0;
    for (const auto& row : rows_) n += row.size();
    return n;
  }
  const std::vector<std::deque<Bucket>>& tiers() const { return rows_; }
  const AdwinParams& params() const { return p_; }
  bool in_warning() const { return in_warning_; }
  // Insertion tick at which the current warning period started.
  std::uint64_t warning_since() const { return warning_since_; }

  // Cut threshold for sub-windows of n0 and n1 items at confidence delta.
  double cut_threshold(std::uint64_t n0, std::uint64_t n1, double delta) const {
    const double dd = level_error(static_cast<double>(width_), delta);
    const double k = static_cast<double>(p_.min_subwindow) - 1.0;
    const double m = 1.0 / (static_cast<double>(n0) - k) + 1.0 / (static_cast<double>(n1) - k);
    return std::sqrt(2.0 * m * variance() * dd) + 2.0 / 3.0 * dd * m;
  }

 private:
  void append(double value) {
    if (rows_.empty()) rows_.emplace_back();
    rows_[0].push_back(Bucket{1, value, 0.0});
    ++width_;
    if (width_ > 1) {
      const double n = static_cast<double>(width_);
      const double prev_mean = sum_ / (n - 1.0);
      m2_ += (n - 1.0) * (value - prev_mean) * (value - prev_mean) / n;
    }
    sum_ += value;
  }

  void compress() {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      if (rows_[i].size() <= p_.max_buckets) break;
      const Bucket a = rows_[i][0];
      const Bucket b = rows_[i][1];
      rows_[i].pop_front();
      rows_[i].pop_front();
      const double na = static_cast<double>(a.count);
      const double nb = static_cast<double>(b.count);
      const double ua = a.sum / na;
      const double ub = b.sum / nb;
      Bucket merged{a.count + b.count, a.sum + b.sum, a.m2 + b.m2 + na * nb * (ua - ub) * (ua - ub) / (na + nb)};
      if (i + 1 == rows_.size()) rows_.emplace_back();
      rows_[i + 1].push_back(merged);
    }
  }

  // Walks every boundary between adjacent buckets from the oldest end and
  // reports whether any cut clears the change and warning thresholds.
  std::pair<bool, bool> scan() const {
    bool warning = false;
    std::uint64_t n0 = 0;
    double s0 = 0.0;
    const double warn_delta = p_.delta * p_.warning_factor;
    for (std::size_t r = rows_.size(); r-- > 0;) {
      for (const Bucket& b : rows_[r]) {
        n0 += b.count;
        s0 += b.sum;
        const std::uint64_t n1 = width_ - n0;
        if (n1 == 0) return {false, warning};
        if (n0 < p_.min_subwindow || n1 < p_.min_subwindow) continue;
        const double diff = std::fabs(s0 / static_cast<double>(n0) - (sum_ - s0) / static_cast<double>(n1));
        if (diff > cut_threshold(n0, n1, p_.delta)) return {true, true};
        if (!warning && diff > cut_threshold(n0, n1, warn_delta)) warning = true;
      }
    }
    return {false, warning};
  }

  void drop_oldest() {
    std::size_t r = rows_.size() - 1;
    while (rows_[r].empty()) --r;
    const Bucket b = rows_[r].front();
    rows_[r].pop_front();
    while (!rows_.empty() && rows_.back().empty()) rows_.pop_back();

    width_ -= b.count;
    sum_ -= b.sum;
    if (width_ == 0) {
      sum_ = 0.0;
      m2_ = 0.0;
      return;
    }
    const double nb = static_cast<double>(b.count);
    const double w = static_cast<double>(width_);
    const double ub = b.sum / nb;
    const double u = sum_ / w;
    m2_ -= b.m2 + nb * w * (ub - u) * (ub - u) / (nb + w);
    if (m2_ < 0.0) m2_ = 0.0;
  }

  AdwinParams p_;
  std::vector<std::deque<Bucket>> rows_;
  std::uint64_t width_ = 0;
  double sum_ = 0.0;
  double m2_ = 0.0;
  std::uint64_t ticks_ = 0;
  bool in_warning_ = false;
  std::uint64_t warning_since_ = 0;
};

}  // namespace fs2
