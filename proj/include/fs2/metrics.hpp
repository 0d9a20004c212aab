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

#include <array>
#include <cstdint>

#include "fs2/core.hpp"

namespace fs2 {

// Minority share of a two-class count: minority / (majority + minority).
// The caller decides which class currently plays the minority role.
inline double imbalance_ratio(std::uint64_t minority, std::uint64_t majority) {
  if (minority + majority == 0) throw UndefinedMetricError("imbalance ratio of an empty sample");
  return static_cast<double>(minority) / static_cast<double>(majority + minority);
}

// One step of the decayed recursion.
inline double decayed(double previous, double gap, double lambda) {
  return (1.0 - lambda) * gap + lambda * previous;
}

struct FairnessValue {
  double value = 0.0;
  // True until both groups have contributed to the relevant denominators.
  bool warmup = true;
};

// Decayed cumulative parity metrics. Each update blends the current
// cumulative group-rate gap (privileged minus unprivileged) with the previous
// value:
//
//   m_t = (1 - lambda) * (rate_priv - rate_unpriv) + lambda * m_{t-1}
//
// A group with no members yet contributes rate 0 and the result carries the
// warm-up flag.
class FairnessAccumulator {
 public:
  explicit FairnessAccumulator(double lambda = 0.5) : lambda_(lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("decay factor must lie in [0,1]");
  }

  FairnessValue update_cspd(Group s, bool predicted_favorable) {
    const auto g = slot(s);
    ++total_[g];
    if (predicted_favorable) ++favorable_[g];
    const double gap = rate(favorable_[0], total_[0]) - rate(favorable_[1], total_[1]);
    cspd_ = decayed(cspd_, gap, lambda_);
    return {cspd_, total_[0] == 0 || total_[1] == 0};
  }

  // Only instances whose true label is favorable move the TPR counts, but
  // the recursion advances on every call.
  FairnessValue update_ceod(Group s, bool true_favorable, bool predicted_favorable) {
    const auto g = slot(s);
    if (true_favorable) {
      ++positives_[g];
      if (predicted_favorable) ++true_positives_[g];
    }
    const double gap = rate(true_positives_[0], positives_[0]) - rate(true_positives_[1], positives_[1]);
    ceod_ = decayed(ceod_, gap, lambda_);
    return {ceod_, positives_[0] == 0 || positives_[1] == 0};
  }

  double cspd() const { return cspd_; }
  double ceod() const { return ceod_; }
  bool cspd_warmup() const { return total_[0] == 0 || total_[1] == 0; }
  bool ceod_warmup() const { return positives_[0] == 0 || positives_[1] == 0; }
  double lambda() const { return lambda_; }

  std::uint64_t total(Group s) const { return total_[slot(s)]; }
  std::uint64_t favorable(Group s) const { return favorable_[slot(s)]; }
  std::uint64_t positives(Group s) const { return positives_[slot(s)]; }
  std::uint64_t true_positives(Group s) const { return true_positives_[slot(s)]; }

 private:
  static std::size_t slot(Group s) { return is_privileged(s) ? 0 : 1; }
  static double rate(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  }

  double lambda_;
  std::array<std::uint64_t, 2> favorable_{};
  std::array<std::uint64_t, 2> total_{};
  std::array<std::uint64_t, 2> true_positives_{};
  std::array<std::uint64_t, 2> positives_{};
  double cspd_ = 0.0;
  double ceod_ = 0.0;
};

// Favorable is the positive class.
struct ConfusionAccumulator {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  void add(Label truth, Label predicted) {
    const bool t = is_favorable(truth);
    const bool p = is_favorable(predicted);
    if (t && p) ++tp;
    if (!t && p) ++fp;
    if (!t && !p) ++tn;
    if (t && !p) ++fn;
  }
  std::uint64_t total() const { return tp + fp + tn + fn; }
};

inline double recall(const ConfusionAccumulator& c) {
  if (c.tp + c.fn == 0) throw UndefinedMetricError("recall undefined: no positive labels seen");
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

inline double balanced_accuracy(const ConfusionAccumulator& c) {
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0) {
    throw UndefinedMetricError("balanced accuracy undefined: a class has not been seen");
  }
  const double tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return 0.5 * (tpr + tnr);
}

}  // namespace fs2
