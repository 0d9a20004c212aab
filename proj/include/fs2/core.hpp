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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fs2 {

// Error hierarchy. Every failure surfaced by the library derives from Error so
// callers can separate library faults from std::bad_alloc and friends.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct UndefinedMetricError : Error {
  using Error::Error;
};
struct SchemaError : Error {
  using Error::Error;
};
struct ValueError : Error {
  using Error::Error;
};
struct RowError : Error {
  RowError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};
struct InsufficientDataError : Error {
  using Error::Error;
};
struct CannotSynthesizeError : Error {
  using Error::Error;
};
struct ProtocolError : Error {
  using Error::Error;
};
struct UsageError : Error {
  using Error::Error;
};

enum class Group : std::uint8_t { kPrivileged, kUnprivileged };

// Labels use the {-1, +1} encoding; +1 is the favorable outcome.
enum class Label : std::int8_t { kUnfavorable = -1, kFavorable = 1 };

inline bool is_favorable(Label y) { return y == Label::kFavorable; }
inline bool is_privileged(Group s) { return s == Group::kPrivileged; }
inline Label other(Label y) {
  return is_favorable(y) ? Label::kUnfavorable : Label::kFavorable;
}
inline Group other(Group s) {
  return is_privileged(s) ? Group::kUnprivileged : Group::kPrivileged;
}

inline std::string_view to_string(Group s) {
  return is_privileged(s) ? "privileged" : "unprivileged";
}
inline std::string_view to_string(Label y) {
  return is_favorable(y) ? "favorable" : "unfavorable";
}
inline int to_int(Label y) { return static_cast<int>(y); }

// The four (group, label) cells. The numeric value doubles as the counter
// index C0..C3.
enum class Subgroup : std::uint8_t {
  kPrivilegedFavorable = 0,
  kPrivilegedUnfavorable = 1,
  kUnprivilegedFavorable = 2,
  kUnprivilegedUnfavorable = 3,
};

inline constexpr std::array<Subgroup, 4> kAllSubgroups = {
    Subgroup::kPrivilegedFavorable, Subgroup::kPrivilegedUnfavorable,
    Subgroup::kUnprivilegedFavorable, Subgroup::kUnprivilegedUnfavorable};

inline Subgroup subgroup_of(Group s, Label y) {
  const int g = is_privileged(s) ? 0 : 2;
  const int l = is_favorable(y) ? 0 : 1;
  return static_cast<Subgroup>(g + l);
}
inline std::size_t index_of(Subgroup g) { return static_cast<std::size_t>(g); }
inline Group group_of(Subgroup g) {
  return index_of(g) < 2 ? Group::kPrivileged : Group::kUnprivileged;
}
inline Label label_of(Subgroup g) {
  return index_of(g) % 2 == 0 ? Label::kFavorable : Label::kUnfavorable;
}
inline std::string_view to_string(Subgroup g) {
  switch (g) {
    case Subgroup::kPrivilegedFavorable:
      return "privileged-favorable";
    case Subgroup::kPrivilegedUnfavorable:
      return "privileged-unfavorable";
    case Subgroup::kUnprivilegedFavorable:
      return "unprivileged-favorable";
    case Subgroup::kUnprivilegedUnfavorable:
      return "unprivileged-unfavorable";
  }
  return "?";
}

struct Instance {
  std::vector<double> features;
  Group sensitive = Group::kPrivileged;
  Label label = Label::kUnfavorable;
  std::uint64_t seq = 0;

  Subgroup subgroup() const { return subgroup_of(sensitive, label); }
};

inline void validate(const Instance& d) {
  if (d.features.empty()) throw ValueError("instance has no features");
  for (double v : d.features) {
    if (!std::isfinite(v)) throw ValueError("non-finite feature value");
  }
}

// Per-subgroup counts. `observed` covers the live window only; `synthesized`
// covers synthetic instances whose template is still in the window.
struct SubgroupCounters {
  std::array<std::uint64_t, 4> observed{};
  std::array<std::uint64_t, 4> synthesized{};

  std::uint64_t combined(Subgroup g) const {
    return observed[index_of(g)] + synthesized[index_of(g)];
  }
  std::uint64_t window_length() const {
    return observed[0] + observed[1] + observed[2] + observed[3];
  }
  std::uint64_t class_total(Label y, bool with_synthetic = true) const {
    const Subgroup a = subgroup_of(Group::kPrivileged, y);
    const Subgroup b = subgroup_of(Group::kUnprivileged, y);
    std::uint64_t n = observed[index_of(a)] + observed[index_of(b)];
    if (with_synthetic) n += synthesized[index_of(a)] + synthesized[index_of(b)];
    return n;
  }
  bool operator==(const SubgroupCounters&) const = default;
};

// One slot of the sliding window: the instance, its subgroup tag, and how
// many synthetic instances used it as a template.
struct WindowSlot {
  Instance instance;
  Subgroup tag;
  std::uint64_t gen_count = 0;
};

// W and W_label kept as a single deque of slots so the two can never fall
// out of alignment.
class SlidingWindow {
 public:
  void push(Instance d) {
    const Subgroup tag = d.subgroup();
    slots_.push_back(WindowSlot{std::move(d), tag, 0});
  }
  // Removes the oldest slot and returns it.
  WindowSlot pop_front() {
    WindowSlot s = std::move(slots_.front());
    slots_.pop_front();
    return s;
  }
  std::size_t size() const { return slots_.size(); }
  bool empty() const { return slots_.empty(); }
  const WindowSlot& operator[](std::size_t i) const { return slots_[i]; }
  WindowSlot& operator[](std::size_t i) { return slots_[i]; }
  auto begin() const { return slots_.begin(); }
  auto end() const { return slots_.end(); }

  // Index of the slot holding `seq`, or size() when it is no longer live.
  std::size_t find(std::uint64_t seq) const {
    std::size_t lo = 0, hi = slots_.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (slots_[mid].instance.seq < seq) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    if (lo < slots_.size() && slots_[lo].instance.seq == seq) return lo;
    return slots_.size();
  }

 private:
  std::deque<WindowSlot> slots_;
};

// Brute-force recount of a window; used by tests and invariant checks.
inline SubgroupCounters recount(const SlidingWindow& w) {
  SubgroupCounters c;
  for (const auto& slot : w) {
    ++c.observed[index_of(slot.instance.subgroup())];
    c.synthesized[index_of(slot.tag)] += slot.gen_count;
  }
  return c;
}

}  // namespace fs2
