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
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fs2/config.hpp"
#include "fs2/core.hpp"

namespace fs2 {

// Single-consumer pull interface shared by the synthetic generator and the
// CSV reader.
class InstanceSource {
 public:
  virtual ~InstanceSource() = default;
  virtual std::optional<Instance> next() = 0;
};

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

struct DriftPoint {
  std::uint64_t seq = 0;
  std::vector<double> favorable_mean;
  std::vector<double> unfavorable_mean;
};

// Positive-class probability at a given seq, linearly interpolated between
// knots and held constant outside them.
struct ImbalanceKnot {
  std::uint64_t seq = 0;
  double p_favorable = 0.5;
};

struct StreamConfig {
  std::uint64_t length = 50000;
  std::size_t n_features = 20;
  std::vector<double> favorable_mean;
  std::vector<double> unfavorable_mean;
  std::vector<double> favorable_std;
  std::vector<double> unfavorable_std;
  std::vector<DriftPoint> drift;
  std::vector<ImbalanceKnot> imbalance;
  // P(sensitive = privileged | label).
  double p_privileged_given_favorable = 0.5;
  double p_privileged_given_unfavorable = 0.5;
  // Unprivileged favorable instances are drawn around
  // favorable_mean + shift * (unfavorable_mean - favorable_mean).
  double unprivileged_favorable_shift = 0.0;
  // Added to the mean of every unprivileged instance (both classes); lets
  // some features act as proxies for the sensitive attribute.
  std::vector<double> unprivileged_offset;
  std::uint64_t seed = 1;

  void validate() const {
    const auto check_vec = [&](const std::vector<double>& v, const char* name, bool is_std) {
      if (v.size() != n_features) {
        throw ParameterError(std::string(name) + " must have n_features entries");
      }
      for (double x : v) {
        if (!std::isfinite(x)) throw ParameterError(std::string(name) + " must be finite");
        if (is_std && x < 0) throw ParameterError(std::string(name) + " must be >= 0");
      }
    };
    if (n_features == 0) throw ParameterError("n_features must be positive");
    check_vec(favorable_mean, "favorable_mean", false);
    check_vec(unfavorable_mean, "unfavorable_mean", false);
    check_vec(favorable_std, "favorable_std", true);
    check_vec(unfavorable_std, "unfavorable_std", true);
    for (std::size_t i = 0; i < drift.size(); ++i) {
      if (i > 0 && drift[i].seq <= drift[i - 1].seq) {
        throw ParameterError("drift schedule seq values must strictly increase");
      }
      check_vec(drift[i].favorable_mean, "drift favorable_mean", false);
      check_vec(drift[i].unfavorable_mean, "drift unfavorable_mean", false);
    }
    for (std::size_t i = 0; i < imbalance.size(); ++i) {
      if (i > 0 && imbalance[i].seq < imbalance[i - 1].seq) {
        throw ParameterError("imbalance knots must be ordered by seq");
      }
      if (!(imbalance[i].p_favorable >= 0 && imbalance[i].p_favorable <= 1)) {
        throw ParameterError("imbalance probabilities must lie in [0,1]");
      }
    }
    for (double p : {p_privileged_given_favorable, p_privileged_given_unfavorable}) {
      if (!(p >= 0 && p <= 1)) throw ParameterError("bias probabilities must lie in [0,1]");
    }
    if (!unprivileged_offset.empty()) check_vec(unprivileged_offset, "unprivileged_offset", false);
    if (!std::isfinite(unprivileged_favorable_shift)) {
      throw ParameterError("unprivileged_favorable_shift must be finite");
    }
  }

  double p_favorable_at(std::uint64_t seq) const {
    if (imbalance.empty()) return 0.5;
    if (seq <= imbalance.front().seq) return imbalance.front().p_favorable;
    if (seq >= imbalance.back().seq) return imbalance.back().p_favorable;
    const auto hi = std::upper_bound(imbalance.begin(), imbalance.end(), seq,
                                     [](std::uint64_t s, const ImbalanceKnot& k) { return s < k.seq; });
    const auto lo = hi - 1;
    if (hi->seq == lo->seq) return hi->p_favorable;
    const double t = static_cast<double>(seq - lo->seq) / static_cast<double>(hi->seq - lo->seq);
    return lo->p_favorable + t * (hi->p_favorable - lo->p_favorable);
  }

  // Means in force at `seq`: the latest drift point at or before it.
  std::pair<const std::vector<double>*, const std::vector<double>*> means_at(std::uint64_t seq) const {
    const std::vector<double>* fav = &favorable_mean;
    const std::vector<double>* unf = &unfavorable_mean;
    for (const auto& d : drift) {
      if (d.seq > seq) break;
      fav = &d.favorable_mean;
      unf = &d.unfavorable_mean;
    }
    return {fav, unf};
  }
};

// Bias table for a population with `p_privileged` of members privileged and
// a privileged favorable rate `ratio` times the unprivileged one, given an
// overall favorable probability `p_favorable`.
inline std::pair<double, double> bias_table(double p_favorable, double p_privileged, double ratio) {
  const double unpriv_rate = p_favorable / (p_privileged * ratio + (1 - p_privileged));
  const double priv_rate = ratio * unpriv_rate;
  const double given_fav = p_privileged * priv_rate / p_favorable;
  const double given_unf = p_privileged * (1 - priv_rate) / (1 - p_favorable);
  return {given_fav, given_unf};
}

// The desk-scale stream used by the harness and the acceptance suite:
// 20 features, 50k instances, favorable minority at 30%, one mean shift at 25k.
// Features 16-19 sit two units higher for unprivileged members.
inline StreamConfig canonical_stream_config(std::uint64_t seed = 1) {
  StreamConfig c;
  c.seed = seed;
  c.length = 50000;
  c.n_features = 20;
  c.favorable_mean.resize(c.n_features);
  c.unfavorable_mean.resize(c.n_features);
  c.favorable_std.resize(c.n_features);
  c.unfavorable_std.resize(c.n_features);
  for (std::size_t j = 0; j < c.n_features; ++j) {
    const double base = 0.1 * static_cast<double>(j);
    const double sep = j < 4 ? 1.0 : (j < 10 ? 0.4 : 0.0);
    c.unfavorable_mean[j] = base;
    c.favorable_mean[j] = base + sep;
    c.favorable_std[j] = 1.0 + 0.05 * static_cast<double>(j);
    c.unfavorable_std[j] = 1.0 + 0.05 * static_cast<double>(j);
  }
  DriftPoint d;
  d.seq = 25000;
  d.favorable_mean = c.favorable_mean;
  d.unfavorable_mean = c.unfavorable_mean;
  for (std::size_t j = 0; j < c.n_features; ++j) {
    d.favorable_mean[j] += 3.0 * c.favorable_std[j];
    d.unfavorable_mean[j] += 3.0 * c.unfavorable_std[j];
  }
  c.drift.push_back(d);
  c.imbalance = {{0, 0.3}};
  const auto [given_fav, given_unf] = bias_table(0.3, 0.7, 2.0);
  c.p_privileged_given_favorable = given_fav;
  c.p_privileged_given_unfavorable = given_unf;
  c.unprivileged_favorable_shift = 0.3;
  c.unprivileged_offset.assign(c.n_features, 0.0);
  for (std::size_t j = 16; j < c.n_features; ++j) c.unprivileged_offset[j] = 2.0;
  return c;
}

class SyntheticStream : public InstanceSource {
 public:
  explicit SyntheticStream(StreamConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
    cfg_.validate();
  }

  std::optional<Instance> next() override {
    if (cfg_.length != 0 && seq_ >= cfg_.length) return std::nullopt;
    return draw();
  }

  // Draws regardless of the configured length.
  Instance draw() {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Instance d;
    d.seq = seq_;
    d.label = unit(rng_) < cfg_.p_favorable_at(seq_) ? Label::kFavorable : Label::kUnfavorable;
    const double p_priv = is_favorable(d.label) ? cfg_.p_privileged_given_favorable
                                                : cfg_.p_privileged_given_unfavorable;
    d.sensitive = unit(rng_) < p_priv ? Group::kPrivileged : Group::kUnprivileged;

    const auto [fav, unf] = cfg_.means_at(seq_);
    const bool favorable = is_favorable(d.label);
    const auto& mean = favorable ? *fav : *unf;
    const auto& sd = favorable ? cfg_.favorable_std : cfg_.unfavorable_std;
    const bool shifted = favorable && !is_privileged(d.sensitive);
    d.features.resize(cfg_.n_features);
    for (std::size_t j = 0; j < cfg_.n_features; ++j) {
      double mu = mean[j];
      if (shifted) mu += cfg_.unprivileged_favorable_shift * ((*unf)[j] - (*fav)[j]);
      if (!is_privileged(d.sensitive) && !cfg_.unprivileged_offset.empty()) mu += cfg_.unprivileged_offset[j];
      if (sd[j] == 0.0) {
        d.features[j] = mu;
      } else {
        std::normal_distribution<double> gauss(mu, sd[j]);
        d.features[j] = gauss(rng_);
      }
    }
    ++seq_;
    return d;
  }

  const StreamConfig& config() const { return cfg_; }

 private:
  StreamConfig cfg_;
  std::mt19937_64 rng_;
  std::uint64_t seq_ = 0;
};

// `stream.*` keys understood by stream_config_from.
inline const std::set<std::string>& stream_config_keys() {
  static const std::set<std::string> keys = {
      "stream.length",
      "stream.seed",
      "stream.n_features",
      "stream.favorable_mean",
      "stream.unfavorable_mean",
      "stream.favorable_std",
      "stream.unfavorable_std",
      "stream.imbalance",
      "stream.p_privileged_given_favorable",
      "stream.p_privileged_given_unfavorable",
      "stream.unprivileged_favorable_shift",
      "stream.unprivileged_offset",
      "stream.drift",
  };
  return keys;
}

inline std::string format_vector(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

// Reads `stream.*` keys on top of `base`. Drift points are written as
// stream.drift = none, or as numbered groups stream.drift.<i>.seq,
// stream.drift.<i>.favorable_mean and stream.drift.<i>.unfavorable_mean.
inline StreamConfig stream_config_from(const KeyValueConfig& kv, StreamConfig base) {
  StreamConfig c = std::move(base);
  c.length = kv.get_uint("stream.length", c.length);
  c.seed = kv.get_uint("stream.seed", c.seed);
  const std::size_t n = kv.get_uint("stream.n_features", c.n_features);
  if (n != c.n_features) {
    const auto resize = [n](std::vector<double>& v, double fill) { v.resize(n, fill); };
    resize(c.favorable_mean, 1.0);
    resize(c.unfavorable_mean, 0.0);
    resize(c.favorable_std, 1.0);
    resize(c.unfavorable_std, 1.0);
    if (!c.unprivileged_offset.empty()) resize(c.unprivileged_offset, 0.0);
    for (auto& d : c.drift) {
      resize(d.favorable_mean, 1.0);
      resize(d.unfavorable_mean, 0.0);
    }
    c.n_features = n;
  }
  c.favorable_mean = kv.get_vector("stream.favorable_mean", c.favorable_mean, n);
  c.unfavorable_mean = kv.get_vector("stream.unfavorable_mean", c.unfavorable_mean, n);
  c.favorable_std = kv.get_vector("stream.favorable_std", c.favorable_std, n);
  c.unfavorable_std = kv.get_vector("stream.unfavorable_std", c.unfavorable_std, n);
  c.p_privileged_given_favorable =
      kv.get_double("stream.p_privileged_given_favorable", c.p_privileged_given_favorable);
  c.p_privileged_given_unfavorable =
      kv.get_double("stream.p_privileged_given_unfavorable", c.p_privileged_given_unfavorable);
  c.unprivileged_favorable_shift =
      kv.get_double("stream.unprivileged_favorable_shift", c.unprivileged_favorable_shift);
  if (kv.has("stream.unprivileged_offset")) {
    c.unprivileged_offset = kv.get_vector("stream.unprivileged_offset", std::vector<double>(n, 0.0), n);
  }

  if (kv.has("stream.imbalance")) {
    c.imbalance.clear();
    for (const auto& knot : split(kv.get_string("stream.imbalance", ""), ',')) {
      const auto parts = split(knot, ':');
      ImbalanceKnot k;
      if (parts.size() != 2 || !parse_uint(parts[0], k.seq) || !parse_double(parts[1], k.p_favorable)) {
        throw UsageError("invalid value for key 'stream.imbalance': expected seq:p pairs");
      }
      c.imbalance.push_back(k);
    }
  }

  if (kv.get_string("stream.drift", "") == "none") c.drift.clear();
  std::map<std::uint64_t, DriftPoint> numbered;
  for (const auto& [key, value] : kv.values()) {
    if (key.rfind("stream.drift.", 0) != 0) continue;
    const auto parts = split(key.substr(std::string("stream.drift.").size()), '.');
    std::uint64_t idx = 0;
    if (parts.size() != 2 || !parse_uint(parts[0], idx)) {
      throw UsageError("unknown configuration key '" + key + "'");
    }
    numbered.try_emplace(idx);
  }
  if (!numbered.empty()) {
    c.drift.clear();
    for (auto& [idx, d] : numbered) {
      const std::string p = "stream.drift." + std::to_string(idx) + ".";
      if (!kv.has(p + "seq")) throw UsageError("missing key '" + p + "seq'");
      d.seq = kv.get_uint(p + "seq", 0);
      d.favorable_mean = kv.get_vector(p + "favorable_mean", c.favorable_mean, n);
      d.unfavorable_mean = kv.get_vector(p + "unfavorable_mean", c.unfavorable_mean, n);
      c.drift.push_back(d);
    }
  }
  c.validate();
  return c;
}

inline void write_stream_config(std::ostream& os, const StreamConfig& c) {
  os.precision(17);
  os << "stream.length = " << c.length << "\n";
  os << "stream.seed = " << c.seed << "\n";
  os << "stream.n_features = " << c.n_features << "\n";
  os << "stream.favorable_mean = " << format_vector(c.favorable_mean) << "\n";
  os << "stream.unfavorable_mean = " << format_vector(c.unfavorable_mean) << "\n";
  os << "stream.favorable_std = " << format_vector(c.favorable_std) << "\n";
  os << "stream.unfavorable_std = " << format_vector(c.unfavorable_std) << "\n";
  os << "stream.imbalance = ";
  for (std::size_t i = 0; i < c.imbalance.size(); ++i) {
    os << (i ? "," : "") << c.imbalance[i].seq << ":" << c.imbalance[i].p_favorable;
  }
  os << "\n";
  os << "stream.p_privileged_given_favorable = " << c.p_privileged_given_favorable << "\n";
  os << "stream.p_privileged_given_unfavorable = " << c.p_privileged_given_unfavorable << "\n";
  os << "stream.unprivileged_favorable_shift = " << c.unprivileged_favorable_shift << "\n";
  os << "stream.unprivileged_offset = "
     << format_vector(c.unprivileged_offset.empty() ? std::vector<double>(c.n_features, 0.0)
                                                   : c.unprivileged_offset)
     << "\n";
  if (c.drift.empty()) os << "stream.drift = none\n";
  for (std::size_t i = 0; i < c.drift.size(); ++i) {
    os << "stream.drift." << i << ".seq = " << c.drift[i].seq << "\n";
    os << "stream.drift." << i << ".favorable_mean = " << format_vector(c.drift[i].favorable_mean) << "\n";
    os << "stream.drift." << i << ".unfavorable_mean = " << format_vector(c.drift[i].unfavorable_mean)
       << "\n";
  }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

struct CsvSchema {
  std::string sensitive_column = "sensitive";
  std::string label_column = "label";
  std::string favorable_value = "1";
  std::string privileged_value = "1";
  // When empty, every value other than the favorable/privileged one maps to
  // the complement. When set, values outside the declared pair are rejected.
  std::string unfavorable_value;
  std::string unprivileged_value;
  std::vector<std::string> ignore_columns;
  // Strict mode fails on the first malformed row; otherwise such rows are
  // skipped and counted.
  bool strict = true;
};

// Splits one CSV record, honouring double-quoted fields.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  out.push_back(trim(field));
  return out;
}

class CsvStream : public InstanceSource {
 public:
  CsvStream(const std::string& path, CsvSchema schema) : schema_(std::move(schema)), in_(path) {
    if (!in_) throw SchemaError("cannot open CSV file '" + path + "'");
    std::string header;
    if (!std::getline(in_, header)) throw SchemaError("CSV file '" + path + "' is empty");
    line_no_ = 1;
    columns_ = split_csv_line(header);
    const auto find = [&](const std::string& name) -> std::size_t {
      const auto it = std::find(columns_.begin(), columns_.end(), name);
      if (it == columns_.end()) throw SchemaError("missing column '" + name + "'");
      return static_cast<std::size_t>(it - columns_.begin());
    };
    sensitive_idx_ = find(schema_.sensitive_column);
    label_idx_ = find(schema_.label_column);
    for (const auto& c : schema_.ignore_columns) find(c);
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i == sensitive_idx_ || i == label_idx_) continue;
      if (std::find(schema_.ignore_columns.begin(), schema_.ignore_columns.end(), columns_[i]) !=
          schema_.ignore_columns.end()) {
        continue;
      }
      feature_idx_.push_back(i);
    }
    if (feature_idx_.empty()) throw SchemaError("no feature columns left after schema mapping");
  }

  std::optional<Instance> next() override {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (trim(line).empty()) continue;
      try {
        return parse_row(line);
      } catch (const RowError&) {
        if (schema_.strict) throw;
        ++skipped_;
      } catch (const ValueError& e) {
        if (schema_.strict) throw RowError(line_no_, e.what());
        ++skipped_;
      }
    }
    return std::nullopt;
  }

  const std::vector<std::string>& feature_names() const {
    if (names_.empty()) {
      for (auto i : feature_idx_) names_.push_back(columns_[i]);
    }
    return names_;
  }
  std::size_t skipped_rows() const { return skipped_; }

 private:
  Instance parse_row(const std::string& line) {
    const auto fields = split_csv_line(line);
    if (fields.size() != columns_.size()) {
      throw RowError(line_no_, "expected " + std::to_string(columns_.size()) + " fields, got " +
                                   std::to_string(fields.size()));
    }
    Instance d;
    d.seq = seq_;
    d.features.reserve(feature_idx_.size());
    for (auto i : feature_idx_) {
      double v = 0;
      if (!parse_double(fields[i], v) || !std::isfinite(v)) {
        throw RowError(line_no_, "column '" + columns_[i] + "': cannot parse '" + fields[i] + "' as a number");
      }
      d.features.push_back(v);
    }
    d.label = map_value(fields[label_idx_], schema_.favorable_value, schema_.unfavorable_value,
                        schema_.label_column)
                  ? Label::kFavorable
                  : Label::kUnfavorable;
    d.sensitive = map_value(fields[sensitive_idx_], schema_.privileged_value, schema_.unprivileged_value,
                            schema_.sensitive_column)
                      ? Group::kPrivileged
                      : Group::kUnprivileged;
    ++seq_;
    return d;
  }

  bool map_value(const std::string& v, const std::string& positive, const std::string& negative,
                 const std::string& column) const {
    if (v.empty()) throw ValueError("empty value in column '" + column + "'");
    if (v == positive) return true;
    if (!negative.empty() && v != negative) {
      throw ValueError("unknown value '" + v + "' in column '" + column + "'");
    }
    return false;
  }

  CsvSchema schema_;
  std::ifstream in_;
  std::vector<std::string> columns_;
  std::size_t sensitive_idx_ = 0;
  std::size_t label_idx_ = 0;
  std::vector<std::size_t> feature_idx_;
  mutable std::vector<std::string> names_;
  std::size_t line_no_ = 0;
  std::uint64_t seq_ = 0;
  std::size_t skipped_ = 0;
};

inline std::vector<Instance> load_csv(const std::string& path, const CsvSchema& schema) {
  CsvStream s(path, schema);
  std::vector<Instance> out;
  while (auto d = s.next()) out.push_back(std::move(*d));
  return out;
}

// Wraps an in-memory instance list; convenient for tests and replays.
class VectorSource : public InstanceSource {
 public:
  explicit VectorSource(std::vector<Instance> data) : data_(std::move(data)) {}
  std::optional<Instance> next() override {
    if (pos_ >= data_.size()) return std::nullopt;
    return data_[pos_++];
  }

 private:
  std::vector<Instance> data_;
  std::size_t pos_ = 0;
};

}  // namespace fs2
