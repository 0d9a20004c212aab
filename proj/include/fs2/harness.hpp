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
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fs2/config.hpp"
#include "fs2/core.hpp"
#include "fs2/fbu.hpp"
#include "fs2/learners.hpp"
#include "fs2/metrics.hpp"
#include "fs2/pipeline.hpp"
#include "fs2/stream.hpp"
#include "json.hpp"

namespace fs2 {

using Json = nlohmann::ordered_json;

enum class StudyKind { kDecay, kWindow, kDriftRecovery };

inline std::string_view to_string(StudyKind k) {
  switch (k) {
    case StudyKind::kDecay: return "decay";
    case StudyKind::kWindow: return "window";
    case StudyKind::kDriftRecovery: return "drift-recovery";
  }
  return "?";
}

inline StudyKind parse_study_kind(std::string_view s) {
  if (s == "decay") return StudyKind::kDecay;
  if (s == "window") return StudyKind::kWindow;
  if (s == "drift-recovery") return StudyKind::kDriftRecovery;
  throw UsageError("unknown study kind '" + std::string(s) + "'");
}

struct DipRecoveryParams {
  // Tumbling window length for the balanced-accuracy series.
  std::uint64_t window = 500;
  // Span before the drift averaged into the reference level.
  std::uint64_t pre_span = 10000;
  // Span after the drift searched for the trough.
  std::uint64_t post_span = 5000;
  double min_dip = 0.05;
  double recovery_tolerance = 0.03;
};

struct ExperimentSpec {
  std::string source = "synthetic";
  StreamConfig stream = canonical_stream_config(1);
  std::string csv_path;
  CsvSchema csv;
  Technique technique = Technique::kFs2;
  std::vector<Technique> techniques = {Technique::kFs2, Technique::kNoRebalance, Technique::kClassOnly};
  std::string learner = "ht";
  HoeffdingTreeParams tree;
  FS2Config fs2;
  std::vector<std::uint64_t> seeds = {1};
  std::string out = "out";
  bool write_steps = true;
  FbuOptions fbu;
  Technique fbu_original = Technique::kNoRebalance;
  StudyKind study = StudyKind::kDecay;
  std::vector<double> study_grid;
  DipRecoveryParams dip;

  void validate() const {
    if (source != "synthetic" && source != "csv") throw UsageError("invalid value for key 'source': " + source);
    if (source == "csv" && csv_path.empty()) throw UsageError("missing key 'csv.path'");
    if (learner != "ht" && learner != "nb") throw UsageError("invalid value for key 'learner': " + learner);
    if (seeds.empty()) throw UsageError("invalid value for key 'seeds': at least one seed required");
    if (out.empty()) throw UsageError("invalid value for key 'out': empty");
    if (dip.window == 0) throw UsageError("invalid value for key 'study.ba_window': must be positive");
    stream.validate();
    fs2.validate();
  }
};

inline const std::set<std::string>& spec_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k = {
        "source", "csv.path", "csv.sensitive_column", "csv.label_column", "csv.favorable_value",
        "csv.privileged_value", "csv.unfavorable_value", "csv.unprivileged_value", "csv.ignore_columns",
        "csv.strict", "technique", "techniques", "learner", "learner.grace_period",
        "learner.split_confidence", "learner.tie_threshold", "learner.split_candidates", "fs2.min_size",
        "fs2.p1", "fs2.f1", "fs2.lambda", "fs2.delta", "fs2.max_window", "fs2.max_rounds", "fs2.k_min",
        "fs2.k_max", "fs2.k_neighbors", "fs2.max_cluster_samples", "fs2.recluster_interval", "seeds", "out",
        "write_steps", "fbu.fairness", "fbu.performance", "fbu.constant", "fbu.original", "study.kind",
        "study.grid", "study.ba_window", "study.pre_span", "study.post_span", "study.min_dip",
        "study.recovery_tolerance"};
    for (const auto& s : stream_config_keys()) k.insert(s);
    return k;
  }();
  return keys;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& part : split(s, ',')) {
    const std::string t = trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

// "1,2,5" or "1-5" or a mix of both.
inline std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split_list(s)) {
    const auto dash = part.find('-');
    std::uint64_t a = 0, b = 0;
    if (dash == std::string::npos) {
      if (!parse_uint(part, a)) throw UsageError("invalid value for key 'seeds': '" + part + "'");
      out.push_back(a);
    } else {
      if (!parse_uint(part.substr(0, dash), a) || !parse_uint(part.substr(dash + 1), b) || b < a) {
        throw UsageError("invalid value for key 'seeds': '" + part + "'");
      }
      for (std::uint64_t x = a; x <= b; ++x) out.push_back(x);
    }
  }
  if (out.empty()) throw UsageError("invalid value for key 'seeds': at least one seed required");
  return out;
}

inline ExperimentSpec spec_from(const KeyValueConfig& kv) {
  kv.require_known(spec_keys(), {"stream.drift."});
  ExperimentSpec s;
  const auto wrap = [](const std::string& key, auto&& f) {
    try {
      f();
    } catch (const UsageError&) {
      throw;
    } catch (const Error& e) {
      throw UsageError("invalid value for key '" + key + "': " + e.what());
    }
  };
  s.source = kv.get_string("source", s.source);
  s.csv_path = kv.get_string("csv.path", s.csv_path);
  s.csv.sensitive_column = kv.get_string("csv.sensitive_column", s.csv.sensitive_column);
  s.csv.label_column = kv.get_string("csv.label_column", s.csv.label_column);
  s.csv.favorable_value = kv.get_string("csv.favorable_value", s.csv.favorable_value);
  s.csv.privileged_value = kv.get_string("csv.privileged_value", s.csv.privileged_value);
  s.csv.unfavorable_value = kv.get_string("csv.unfavorable_value", s.csv.unfavorable_value);
  s.csv.unprivileged_value = kv.get_string("csv.unprivileged_value", s.csv.unprivileged_value);
  if (kv.has("csv.ignore_columns")) s.csv.ignore_columns = split_list(kv.get_string("csv.ignore_columns", ""));
  s.csv.strict = kv.get_bool("csv.strict", s.csv.strict);

  if (kv.has("technique")) wrap("technique", [&] { s.technique = parse_technique(kv.get_string("technique", "")); });
  if (kv.has("techniques")) {
    wrap("techniques", [&] {
      s.techniques.clear();
      for (const auto& t : split_list(kv.get_string("techniques", ""))) s.techniques.push_back(parse_technique(t));
    });
  }
  s.learner = kv.get_string("learner", s.learner);
  s.tree.grace_period = kv.get_uint("learner.grace_period", s.tree.grace_period);
  s.tree.split_confidence = kv.get_double("learner.split_confidence", s.tree.split_confidence);
  s.tree.tie_threshold = kv.get_double("learner.tie_threshold", s.tree.tie_threshold);
  s.tree.split_candidates = kv.get_uint("learner.split_candidates", s.tree.split_candidates);

  auto& f = s.fs2;
  f.min_size = kv.get_uint("fs2.min_size", f.min_size);
  f.p1 = kv.get_double("fs2.p1", f.p1);
  f.f1 = kv.get_double("fs2.f1", f.f1);
  f.lambda = kv.get_double("fs2.lambda", f.lambda);
  f.delta = kv.get_double("fs2.delta", f.delta);
  f.max_window = kv.get_uint("fs2.max_window", f.max_window);
  f.max_rounds = kv.get_uint("fs2.max_rounds", f.max_rounds);
  f.sampler.k_min = kv.get_uint("fs2.k_min", f.sampler.k_min);
  f.sampler.k_max = kv.get_uint("fs2.k_max", f.sampler.k_max);
  f.sampler.k_neighbors = kv.get_uint("fs2.k_neighbors", f.sampler.k_neighbors);
  f.sampler.max_cluster_samples = kv.get_uint("fs2.max_cluster_samples", f.sampler.max_cluster_samples);
  f.sampler.recluster_interval = kv.get_uint("fs2.recluster_interval", f.sampler.recluster_interval);

  if (kv.has("seeds")) s.seeds = parse_seed_list(kv.get_string("seeds", ""));
  s.out = kv.get_string("out", s.out);
  s.write_steps = kv.get_bool("write_steps", s.write_steps);

  if (kv.has("fbu.fairness")) {
    wrap("fbu.fairness", [&] {
      s.fbu.fairness.clear();
      for (const auto& m : split_list(kv.get_string("fbu.fairness", ""))) {
        s.fbu.fairness.push_back(parse_fairness_metric(m));
      }
    });
  }
  if (kv.has("fbu.performance")) {
    wrap("fbu.performance", [&] {
      s.fbu.performance.clear();
      for (const auto& m : split_list(kv.get_string("fbu.performance", ""))) {
        s.fbu.performance.push_back(parse_performance_metric(m));
      }
    });
  }
  if (s.fbu.fairness.empty() || s.fbu.performance.empty()) {
    throw UsageError("invalid value for key 'fbu.fairness': metric lists must be non-empty");
  }
  const std::string constant = kv.get_string("fbu.constant", "majority");
  if (constant == "favorable") s.fbu.constant = Label::kFavorable;
  else if (constant == "unfavorable") s.fbu.constant = Label::kUnfavorable;
  else if (constant != "majority") throw UsageError("invalid value for key 'fbu.constant': " + constant);
  if (kv.has("fbu.original")) {
    wrap("fbu.original", [&] { s.fbu_original = parse_technique(kv.get_string("fbu.original", "")); });
  }

  if (kv.has("study.kind")) wrap("study.kind", [&] { s.study = parse_study_kind(kv.get_string("study.kind", "")); });
  if (!kv.get_string("study.grid", "").empty()) s.study_grid = kv.get_vector("study.grid", s.study_grid);
  s.dip.window = kv.get_uint("study.ba_window", s.dip.window);
  s.dip.pre_span = kv.get_uint("study.pre_span", s.dip.pre_span);
  s.dip.post_span = kv.get_uint("study.post_span", s.dip.post_span);
  s.dip.min_dip = kv.get_double("study.min_dip", s.dip.min_dip);
  s.dip.recovery_tolerance = kv.get_double("study.recovery_tolerance", s.dip.recovery_tolerance);

  wrap("stream", [&] { s.stream = stream_config_from(kv, s.stream); });
  s.fbu.lambda = s.fs2.lambda;
  try {
    s.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
  return s;
}

inline std::string join_techniques(const std::vector<Technique>& ts) {
  std::string out;
  for (std::size_t i = 0; i < ts.size(); ++i) out += (i ? "," : "") + std::string(to_string(ts[i]));
  return out;
}

// Every key with its current value, in config-file syntax.
inline void write_spec(std::ostream& os, const ExperimentSpec& s) {
  os.precision(17);
  os << "source = " << s.source << "\n";
  os << "csv.path = " << s.csv_path << "\n";
  os << "csv.sensitive_column = " << s.csv.sensitive_column << "\n";
  os << "csv.label_column = " << s.csv.label_column << "\n";
  os << "csv.favorable_value = " << s.csv.favorable_value << "\n";
  os << "csv.privileged_value = " << s.csv.privileged_value << "\n";
  os << "csv.unfavorable_value = " << s.csv.unfavorable_value << "\n";
  os << "csv.unprivileged_value = " << s.csv.unprivileged_value << "\n";
  os << "csv.ignore_columns = ";
  for (std::size_t i = 0; i < s.csv.ignore_columns.size(); ++i) os << (i ? "," : "") << s.csv.ignore_columns[i];
  os << "\n";
  os << "csv.strict = " << (s.csv.strict ? "true" : "false") << "\n";
  os << "technique = " << to_string(s.technique) << "\n";
  os << "techniques = " << join_techniques(s.techniques) << "\n";
  os << "learner = " << s.learner << "\n";
  os << "learner.grace_period = " << s.tree.grace_period << "\n";
  os << "learner.split_confidence = " << s.tree.split_confidence << "\n";
  os << "learner.tie_threshold = " << s.tree.tie_threshold << "\n";
  os << "learner.split_candidates = " << s.tree.split_candidates << "\n";
  os << "fs2.min_size = " << s.fs2.min_size << "\n";
  os << "fs2.p1 = " << s.fs2.p1 << "\n";
  os << "fs2.f1 = " << s.fs2.f1 << "\n";
  os << "fs2.lambda = " << s.fs2.lambda << "\n";
  os << "fs2.delta = " << s.fs2.delta << "\n";
  os << "fs2.max_window = " << s.fs2.max_window << "\n";
  os << "fs2.max_rounds = " << s.fs2.max_rounds << "\n";
  os << "fs2.k_min = " << s.fs2.sampler.k_min << "\n";
  os << "fs2.k_max = " << s.fs2.sampler.k_max << "\n";
  os << "fs2.k_neighbors = " << s.fs2.sampler.k_neighbors << "\n";
  os << "fs2.max_cluster_samples = " << s.fs2.sampler.max_cluster_samples << "\n";
  os << "fs2.recluster_interval = " << s.fs2.sampler.recluster_interval << "\n";
  os << "seeds = ";
  for (std::size_t i = 0; i < s.seeds.size(); ++i) os << (i ? "," : "") << s.seeds[i];
  os << "\n";
  os << "out = " << s.out << "\n";
  os << "write_steps = " << (s.write_steps ? "true" : "false") << "\n";
  os << "fbu.fairness = ";
  for (std::size_t i = 0; i < s.fbu.fairness.size(); ++i) os << (i ? "," : "") << to_string(s.fbu.fairness[i]);
  os << "\n";
  os << "fbu.performance = ";
  for (std::size_t i = 0; i < s.fbu.performance.size(); ++i) {
    os << (i ? "," : "") << to_string(s.fbu.performance[i]);
  }
  os << "\n";
  os << "fbu.constant = "
     << (!s.fbu.constant ? "majority" : (is_favorable(*s.fbu.constant) ? "favorable" : "unfavorable")) << "\n";
  os << "fbu.original = " << to_string(s.fbu_original) << "\n";
  os << "study.kind = " << to_string(s.study) << "\n";
  os << "study.grid = " << format_vector(s.study_grid) << "\n";
  os << "study.ba_window = " << s.dip.window << "\n";
  os << "study.pre_span = " << s.dip.pre_span << "\n";
  os << "study.post_span = " << s.dip.post_span << "\n";
  os << "study.min_dip = " << s.dip.min_dip << "\n";
  os << "study.recovery_tolerance = " << s.dip.recovery_tolerance << "\n";
  write_stream_config(os, s.stream);
}

inline std::unique_ptr<OnlineLearner> make_learner(const ExperimentSpec& s) {
  if (s.learner == "nb") return std::make_unique<GaussianNaiveBayes>();
  return std::make_unique<HoeffdingTree>(s.tree);
}

inline std::unique_ptr<InstanceSource> make_source(const ExperimentSpec& s, std::uint64_t seed) {
  if (s.source == "csv") return std::make_unique<CsvStream>(s.csv_path, s.csv);
  StreamConfig c = s.stream;
  c.seed = seed;
  return std::make_unique<SyntheticStream>(c);
}

struct RunResult {
  std::uint64_t seed = 0;
  Technique technique = Technique::kFs2;
  std::string learner;
  std::uint64_t steps = 0;
  ConfusionAccumulator confusion;
  FairnessValue cspd;
  FairnessValue ceod;
  std::optional<double> balanced_accuracy;
  std::optional<double> recall;
  std::vector<DriftEvent> drift_events;
  PipelineStats stats;
  PredictionLog log;
};

struct RunSinks {
  std::ostream* steps = nullptr;
  std::ostream* metrics = nullptr;
  std::ostream* drift = nullptr;
};

inline Json to_json(const DriftEvent& e) {
  Json j;
  j["seq"] = e.seq;
  j["detector"] = e.detector;
  j["level"] = e.level == DriftLevel::kChange ? "change" : "warning";
  j["window_length_before"] = e.window_len_before;
  j["window_length_after"] = e.window_len_after;
  return j;
}

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline void write_metrics_header(std::ostream& os) {
  os << "seq,balanced_accuracy,recall,cspd,ceod,warmup_flag\n";
}

inline RunResult run_once(const ExperimentSpec& spec, Technique technique, std::uint64_t seed,
                          const RunSinks& sinks = {}) {
  FS2Config cfg = spec.fs2;
  cfg.seed = seed;
  Pipeline pipe(cfg, technique, make_learner(spec));
  auto source = make_source(spec, seed);
  RunResult r;
  r.seed = seed;
  r.technique = technique;
  r.learner = spec.learner;
  if (sinks.metrics) write_metrics_header(*sinks.metrics);
  std::uint64_t last_seq = 0;
  while (true) {
    std::optional<Instance> d;
    StepOutcome o;
    try {
      d = source->next();
      if (!d) break;
      last_seq = d->seq;
      o = pipe.step(*d);
    } catch (const RowError&) {
      throw;
    } catch (const Error& e) {
      throw Error("seq " + std::to_string(last_seq) + ": " + e.what());
    }
    r.log.push_back({o.sensitive, o.truth, o.prediction});
    for (const auto& e : o.drift_events) {
      r.drift_events.push_back(e);
      if (sinks.drift) *sinks.drift << to_json(e).dump() << "\n";
    }
    if (sinks.metrics) {
      auto& m = *sinks.metrics;
      m << o.seq << ',';
      if (o.balanced_accuracy) m << *o.balanced_accuracy;
      m << ',';
      if (o.recall) m << *o.recall;
      m << ',' << o.cspd.value << ',' << o.ceod.value << ',' << ((o.cspd.warmup || o.ceod.warmup) ? 1 : 0)
        << '\n';
    }
    if (sinks.steps) {
      Json j;
      j["seq"] = o.seq;
      j["sensitive"] = is_privileged(o.sensitive) ? 1 : 0;
      j["truth"] = to_int(o.truth);
      j["prediction"] = to_int(o.prediction);
      j["cold_start"] = o.cold_start;
      j["cspd"] = o.cspd.value;
      j["cspd_warmup"] = o.cspd.warmup;
      j["ceod"] = o.ceod.value;
      j["ceod_warmup"] = o.ceod.warmup;
      j["balanced_accuracy"] = optional_json(o.balanced_accuracy);
      j["recall"] = optional_json(o.recall);
      j["window_length"] = o.window_length;
      j["synthetics"] = o.synthetics;
      j["rounds"] = o.rounds;
      j["rebalance_attempted"] = o.rebalance_attempted;
      j["rebalance_completed"] = o.rebalance_completed;
      j["balR"] = optional_json(o.balR);
      j["fairR"] = optional_json(o.fairR);
      if (!o.warning.empty()) j["warning"] = o.warning;
      *sinks.steps << j.dump() << "\n";
    }
    r.cspd = o.cspd;
    r.ceod = o.ceod;
    r.balanced_accuracy = o.balanced_accuracy;
    r.recall = o.recall;
  }
  r.steps = pipe.stats().steps;
  r.confusion = pipe.confusion();
  r.stats = pipe.stats();
  return r;
}

inline Json summary_json(const RunResult& r) {
  Json j;
  j["technique"] = std::string(to_string(r.technique));
  j["learner"] = r.learner;
  j["seed"] = r.seed;
  j["steps"] = r.steps;
  j["balanced_accuracy"] = optional_json(r.balanced_accuracy);
  j["recall"] = optional_json(r.recall);
  j["cspd"] = r.cspd.value;
  j["cspd_warmup"] = r.cspd.warmup;
  j["ceod"] = r.ceod.value;
  j["ceod_warmup"] = r.ceod.warmup;
  j["total_synthetics"] = r.stats.total_synthetics();
  Json arrived, synth;
  for (const auto g : kAllSubgroups) {
    arrived[std::string(to_string(g))] = r.stats.arrived[index_of(g)];
    synth[std::string(to_string(g))] = r.stats.synthesized[index_of(g)];
  }
  j["arrived"] = arrived;
  j["synthesized"] = synth;
  j["rebalances_completed"] = r.stats.completed_rebalances;
  j["rebalances_aborted"] = r.stats.aborted_rebalances;
  j["rebalances_capped"] = r.stats.capped_rebalances;
  j["reclusterings"] = r.stats.reclusterings;
  std::uint64_t changes = 0;
  Json events = Json::array();
  for (const auto& e : r.drift_events) {
    if (e.level == DriftLevel::kChange) ++changes;
    events.push_back(to_json(e));
  }
  j["drift_changes"] = changes;
  j["drift_events"] = events;
  return j;
}

// Tumbling-window balanced accuracy; empty where a window lacks a class.
struct WindowedValue {
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  std::optional<double> value;
};

inline std::vector<WindowedValue> windowed_balanced_accuracy(const PredictionLog& log, std::uint64_t w) {
  if (w == 0) throw ParameterError("window must be positive");
  std::vector<WindowedValue> out;
  for (std::uint64_t start = 0; start + w <= log.size(); start += w) {
    ConfusionAccumulator c;
    for (std::uint64_t i = start; i < start + w; ++i) c.add(log[i].truth, log[i].prediction);
    WindowedValue v{start, start + w, std::nullopt};
    if (c.tp + c.fn > 0 && c.tn + c.fp > 0) v.value = balanced_accuracy(c);
    out.push_back(v);
  }
  return out;
}

struct DipRecovery {
  bool valid = false;
  double pre_mean = 0.0;
  double trough = 0.0;
  std::uint64_t trough_start = 0;
  std::optional<std::uint64_t> recovery_start;
  bool dipped = false;
  bool recovered = false;
  bool detected() const { return dipped && recovered; }
};

// Reference level: windows inside [drift - pre_span, drift), skipping the
// first window of the stream. Trough: lowest window starting in
// [drift, drift + post_span). Recovery: a later window back within the
// tolerance of the reference.
inline DipRecovery detect_dip_recovery(const std::vector<WindowedValue>& series, std::uint64_t drift_seq,
                                       const DipRecoveryParams& p) {
  DipRecovery r;
  const std::uint64_t pre_lo = drift_seq > p.pre_span ? drift_seq - p.pre_span : 0;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : series) {
    if (v.start == 0 || !v.value || v.start < pre_lo || v.end > drift_seq) continue;
    sum += *v.value;
    ++n;
  }
  std::optional<std::size_t> trough;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& v = series[i];
    if (!v.value || v.start < drift_seq || v.start >= drift_seq + p.post_span) continue;
    if (!trough || *v.value < *series[*trough].value) trough = i;
  }
  if (n == 0 || !trough) return r;
  r.valid = true;
  r.pre_mean = sum / static_cast<double>(n);
  r.trough = *series[*trough].value;
  r.trough_start = series[*trough].start;
  r.dipped = r.pre_mean - r.trough >= p.min_dip;
  for (std::size_t i = *trough + 1; i < series.size(); ++i) {
    if (series[i].value && *series[i].value >= r.pre_mean - p.recovery_tolerance) {
      r.recovery_start = series[i].start;
      break;
    }
  }
  r.recovered = r.recovery_start.has_value();
  return r;
}

inline std::filesystem::path prepare_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec || !std::filesystem::is_directory(p)) {
    throw UsageError("invalid value for key 'out': cannot create directory '" + p.string() + "'");
  }
  return p;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write '" + p.string() + "'");
  f.precision(17);
  return f;
}

// `run`: one directory per seed with steps.jsonl, metrics.csv, drift.jsonl
// and summary.json, plus runs.csv across seeds.
inline std::vector<RunResult> cmd_run(const ExperimentSpec& spec, std::ostream* progress = nullptr) {
  const auto root = prepare_dir(spec.out);
  std::vector<RunResult> results;
  auto runs = open_out(root / "runs.csv");
  runs << "seed,technique,balanced_accuracy,recall,cspd,ceod,total_synthetics,drift_changes\n";
  for (const auto seed : spec.seeds) {
    const auto dir = prepare_dir(root / ("seed-" + std::to_string(seed)));
    auto metrics = open_out(dir / "metrics.csv");
    auto drift = open_out(dir / "drift.jsonl");
    std::ofstream steps;
    RunSinks sinks{nullptr, &metrics, &drift};
    if (spec.write_steps) {
      steps = open_out(dir / "steps.jsonl");
      sinks.steps = &steps;
    }
    RunResult r = run_once(spec, spec.technique, seed, sinks);
    const Json summary = summary_json(r);
    auto sf = open_out(dir / "summary.json");
    sf << summary.dump(2) << "\n";
    runs << seed << ',' << to_string(spec.technique) << ',';
    if (r.balanced_accuracy) runs << *r.balanced_accuracy;
    runs << ',';
    if (r.recall) runs << *r.recall;
    runs << ',' << r.cspd.value << ',' << r.ceod.value << ',' << r.stats.total_synthetics() << ','
         << summary["drift_changes"].get<std::uint64_t>() << '\n';
    if (progress) {
      *progress << "seed " << seed << " " << to_string(spec.technique) << ": balanced_accuracy "
                << (r.balanced_accuracy ? *r.balanced_accuracy : NAN) << ", cspd " << r.cspd.value << ", ceod "
                << r.ceod.value << ", synthetics " << r.stats.total_synthetics() << "\n";
    }
    r.log.clear();
    r.log.shrink_to_fit();
    results.push_back(std::move(r));
  }
  return results;
}

inline Json fbu_json(const FbuReport& rep, const std::string& original, const FbuOptions& opt) {
  Json j;
  j["lambda"] = rep.lambda;
  j["original"] = original;
  Json fm = Json::array(), pm = Json::array();
  for (const auto m : opt.fairness) fm.push_back(std::string(to_string(m)));
  for (const auto m : opt.performance) pm.push_back(std::string(to_string(m)));
  j["fairness_metrics"] = fm;
  j["performance_metrics"] = pm;
  j["constant_label"] =
      !opt.constant ? "majority" : (is_favorable(*opt.constant) ? "favorable" : "unfavorable");
  j["runs"] = rep.baselines.empty() ? 0 : rep.baselines.back().run + 1;
  j["clamped_cases"] = rep.clamped_cases;
  Json techs = Json::array();
  for (const auto& t : rep.techniques) {
    Json tj;
    tj["name"] = t.name;
    tj["cases"] = t.cases;
    Json regions;
    for (const auto r : kAllRegions) {
      const std::size_t i = static_cast<std::size_t>(r) - 1;
      regions[std::string(to_string(r))] = Json{{"count", t.counts[i]}, {"percent", t.percentages[i]}};
    }
    tj["regions"] = regions;
    tj["region2_areas"] = t.region2_areas;
    tj["mean_region2_area"] = t.mean_region2_area();
    techs.push_back(tj);
  }
  j["techniques"] = techs;
  Json cases = Json::array();
  for (const auto& c : rep.cases) {
    Json cj;
    cj["run"] = c.run;
    cj["seed"] = c.seed;
    cj["technique"] = c.technique;
    cj["fairness"] = std::string(to_string(c.fairness));
    cj["performance"] = std::string(to_string(c.performance));
    cj["bias"] = c.point.bias;
    cj["performance_value"] = c.point.performance;
    cj["original_bias"] = c.original.bias;
    cj["original_performance"] = c.original.performance;
    cj["region"] = std::string(to_string(c.region));
    cj["clamped"] = c.clamped;
    cj["region2_area"] = c.area ? Json(*c.area) : Json(nullptr);
    cases.push_back(cj);
  }
  j["cases"] = cases;
  return j;
}

// Plot-ready rows: baseline polylines first, then technique points.
inline void write_fbu_points(std::ostream& os, const FbuReport& rep) {
  os << "kind,run,seed,fairness,performance,name,bias,performance_value,region\n";
  for (const auto& b : rep.baselines) {
    for (std::size_t i = 0; i < b.baseline.points.size(); ++i) {
      const std::string name = i == 0 ? "F_ori" : "F_" + std::to_string(10 * i);
      os << "baseline," << b.run << ',' << b.seed << ',' << to_string(b.fairness) << ','
         << to_string(b.performance) << ',' << name << ',' << b.baseline.points[i].bias << ','
         << b.baseline.points[i].performance << ",\n";
    }
  }
  for (const auto& c : rep.cases) {
    os << "technique," << c.run << ',' << c.seed << ',' << to_string(c.fairness) << ',' << to_string(c.performance)
       << ',' << c.technique << ',' << c.point.bias << ',' << c.point.performance << ',' << to_string(c.region)
       << '\n';
  }
}

inline void write_fbu_outputs(const std::filesystem::path& root, const FbuReport& rep, const std::string& original,
                              const FbuOptions& opt) {
  auto jf = open_out(root / "fbu_report.json");
  jf << fbu_json(rep, original, opt).dump(2) << "\n";
  auto pf = open_out(root / "fbu_points.csv");
  write_fbu_points(pf, rep);
}

// `fbu`: every listed technique and the original run on identical per-seed
// streams; prediction logs are kept under logs/.
inline FbuReport cmd_fbu(const ExperimentSpec& spec, std::ostream* progress = nullptr) {
  if (spec.techniques.size() < 2) {
    throw UsageError("invalid value for key 'techniques': fbu needs at least two techniques");
  }
  const auto root = prepare_dir(spec.out);
  std::vector<FbuRun> runs;
  for (const auto seed : spec.seeds) {
    const auto logs = prepare_dir(root / "logs" / ("seed-" + std::to_string(seed)));
    FbuRun run;
    run.seed = seed;
    std::vector<std::pair<Technique, PredictionLog>> done;
    const auto log_for = [&](Technique t) -> const PredictionLog& {
      for (const auto& [dt, log] : done) {
        if (dt == t) return log;
      }
      RunResult r = run_once(spec, t, seed);
      if (progress) {
        *progress << "seed " << seed << " " << to_string(t) << ": cspd " << r.cspd.value << ", ceod "
                  << r.ceod.value << "\n";
      }
      auto f = open_out(logs / (std::string(to_string(t)) + ".csv"));
      write_prediction_log(f, r.log);
      done.emplace_back(t, std::move(r.log));
      return done.back().second;
    };
    run.original = log_for(spec.fbu_original);
    for (const auto t : spec.techniques) run.techniques.emplace_back(std::string(to_string(t)), log_for(t));
    runs.push_back(std::move(run));
  }
  FbuReport rep = fbu_report(runs, spec.fbu);
  write_fbu_outputs(root, rep, std::string(to_string(spec.fbu_original)), spec.fbu);
  return rep;
}

// Imbalance schedules for the decay study, as favorable-class probability
// over the stream.
inline std::vector<ImbalanceKnot> imbalance_scenario(const std::string& name, std::uint64_t length) {
  if (name == "fixed") return {{0, 0.3}};
  if (name == "increasing") return {{0, 0.5}, {length, 0.1}};
  if (name == "decreasing") return {{0, 0.1}, {length, 0.5}};
  if (name == "fluctuating") {
    return {{0, 0.3}, {length / 4, 0.1}, {length / 2, 0.5}, {3 * length / 4, 0.1}, {length, 0.3}};
  }
  throw UsageError("unknown imbalance scenario '" + name + "'");
}

inline const std::vector<std::string>& imbalance_scenarios() {
  static const std::vector<std::string> s = {"fixed", "increasing", "decreasing", "fluctuating"};
  return s;
}

inline std::vector<double> default_study_grid(StudyKind k) {
  switch (k) {
    case StudyKind::kDecay: return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    case StudyKind::kWindow: return {500, 1000, 2000, 5000, 10000};
    case StudyKind::kDriftRecovery: return {3.0};
  }
  return {};
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline void write_final_metrics(std::ostream& os, const std::string& param, std::uint64_t seed,
                                const RunResult& r) {
  const auto row = [&](const char* metric, double v) {
    os << param << ',' << seed << ',' << metric << ',' << v << '\n';
  };
  if (r.balanced_accuracy) row("balanced_accuracy", *r.balanced_accuracy);
  if (r.recall) row("recall", *r.recall);
  row("cspd", r.cspd.value);
  row("ceod", r.ceod.value);
  row("total_synthetics", static_cast<double>(r.stats.total_synthetics()));
}

// `study`: long-format study.csv (param, seed, metric, value). The
// drift-recovery study also writes the windowed series to drift_series.csv.
// Its grid values are drift magnitudes in units of the feature std.
inline void cmd_study(const ExperimentSpec& spec, std::ostream* progress = nullptr) {
  if (spec.source != "synthetic") throw UsageError("invalid value for key 'source': studies need synthetic");
  const auto grid = spec.study_grid.empty() ? default_study_grid(spec.study) : spec.study_grid;
  const auto root = prepare_dir(spec.out);
  auto csv = open_out(root / "study.csv");
  csv << "param,seed,metric,value\n";
  std::ofstream series;
  if (spec.study == StudyKind::kDriftRecovery) {
    series = open_out(root / "drift_series.csv");
    series << "param,seed,window_start,window_end,balanced_accuracy\n";
  }
  const auto note = [&](const std::string& param, std::uint64_t seed) {
    if (progress) *progress << "study " << to_string(spec.study) << " " << param << " seed " << seed << "\n";
  };
  for (const auto seed : spec.seeds) {
    for (const double g : grid) {
      ExperimentSpec s = spec;
      if (spec.study == StudyKind::kDecay) {
        if (!(g >= 0.0 && g <= 1.0)) throw UsageError("invalid value for key 'study.grid': lambda outside [0,1]");
        s.fs2.lambda = g;
        for (const auto& name : imbalance_scenarios()) {
          ExperimentSpec t = s;
          t.stream.imbalance = imbalance_scenario(name, t.stream.length);
          const std::string param = "lambda=" + format_number(g) + ";scenario=" + name;
          note(param, seed);
          write_final_metrics(csv, param, seed, run_once(t, t.technique, seed));
        }
        continue;
      }
      if (spec.study == StudyKind::kWindow) {
        if (!(g >= 1.0) || g != std::floor(g)) throw UsageError("invalid value for key 'study.grid': window size");
        s.fs2.max_window = static_cast<std::uint64_t>(g);
        const std::string param = "window=" + format_number(g);
        note(param, seed);
        write_final_metrics(csv, param, seed, run_once(s, s.technique, seed));
        continue;
      }
      // drift-recovery: a single mean shift of g std units at mid-stream.
      StreamConfig& c = s.stream;
      DriftPoint d;
      d.seq = c.length / 2;
      d.favorable_mean = c.favorable_mean;
      d.unfavorable_mean = c.unfavorable_mean;
      for (std::size_t j = 0; j < c.n_features; ++j) {
        d.favorable_mean[j] += g * c.favorable_std[j];
        d.unfavorable_mean[j] += g * c.unfavorable_std[j];
      }
      c.drift = {d};
      const std::string param = "shift=" + format_number(g);
      note(param, seed);
      const RunResult r = run_once(s, s.technique, seed);
      write_final_metrics(csv, param, seed, r);
      const auto ws = windowed_balanced_accuracy(r.log, s.dip.window);
      for (const auto& v : ws) {
        series << param << ',' << seed << ',' << v.start << ',' << v.end << ',';
        if (v.value) series << *v.value;
        series << '\n';
      }
      const DipRecovery dr = detect_dip_recovery(ws, d.seq, s.dip);
      const auto row = [&](const char* metric, double v) {
        csv << param << ',' << seed << ',' << metric << ',' << v << '\n';
      };
      row("drift_seq", static_cast<double>(d.seq));
      if (dr.valid) {
        row("pre_drift_ba", dr.pre_mean);
        row("trough_ba", dr.trough);
        row("trough_start", static_cast<double>(dr.trough_start));
        if (dr.recovery_start) row("recovery_start", static_cast<double>(*dr.recovery_start));
      }
      row("dip_then_recovery", dr.detected() ? 1.0 : 0.0);
    }
  }
}

// `synth-gen`: f0..f{n-1}, sensitive (1 privileged, 0 not), label (1/-1).
inline void write_synthetic_csv(std::ostream& os, const StreamConfig& c) {
  os.precision(17);
  for (std::size_t j = 0; j < c.n_features; ++j) os << 'f' << j << ',';
  os << "sensitive,label\n";
  SyntheticStream s(c);
  while (auto d = s.next()) {
    for (const double x : d->features) os << x << ',';
    os << (is_privileged(d->sensitive) ? 1 : 0) << ',' << to_int(d->label) << '\n';
  }
}

}  // namespace fs2
