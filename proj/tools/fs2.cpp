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


// fs2: command-line front end for the stream engine and the FBU evaluator.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fs2/harness.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::map<std::string, std::string> named;
};

void add_common(CLI::App* app, CommonFlags& f, const std::vector<std::pair<std::string, std::string>>& keys) {
  app->add_option("-c,--config", f.config, "key = value configuration file");
  app->add_option("--set", f.sets, "override any configuration key (key=value)");
  for (const auto& [flag, key] : keys) {
    app->add_option("--" + flag, f.named[key], "sets '" + key + "'");
  }
}

fs2::KeyValueConfig layered(const CommonFlags& f) {
  fs2::KeyValueConfig kv;
  if (!f.config.empty()) kv = fs2::KeyValueConfig::load(f.config);
  for (const auto& [key, value] : f.named) {
    if (!value.empty()) kv.set(key, value);
  }
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw fs2::UsageError("--set expects key=value, got '" + s + "'");
    kv.set(fs2::trim(s.substr(0, eq)), fs2::trim(s.substr(eq + 1)));
  }
  return kv;
}

const std::vector<std::pair<std::string, std::string>> kRunKeys = {
    {"technique", "technique"}, {"learner", "learner"},   {"seeds", "seeds"},         {"out", "out"},
    {"source", "source"},       {"csv", "csv.path"},      {"length", "stream.length"}, {"lambda", "fs2.lambda"},
    {"p1", "fs2.p1"},           {"f1", "fs2.f1"},          {"delta", "fs2.delta"},      {"min-size", "fs2.min_size"},
    {"max-window", "fs2.max_window"}, {"write-steps", "write_steps"}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FS2 fair rebalancing for biased data streams, with the FBU evaluator"};
  app.require_subcommand(1);

  CommonFlags run_f, fbu_f, study_f, gen_f, inspect_f;
  auto* run = app.add_subcommand("run", "prequential run per seed");
  add_common(run, run_f, kRunKeys);

  auto* fbu = app.add_subcommand("fbu", "FBU comparison of several techniques");
  auto fbu_keys = kRunKeys;
  fbu_keys.push_back({"techniques", "techniques"});
  fbu_keys.push_back({"fairness", "fbu.fairness"});
  fbu_keys.push_back({"performance", "fbu.performance"});
  fbu_keys.push_back({"constant", "fbu.constant"});
  fbu_keys.push_back({"original", "fbu.original"});
  add_common(fbu, fbu_f, fbu_keys);
  std::vector<std::string> log_args;
  std::string original_log;
  fbu->add_option("--log", log_args, "external prediction log (name=path); skips the runs");
  fbu->add_option("--original-log", original_log, "original model's prediction log for --log mode");

  auto* study = app.add_subcommand("study", "decay, window or drift-recovery study");
  auto study_keys = kRunKeys;
  study_keys.push_back({"kind", "study.kind"});
  study_keys.push_back({"grid", "study.grid"});
  add_common(study, study_f, study_keys);

  auto* gen = app.add_subcommand("synth-gen", "write the synthetic stream as CSV");
  add_common(gen, gen_f, {{"seed", "stream.seed"}, {"length", "stream.length"}});
  std::string gen_output;
  gen->add_option("-o,--output", gen_output, "CSV path (default: stdout)");

  auto* inspect = app.add_subcommand("inspect", "print the effective configuration");
  add_common(inspect, inspect_f, {});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      const auto spec = fs2::spec_from(layered(run_f));
      fs2::cmd_run(spec, &std::cerr);
    } else if (fbu->parsed()) {
      const auto kv = layered(fbu_f);
      const auto spec = fs2::spec_from(kv);
      if (log_args.empty()) {
        fs2::cmd_fbu(spec, &std::cerr);
      } else {
        if (original_log.empty()) throw fs2::UsageError("--log needs --original-log");
        const auto read = [](const std::string& path) {
          std::ifstream f(path);
          if (!f) throw fs2::UsageError("cannot open prediction log '" + path + "'");
          return fs2::read_prediction_log(f);
        };
        fs2::FbuRun r;
        r.seed = spec.seeds.front();
        r.original = read(original_log);
        for (const auto& a : log_args) {
          const auto eq = a.find('=');
          if (eq == std::string::npos) throw fs2::UsageError("--log expects name=path, got '" + a + "'");
          r.techniques.emplace_back(a.substr(0, eq), read(a.substr(eq + 1)));
        }
        const auto rep = fs2::fbu_report({r}, spec.fbu);
        fs2::write_fbu_outputs(fs2::prepare_dir(spec.out), rep, "original", spec.fbu);
      }
    } else if (study->parsed()) {
      fs2::cmd_study(fs2::spec_from(layered(study_f)), &std::cerr);
    } else if (gen->parsed()) {
      const auto kv = layered(gen_f);
      kv.require_known(fs2::stream_config_keys(), {"stream.drift."});
      fs2::StreamConfig c;
      try {
        c = fs2::stream_config_from(kv, fs2::canonical_stream_config(kv.get_uint("stream.seed", 1)));
      } catch (const fs2::UsageError&) {
        throw;
      } catch (const fs2::Error& e) {
        throw fs2::UsageError(std::string("invalid configuration: ") + e.what());
      }
      if (gen_output.empty()) {
        fs2::write_synthetic_csv(std::cout, c);
      } else {
        std::ofstream f(gen_output);
        if (!f) throw fs2::Error("cannot write '" + gen_output + "'");
        fs2::write_synthetic_csv(f, c);
      }
    } else if (inspect->parsed()) {
      fs2::write_spec(std::cout, fs2::spec_from(layered(inspect_f)));
    }
  } catch (const fs2::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
