// Copyright 2026 The PruneKit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prunekit/checkpoint.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/go.hpp"
#include "prunekit/lwp.hpp"
#include "prunekit/network.hpp"
#include "prunekit/pruning.hpp"
#include "prunekit/sparsity.hpp"
#include "prunekit/sr_harness.hpp"

namespace prunekit {

/// Ordered key=value settings for a command run. Order is preserved so that
/// echoed report headers are stable; later assignments to the same key win.
struct RunConfig {
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* find(const std::string& key) const {
    for (const auto& entry : entries) {
      if (entry.first == key) return &entry.second;
    }
    return nullptr;
  }
  bool has(const std::string& key) const { return find(key) != nullptr; }
  void set(const std::string& key, const std::string& value) {
    for (auto& entry : entries) {
      if (entry.first == key) {
        entry.second = value;
        return;
      }
    }
    entries.emplace_back(key, value);
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_double_token(const std::string& token, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double value = std::stod(token, &pos);
    if (pos != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse '" + token + "' as a number");
  }
}

inline long long parse_int_token(const std::string& token, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long long value = std::stoll(token, &pos);
    if (pos != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse '" + token + "' as an integer");
  }
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::size_t end = comma == std::string::npos ? text.size() : comma;
    out.push_back(trim(text.substr(pos, end - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  if (trim(text).empty()) throw ConfigError(what + ": empty list");
  std::vector<double> out;
  for (const std::string& token : split_list(text)) out.push_back(parse_double_token(token, what));
  return out;
}

inline std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  if (trim(text).empty()) throw ConfigError(what + ": empty list");
  std::vector<int> out;
  for (const std::string& token : split_list(text)) {
    out.push_back(static_cast<int>(parse_int_token(token, what)));
  }
  return out;
}

inline std::string format_double_list(const std::vector<double>& values, char sep) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f", values[i]);
    if (i > 0) out += sep;
    out += buf;
  }
  return out;
}

inline std::string format_int_list(const std::vector<int>& values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += sep;
    out += std::to_string(values[i]);
  }
  return out;
}

// Pulls typed values out of a RunConfig against a fixed key schema. Present
// keys echo the caller's literal text; absent keys echo their default, so
// the effective() config always lists every knob the run used.
class ConfigReader {
 public:
  explicit ConfigReader(const RunConfig& cfg) : cfg_(cfg) {}

  std::string get(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    const std::string* value = cfg_.find(key);
    const std::string out = value != nullptr ? *value : fallback;
    effective_.entries.emplace_back(key, out);
    return out;
  }

  std::string get_required(const std::string& key) {
    consumed_.insert(key);
    const std::string* value = cfg_.find(key);
    if (value == nullptr) throw ConfigError("missing required config key '" + key + "'");
    effective_.entries.emplace_back(key, *value);
    return *value;
  }

  double get_double(const std::string& key, const std::string& fallback) {
    return parse_double_token(get(key, fallback), key);
  }

  int get_int(const std::string& key, const std::string& fallback) {
    return static_cast<int>(parse_int_token(get(key, fallback), key));
  }

  std::uint32_t get_seed(const std::string& key, const std::string& fallback) {
    const long long value = parse_int_token(get(key, fallback), key);
    if (value < 0 || value > 0xFFFFFFFFLL) {
      throw ConfigError(key + ": seed " + std::to_string(value) + " out of 32-bit range");
    }
    return static_cast<std::uint32_t>(value);
  }

  std::vector<double> get_double_list(const std::string& key, const std::string& fallback) {
    return parse_double_list(get(key, fallback), key);
  }

  /// Rejects any key the command did not ask for.
  void finish() const {
    for (const auto& entry : cfg_.entries) {
      if (consumed_.count(entry.first) == 0) {
        throw ConfigError("unknown config key '" + entry.first + "'");
      }
    }
  }

  const RunConfig& effective() const { return effective_; }

 private:
  const RunConfig& cfg_;
  std::set<std::string> consumed_;
  RunConfig effective_;
};

inline std::string render_header(const char* command, const RunConfig& effective) {
  std::string out = std::string("# prunekit ") + command + "\n";
  for (const auto& entry : effective.entries) {
    out += "# " + entry.first + "=" + entry.second + "\n";
  }
  return out;
}

}  // namespace detail

/// Parses plain key=value text. '#' lines and blank lines are skipped; a
/// non-comment line without '=' is an error; the last assignment wins.
inline RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string::npos ? text.size() : nl;
    const std::string line = detail::trim(text.substr(pos, end - pos));
    ++line_no;
    if (!line.empty() && line[0] != '#') {
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(line_no) + " has no '=': " + line);
      }
      const std::string key = detail::trim(line.substr(0, eq));
      if (key.empty()) {
        throw ConfigError("config line " + std::to_string(line_no) + " has an empty key");
      }
      cfg.set(key, detail::trim(line.substr(eq + 1)));
    }
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  return parse_run_config(detail::read_file_bytes(path));
}

/// Reads the echoed `# key=value` lines back out of a report, stopping at
/// the first non-comment line. Feeding the result to the command that wrote
/// the report reproduces it byte for byte.
inline RunConfig parse_report_header(const std::string& report) {
  RunConfig cfg;
  std::size_t pos = 0;
  while (pos <= report.size()) {
    const std::size_t nl = report.find('\n', pos);
    const std::size_t end = nl == std::string::npos ? report.size() : nl;
    const std::string line = detail::trim(report.substr(pos, end - pos));
    if (line.empty() || line[0] != '#') break;
    const std::size_t eq = line.find('=');
    if (eq != std::string::npos) {
      const std::string key = detail::trim(line.substr(1, eq - 1));
      if (!key.empty()) cfg.set(key, detail::trim(line.substr(eq + 1)));
    }
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return cfg;
}

/// Adopts the environment's seed when the config gives none.
inline void apply_seed_fallback(RunConfig& cfg, const char* env_value) {
  if (env_value != nullptr && *env_value != '\0' && !cfg.has("seed")) {
    cfg.set("seed", env_value);
  }
}

inline ReducingFactor parse_factors(const std::string& text) {
  ReducingFactor r;
  r.values = detail::parse_double_list(text, "r");
  return r;
}

// ---------------------------------------------------------------------------
// Network spec files

inline nlohmann::json spec_to_json(const NetworkSpec& spec) {
  validate_spec(spec);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& d : spec.layers) {
    layers.push_back({{"n", d.n}, {"c", d.c}, {"h", d.h}, {"w", d.w}});
  }
  return {{"version", 1}, {"layers", layers}};
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  try {
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported spec version");
    for (const auto& entry : j.at("layers")) {
      spec.layers.push_back({entry.at("n").get<int>(), entry.at("c").get<int>(),
                             entry.at("h").get<int>(), entry.at("w").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed network spec: ") + e.what());
  }
  validate_spec(spec);
  return spec;
}

inline NetworkSpec load_spec(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(detail::read_file_bytes(path), nullptr, false);
  if (j.is_discarded()) throw FormatError("cannot parse JSON in " + path);
  return spec_from_json(j);
}

inline void save_spec(const NetworkSpec& spec, const std::string& path) {
  detail::write_file_bytes(path, spec_to_json(spec).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Commands

/// Kernel sparsity report as CSV, kernels in pruning order per layer.
inline std::string cmd_analyze(const std::string& checkpoint_path) {
  const Network net = load_checkpoint(checkpoint_path);
  std::string out = "# prunekit analyze\n# checkpoint=" + checkpoint_path + "\n";
  out += "layer,kernel,sparsity,rank\n";
  char row[64];
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const SparsityReport report = build_report(net.layers[l].kernels, static_cast<int>(l));
    for (std::size_t rank = 0; rank < report.entries.size(); ++rank) {
      std::snprintf(row, sizeof(row), "%zu,%d,%.6f,%zu\n", l, report.entries[rank].kernel_index,
                    report.entries[rank].sparsity, rank);
      out += row;
    }
  }
  return out;
}

/// Kept kernels per layer and the overall surviving-weight fraction for a
/// factor vector applied to a spec file. multiple > 1 snaps the vector
/// first; the default reports exactly the factors given.
inline std::string cmd_budget(const std::string& spec_path, const std::string& r_text,
                              int multiple = 1) {
  const NetworkSpec spec = load_spec(spec_path);
  ReducingFactor r = parse_factors(r_text);
  validate_factors(r, spec.size());
  if (multiple < 1) throw ConfigError("snap multiple must be >= 1");
  if (multiple > 1) r = snap_to_architecture(r, spec, multiple);
  const std::vector<int> counts = kept_counts(spec, r);
  const double remained = weights_remained(spec, r);

  std::string out = "# prunekit budget\n# spec=" + spec_path + "\n# r=" + r_text +
                    "\n# multiple=" + std::to_string(multiple) + "\n";
  out += "layer,kernels,kept,factor\n";
  char row[64];
  for (std::size_t l = 0; l < spec.size(); ++l) {
    std::snprintf(row, sizeof(row), "%zu,%d,%d,%.6f\n", l, spec.layers[l].n, counts[l], r[l]);
    out += row;
  }
  std::snprintf(row, sizeof(row), "# weights_remained=%.6f (%.1f%%)\n", remained,
                remained * 100.0);
  out += row;
  return out;
}

struct PruneArgs {
  std::string checkpoint_in;
  std::string checkpoint_out;
  std::string plan_out;  // JSON sidecar; empty skips it
  std::string r_text;    // exactly one of r_text / plan_in
  std::string plan_in;
};

/// Prunes a checkpoint either by a factor vector (ranked by sparsity) or by
/// an explicit plan file. Factors are applied exactly as given, without
/// snapping, so r = 0 reproduces the input payload bit for bit.
inline std::string cmd_prune(const PruneArgs& args) {
  if (args.checkpoint_in.empty()) throw ConfigError("prune needs an input checkpoint");
  if (args.checkpoint_out.empty()) throw ConfigError("prune needs an output path");
  const bool have_r = !args.r_text.empty();
  const bool have_plan = !args.plan_in.empty();
  if (have_r == have_plan) {
    throw ConfigError("prune takes exactly one of an r vector or a plan file");
  }

  const Network net = load_checkpoint(args.checkpoint_in);
  PruningPlan plan;
  if (have_r) {
    const ReducingFactor r = parse_factors(args.r_text);
    std::vector<SparsityReport> reports;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      reports.push_back(build_report(net.layers[l].kernels, static_cast<int>(l)));
    }
    plan = plan_from_factors(net, r, reports);
  } else {
    const nlohmann::json j =
        nlohmann::json::parse(detail::read_file_bytes(args.plan_in), nullptr, false);
    if (j.is_discarded()) throw FormatError("cannot parse JSON in " + args.plan_in);
    plan = plan_from_json(j);
  }

  const Network pruned = apply_plan(net, plan);
  save_checkpoint(pruned, args.checkpoint_out);
  if (!args.plan_out.empty()) {
    detail::write_file_bytes(args.plan_out,
                             plan_to_json(plan, NetworkSpec::of(net)).dump(2) + "\n");
  }

  std::string out = "# prunekit prune\n# checkpoint=" + args.checkpoint_in +
                    "\n# out=" + args.checkpoint_out + "\n";
  if (!args.plan_out.empty()) out += "# plan=" + args.plan_out + "\n";
  if (have_r) {
    out += "# r=" + args.r_text + "\n";
  } else {
    out += "# plan_in=" + args.plan_in + "\n";
  }
  out += "layer,kernels,kept\n";
  char row[48];
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    std::snprintf(row, sizeof(row), "%zu,%d,%zu\n", l, net.layers[l].out_channels(),
                  plan.kept[l].size());
    out += row;
  }
  return out;
}

namespace detail {

inline Dataset dataset_for(ConfigReader& reader) {
  DatasetSpec dspec;
  dspec.n_images = reader.get_int("n-images", "32");
  dspec.patch = reader.get_int("patch", "16");
  dspec.seed = reader.get_seed("seed", "7");
  const std::string cache_dir = reader.get("cache-dir", "");
  return load_or_generate(dspec, cache_dir);
}

inline std::string sweep_row_csv(const SweepRow& row) {
  char buf[64];
  std::string out = format_double_list(row.factors.values, ';') + ",";
  out += format_int_list(row.kept, ';');
  std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%d\n", row.weights_remained, row.drop_db,
                row.feasible ? 1 : 0);
  out += buf;
  return out;
}

}  // namespace detail

/// Budgeted search: uniform sweep plus segment rebalancing on a checkpoint,
/// fine-tuning and scoring every candidate on the synthetic dataset. Writes
/// the winning checkpoint and the CSV report, and returns the report.
inline std::string cmd_lwp(const RunConfig& cfg) {
  detail::ConfigReader reader(cfg);
  const std::string checkpoint = reader.get_required("checkpoint");
  const std::string out_path = reader.get("out", "lwp_best.pkt");
  const std::string report_path = reader.get("report", "lwp_report.csv");

  LwpConfig lwp_cfg;
  lwp_cfg.budget = reader.get_double("budget", "0.6");
  lwp_cfg.candidates =
      reader.get_double_list("candidates", "0.12,0.18,0.25,0.32,0.38,0.44,0.50");
  const std::string split_text = reader.get("split", "");
  if (!detail::trim(split_text).empty()) {
    const std::vector<int> parts = detail::parse_int_list(split_text, "split");
    if (parts.size() != 3) throw ConfigError("split needs three comma-separated lengths");
    lwp_cfg.split = {parts[0], parts[1], parts[2]};
  }
  lwp_cfg.delta_grid = reader.get_double_list("delta-grid", "0,0.0625,0.125,0.1875");
  lwp_cfg.tolerance = reader.get_double("tolerance", "0.01");
  lwp_cfg.multiple = reader.get_int("multiple", "4");
  const int epochs = reader.get_int("epochs", "3");
  const double lr = reader.get_double("lr", "0.001");

  const Dataset dataset = detail::dataset_for(reader);
  reader.finish();

  const Network baseline = load_checkpoint(checkpoint);
  const Harness harness = make_harness(baseline, dataset, epochs, static_cast<float>(lr));
  const LwpResult result = run_lwp(baseline, lwp_cfg, harness);

  std::string report = detail::render_header("lwp", reader.effective());
  report += "stage,candidate,factors,kept,weights_remained,drop_db,feasible\n";
  char buf[64];
  for (const SweepRow& row : result.sweep.rows) {
    std::snprintf(buf, sizeof(buf), "sweep,%.6f,", row.candidate);
    report += buf;
    report += detail::sweep_row_csv(row);
  }
  for (const SweepRow& row : result.rebalance_rows) {
    report += "rebalance,,";
    report += detail::sweep_row_csv(row);
  }
  report += "# best_factors=" + detail::format_double_list(result.best_factors.values, ';') + "\n";
  std::snprintf(buf, sizeof(buf), "# best_drop=%.6f\n", result.best_drop);
  report += buf;

  if (!out_path.empty()) save_checkpoint(result.best_net, out_path);
  if (!report_path.empty()) detail::write_file_bytes(report_path, report);
  return report;
}

struct GoCommandOutput {
  std::string summary;
  std::string pairs_csv;
  std::string trajectory_csv;
};

/// Target-drop search: sample (r, drop) pairs on the synthetic dataset, fit
/// the surrogate, descend to the target, and execute the winner. Writes the
/// pairs and trajectory CSVs, the plan sidecar, and the winning checkpoint.
inline GoCommandOutput cmd_go(const RunConfig& cfg) {
  detail::ConfigReader reader(cfg);
  const std::string checkpoint = reader.get_required("checkpoint");
  const std::string out_path = reader.get("out", "go_best.pkt");
  const std::string plan_path = reader.get("plan", "go_plan.json");
  const std::string pairs_path = reader.get("pairs", "go_pairs.csv");
  const std::string trajectory_path = reader.get("trajectory", "go_trajectory.csv");

  GoConfig go_cfg;
  go_cfg.target_p = reader.get_double("target-drop", "0.1");
  go_cfg.alpha = reader.get_double("alpha", "0.01");
  go_cfg.margin = reader.get_double("margin", "0.01");
  go_cfg.max_iters = reader.get_int("max-iters", "10000");
  const std::string r0_text = reader.get("r0", "");
  if (!detail::trim(r0_text).empty()) go_cfg.r0 = parse_factors(r0_text);

  GoDataConfig data_cfg;
  data_cfg.n_samples = reader.get_int("samples", "64");
  data_cfg.sample_seed = reader.get_seed("sample-seed", "19");
  data_cfg.range_hi = reader.get_double("range-hi", "0.5");
  const std::string surrogate = reader.get("surrogate", "linear");
  if (surrogate == "linear") {
    data_cfg.kind = SurrogateKind::linear;
  } else if (surrogate == "mlp") {
    data_cfg.kind = SurrogateKind::one_hidden;
  } else {
    throw ConfigError("surrogate must be 'linear' or 'mlp', got '" + surrogate + "'");
  }
  data_cfg.train_epochs = reader.get_int("train-epochs", "4000");
  data_cfg.train_seed = reader.get_seed("train-seed", "17");
  data_cfg.train_lr = reader.get_double("train-lr", "0.01");
  data_cfg.multiple = reader.get_int("multiple", "4");
  const int epochs = reader.get_int("epochs", "3");
  const double lr = reader.get_double("lr", "0.001");

  const Dataset dataset = detail::dataset_for(reader);
  reader.finish();

  const Network baseline = load_checkpoint(checkpoint);
  const NetworkSpec spec = NetworkSpec::of(baseline);
  const Harness harness = make_harness(baseline, dataset, epochs, static_cast<float>(lr));
  const GoResult result = run_go(spec, go_cfg, data_cfg, harness);

  const std::string header = detail::render_header("go", reader.effective());
  char buf[96];
  GoCommandOutput out;

  out.pairs_csv = header + "index,factors,drop_db\n";
  for (std::size_t i = 0; i < result.data.pairs.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,", i);
    out.pairs_csv += buf;
    out.pairs_csv += detail::format_double_list(result.data.pairs[i].r.values, ';');
    std::snprintf(buf, sizeof(buf), ",%.6f\n", result.data.pairs[i].p);
    out.pairs_csv += buf;
  }
  std::snprintf(buf, sizeof(buf), "# skipped=%d\n", result.data.skipped);
  out.pairs_csv += buf;

  out.trajectory_csv = header + "iteration,abs_error\n";
  for (std::size_t k = 0; k < result.opt.trajectory.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", k, result.opt.trajectory[k]);
    out.trajectory_csv += buf;
  }
  std::snprintf(buf, sizeof(buf), "# converged=%d\n# iterations=%d\n",
                result.opt.converged ? 1 : 0, result.opt.iterations);
  out.trajectory_csv += buf;

  out.summary = header + "target_p,achieved_drop,converged,iterations,surrogate_mse\n";
  std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%d,%d,%.9f\n", result.target_p,
                result.achieved_drop, result.opt.converged ? 1 : 0, result.opt.iterations,
                result.fit.final_loss);
  out.summary += buf;
  out.summary +=
      "# final_factors=" + detail::format_double_list(result.final_factors.values, ';') + "\n";

  if (!out_path.empty()) save_checkpoint(result.net, out_path);
  if (!plan_path.empty()) {
    std::vector<SparsityReport> reports;
    for (std::size_t l = 0; l < baseline.layers.size(); ++l) {
      reports.push_back(build_report(baseline.layers[l].kernels, static_cast<int>(l)));
    }
    const PruningPlan plan = plan_from_factors(baseline, result.final_factors, reports);
    detail::write_file_bytes(plan_path, plan_to_json(plan, spec).dump(2) + "\n");
  }
  if (!pairs_path.empty()) detail::write_file_bytes(pairs_path, out.pairs_csv);
  if (!trajectory_path.empty()) detail::write_file_bytes(trajectory_path, out.trajectory_csv);
  return out;
}

/// PSNR drop of a pruned checkpoint against its baseline on the synthetic
/// test split, as JSON.
inline std::string cmd_eval(const std::string& baseline_path, const std::string& pruned_path,
                            const RunConfig& cfg) {
  detail::ConfigReader reader(cfg);
  DatasetSpec dspec;
  dspec.n_images = reader.get_int("n-images", "32");
  dspec.patch = reader.get_int("patch", "16");
  dspec.seed = reader.get_seed("seed", "7");
  const std::string cache_dir = reader.get("cache-dir", "");
  reader.finish();

  const Network baseline = load_checkpoint(baseline_path);
  const Network pruned = load_checkpoint(pruned_path);
  const Dataset dataset = load_or_generate(dspec, cache_dir);
  const HarnessResult result = evaluate(baseline, pruned, dataset);

  nlohmann::json j;
  j["config"] = {{"baseline", baseline_path}, {"pruned", pruned_path},
                 {"n-images", dspec.n_images}, {"patch", dspec.patch},
                 {"seed", dspec.seed},         {"cache-dir", cache_dir}};
  j["baseline_psnr"] = result.baseline_psnr;
  j["pruned_psnr"] = result.pruned_psnr;
  j["drop"] = result.drop;
  return j.dump(2) + "\n";
}

}  // namespace prunekit
