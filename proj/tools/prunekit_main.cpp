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

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prunekit/prunekit.hpp"

namespace {

// String flags that mirror RunConfig keys. Only flags the user actually
// passed overwrite the config file, so the file supplies defaults and the
// command line wins.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  void add(const std::string& key, const std::string& description) {
    entries_.push_back(std::make_unique<Entry>());
    Entry* e = entries_.back().get();
    e->key = key;
    e->option = app_->add_option("--" + key, e->value, description);
  }

  void overlay(prunekit::RunConfig& cfg) const {
    for (const auto& e : entries_) {
      if (e->option->count() > 0) cfg.set(e->key, e->value);
    }
  }

 private:
  struct Entry {
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
  };

  CLI::App* app_;
  std::vector<std::unique_ptr<Entry>> entries_;
};

void add_dataset_flags(FlagSet& flags) {
  flags.add("n-images", "synthetic dataset size (default 32)");
  flags.add("patch", "square patch side, even, >= 8 (default 16)");
  flags.add("seed", "dataset seed (default 7; PRUNEKIT_SEED overrides the default)");
  flags.add("cache-dir", "directory for the dataset cache (default: no cache)");
}

prunekit::RunConfig assemble_config(const std::string& config_path, const FlagSet& flags) {
  prunekit::RunConfig cfg;
  if (!config_path.empty()) cfg = prunekit::load_run_config(config_path);
  flags.overlay(cfg);
  prunekit::apply_seed_fallback(cfg, std::getenv("PRUNEKIT_SEED"));
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prunekit: kernel pruning for small convolutional networks"};
  app.require_subcommand(1);

  CLI::App* analyze = app.add_subcommand("analyze", "rank kernels by sparsity");
  std::string analyze_ckpt;
  analyze->add_option("checkpoint", analyze_ckpt, "input checkpoint")->required();

  CLI::App* budget = app.add_subcommand("budget", "surviving-weight fraction for a factor vector");
  std::string budget_spec;
  std::string budget_r;
  int budget_multiple = 1;
  budget->add_option("spec", budget_spec, "network spec JSON file")->required();
  budget->add_option("--r", budget_r, "comma-separated reducing factors")->required();
  budget->add_option("--multiple", budget_multiple, "snap kept counts to this multiple (default 1)");

  CLI::App* prune = app.add_subcommand("prune", "apply a factor vector or plan to a checkpoint");
  prunekit::PruneArgs prune_args;
  prune->add_option("checkpoint", prune_args.checkpoint_in, "input checkpoint")->required();
  prune->add_option("--out", prune_args.checkpoint_out, "output checkpoint")->required();
  prune->add_option("--plan-out", prune_args.plan_out, "plan JSON sidecar path");
  prune->add_option("--r", prune_args.r_text, "comma-separated reducing factors");
  prune->add_option("--plan", prune_args.plan_in, "plan JSON file to apply instead of --r");

  CLI::App* lwp = app.add_subcommand("lwp", "budgeted sweep plus segment rebalancing");
  std::string lwp_config_path;
  lwp->add_option("--config", lwp_config_path, "key=value config file");
  FlagSet lwp_flags(lwp);
  lwp_flags.add("checkpoint", "baseline checkpoint (required)");
  lwp_flags.add("out", "winning checkpoint path (default lwp_best.pkt)");
  lwp_flags.add("report", "CSV report path (default lwp_report.csv)");
  lwp_flags.add("budget", "surviving-weight budget in (0,1] (default 0.6)");
  lwp_flags.add("candidates", "uniform sweep factors (default 0.12,...,0.50)");
  lwp_flags.add("split", "front,middle,end layer counts (default: auto)");
  lwp_flags.add("delta-grid", "per-segment adjustment grid (default 0,0.0625,0.125,0.1875)");
  lwp_flags.add("tolerance", "allowed budget wobble during rebalancing (default 0.01)");
  lwp_flags.add("multiple", "kept-kernel multiple (default 4)");
  lwp_flags.add("epochs", "fine-tune epochs per candidate (default 3)");
  lwp_flags.add("lr", "fine-tune learning rate (default 0.001)");
  add_dataset_flags(lwp_flags);

  CLI::App* go = app.add_subcommand("go", "surrogate descent toward a target drop");
  std::string go_config_path;
  go->add_option("--config", go_config_path, "key=value config file");
  FlagSet go_flags(go);
  go_flags.add("checkpoint", "baseline checkpoint (required)");
  go_flags.add("out", "winning checkpoint path (default go_best.pkt)");
  go_flags.add("plan", "plan JSON sidecar path (default go_plan.json)");
  go_flags.add("pairs", "training-pair CSV path (default go_pairs.csv)");
  go_flags.add("trajectory", "descent trajectory CSV path (default go_trajectory.csv)");
  go_flags.add("target-drop", "desired PSNR drop in dB (default 0.1)");
  go_flags.add("alpha", "descent rate on r (default 0.01)");
  go_flags.add("margin", "acceptable |prediction - target| (default 0.01)");
  go_flags.add("max-iters", "descent iteration cap (default 10000)");
  go_flags.add("r0", "starting factors (default: uniform 0.25, last 0)");
  go_flags.add("samples", "number of (r, drop) samples (default 64)");
  go_flags.add("sample-seed", "sampling seed (default 19)");
  go_flags.add("range-hi", "upper bound of the sampling range (default 0.5)");
  go_flags.add("surrogate", "surrogate kind: linear or mlp (default linear)");
  go_flags.add("train-epochs", "surrogate training epochs (default 4000)");
  go_flags.add("train-seed", "surrogate init seed (default 17)");
  go_flags.add("train-lr", "surrogate learning rate (default 0.01)");
  go_flags.add("multiple", "kept-kernel multiple (default 4)");
  go_flags.add("epochs", "fine-tune epochs per sample (default 3)");
  go_flags.add("lr", "fine-tune learning rate (default 0.001)");
  add_dataset_flags(go_flags);

  CLI::App* eval = app.add_subcommand("eval", "PSNR drop of a pruned checkpoint");
  std::string eval_baseline;
  std::string eval_pruned;
  std::string eval_config_path;
  eval->add_option("baseline", eval_baseline, "baseline checkpoint")->required();
  eval->add_option("pruned", eval_pruned, "pruned checkpoint")->required();
  eval->add_option("--config", eval_config_path, "key=value config file");
  FlagSet eval_flags(eval);
  add_dataset_flags(eval_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(analyze)) {
      std::fputs(prunekit::cmd_analyze(analyze_ckpt).c_str(), stdout);
    } else if (app.got_subcommand(budget)) {
      std::fputs(prunekit::cmd_budget(budget_spec, budget_r, budget_multiple).c_str(), stdout);
    } else if (app.got_subcommand(prune)) {
      std::fputs(prunekit::cmd_prune(prune_args).c_str(), stdout);
    } else if (app.got_subcommand(lwp)) {
      const prunekit::RunConfig cfg = assemble_config(lwp_config_path, lwp_flags);
      std::fputs(prunekit::cmd_lwp(cfg).c_str(), stdout);
    } else if (app.got_subcommand(go)) {
      const prunekit::RunConfig cfg = assemble_config(go_config_path, go_flags);
      std::fputs(prunekit::cmd_go(cfg).summary.c_str(), stdout);
    } else if (app.got_subcommand(eval)) {
      const prunekit::RunConfig cfg = assemble_config(eval_config_path, eval_flags);
      std::fputs(prunekit::cmd_eval(eval_baseline, eval_pruned, cfg).c_str(), stdout);
    }
    return 0;
  } catch (const prunekit::Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", prunekit::category_name(e.category()), e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error (internal): %s\n", e.what());
    return 1;
  }
}
