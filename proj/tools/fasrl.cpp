// Copyright 2026 The fasrl Authors
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

// fasrl: reinforcement fine-tuning for synthetic face anti-spoofing.
//
//   fasrl train-grpo       [--config F] [--override k=v]... [--seed S] [--out D]
//   fasrl train-sft        (same flags)
//   fasrl eval             --checkpoint C [--config F] ...
//   fasrl sweep-group-size --group-sizes 2,6 [--seeds 1,2,3] [--parallel] ...
//   fasrl export-dataset   [--config F] ...
//   fasrl compare          --report A --report B [...]
//
// On failure a single line "error[<category>]: <message>" goes to stderr.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "fasrl/cli.hpp"

namespace {

void add_common(CLI::App* cmd, fasrl::CommandOptions& opt) {
  cmd->add_option_function<std::string>(
      "--config", [&opt](const std::string& p) { opt.config = p; },
      "run configuration (JSON key tree)");
  cmd->add_option("--override", opt.overrides, "dotted-path override, e.g. train.group_size=2")
      ->take_all();
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&opt](std::uint64_t s) { opt.seed = s; }, "root seed");
  cmd->add_option("--out", opt.out, "parent directory for run directories");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement fine-tuning for synthetic face anti-spoofing"};
  app.set_version_flag("--version", fasrl::kVersion);
  app.require_subcommand(1);
  fasrl::CommandOptions opt;

  auto* grpo = app.add_subcommand("train-grpo", "fine-tune with GRPO and verifiable rewards");
  auto* sft = app.add_subcommand("train-sft", "supervised fine-tuning baseline on gold responses");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a protocol");
  auto* sweep = app.add_subcommand("sweep-group-size", "GRPO runs over several group sizes");
  auto* exp = app.add_subcommand("export-dataset", "write protocol splits as JSONL");
  auto* cmp = app.add_subcommand("compare", "side-by-side evaluation reports");
  for (auto* c : {grpo, sft, eval, sweep, exp}) add_common(c, opt);
  eval->add_option_function<std::string>(
          "--checkpoint", [&opt](const std::string& p) { opt.checkpoint = p; },
          "checkpoint file")
      ->required();
  sweep->add_option("--group-sizes", opt.group_sizes, "comma-separated N values")
      ->delimiter(',')
      ->required();
  sweep->add_option("--seeds", opt.seeds, "comma-separated root seeds")->delimiter(',');
  sweep->add_flag("--parallel", opt.parallel, "run sweep members concurrently");
  cmp->add_option("--report", opt.reports, "report JSON (repeatable)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[usage]: " << e.what() << "\n";
    return 64;
  }

  try {
    if (grpo->parsed()) return fasrl::cmd_train_grpo(opt, std::cout);
    if (sft->parsed()) return fasrl::cmd_train_sft(opt, std::cout);
    if (eval->parsed()) return fasrl::cmd_eval(opt, std::cout);
    if (sweep->parsed()) return fasrl::cmd_sweep_group_size(opt, std::cout);
    if (exp->parsed()) return fasrl::cmd_export_dataset(opt, std::cout);
    if (cmp->parsed()) return fasrl::cmd_compare(opt, std::cout);
  } catch (const fasrl::Error& e) {
    std::cerr << "error[" << fasrl::category_name(e.category()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
