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

#pragma once

// Command implementations behind the `fasrl` executable. Each command
// resolves and validates its configuration before touching the filesystem,
// then writes into a fresh run directory named
// <command>-<protocol>-<seed>-<UTC timestamp>[-<counter>].

#include <chrono>
#include <ctime>
#include <exception>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fasrl/checkpoint.hpp"
#include "fasrl/config.hpp"
#include "fasrl/error.hpp"
#include "fasrl/eval.hpp"
#include "fasrl/grpo.hpp"
#include "fasrl/io.hpp"
#include "fasrl/pipeline.hpp"
#include "fasrl/version.hpp"

namespace fasrl {

namespace fs = std::filesystem;

struct CommandOptions {
  std::optional<fs::path> config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  fs::path out = "runs";
  std::optional<fs::path> checkpoint;
  std::vector<std::size_t> group_sizes;
  std::vector<std::uint64_t> seeds;
  std::vector<fs::path> reports;
  bool parallel = false;
};

enum class Method { kGrpo, kSft };

inline const char* to_string(Method m) { return m == Method::kGrpo ? "grpo" : "sft"; }

struct RunResult {
  fs::path dir;
  MetricsReport holdout;
  MetricsReport test;
};

inline RunConfig load_run_config(const CommandOptions& opt) {
  return parse_run_config(resolve_config(opt.config, opt.overrides, opt.seed));
}

// Named sub-seeds of the root seed; shared by every command so that runs
// with one root seed see the same splits.
inline json seed_lineage(std::uint64_t root) {
  return json{{"root", root},
              {"protocol", derive_seed(root, "protocol")},
              {"init", derive_seed(root, "init")},
              {"warmup", derive_seed(root, "warmup")},
              {"train", derive_seed(root, "train")},
              {"gold", derive_seed(root, "gold")}};
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

inline fs::path create_run_dir(const fs::path& out, const std::string& command,
                               const std::string& protocol, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorCategory::kIo, "cannot create " + out.string());
  const std::string base =
      command + "-" + protocol + "-" + std::to_string(seed) + "-" + utc_timestamp();
  for (int counter = 0;; ++counter) {
    const auto dir = out / (counter == 0 ? base : base + "-" + std::to_string(counter));
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) throw Error(ErrorCategory::kIo, "cannot create " + dir.string());
  }
}

inline void write_run_header(const fs::path& dir, const std::string& command,
                             const RunConfig& rc) {
  write_json(dir / "config.json", rc.resolved);
  write_json(dir / "manifest.json",
             json{{"command", command},
                  {"code_version", kVersion},
                  {"config_fingerprint", config_fingerprint(rc.resolved)},
                  {"seeds", seed_lineage(rc.seed)}});
}

inline void export_splits(const fs::path& dir, const Protocol& p) {
  fs::create_directories(dir / "data");
  write_file(dir / "data" / "train.jsonl", to_jsonl(p.train));
  write_file(dir / "data" / "holdout.jsonl", to_jsonl(p.holdout));
  write_file(dir / "data" / "test.jsonl", to_jsonl(p.test));
}

inline Checkpoint make_checkpoint(const PolicyParams& params, const Vocabulary& vocab,
                                  std::uint64_t root, std::size_t step) {
  Checkpoint ck;
  ck.params = params;
  ck.vocab = vocab;
  ck.lineage = {{"root", root},
                {"init", derive_seed(root, "init")},
                {"warmup", derive_seed(root, "warmup")},
                {"train", derive_seed(root, "train")},
                {"step", step}};
  return ck;
}

inline std::string save_checkpoint_hashed(const fs::path& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  write_file(path, bytes);
  return hex64(fnv1a64(bytes));
}

inline json report_json(const std::string& split, const std::string& method,
                        const RunConfig& rc, const std::string& ckpt_hash,
                        const MetricsReport& m) {
  return json{{"split", split},
              {"protocol", rc.protocol.name},
              {"method", method},
              {"decode", rc.decode.greedy ? "greedy" : "sampled"},
              {"config_fingerprint", config_fingerprint(rc.resolved)},
              {"checkpoint_hash", ckpt_hash},
              {"metrics", to_json(m)}};
}

// Evaluates on holdout and test splits and writes reports + predictions.
inline std::pair<MetricsReport, MetricsReport> evaluate_and_report(
    const fs::path& dir, const std::string& method, const RunConfig& rc,
    const Protocol& proto, const PolicyParams& params, const Vocabulary& vocab,
    const std::string& ckpt_hash, std::ostream& out) {
  const auto holdout = proto.holdout.empty()
                           ? Evaluation{}
                           : evaluate_policy(params, vocab, proto.holdout, rc.decode, rc.reward);
  const auto test = evaluate_policy(params, vocab, proto.test, rc.decode, rc.reward);
  if (!proto.holdout.empty()) {
    write_json(dir / "report_holdout.json",
               report_json("holdout", method, rc, ckpt_hash, holdout.report));
  }
  write_json(dir / "report_test.json", report_json("test", method, rc, ckpt_hash, test.report));
  JsonlWriter preds(dir / "predictions_test.jsonl");
  for (const auto& o : test.outcomes) preds.write(to_json(o));
  if (!proto.holdout.empty()) {
    print_report(out, "[" + method + "] holdout (" + proto.train_domain.name + ")",
                 holdout.report);
  }
  print_report(out, "[" + method + "] test (" + proto.test_domain.name + ")", test.report);
  return {holdout.report, test.report};
}

// Full training run into `dir`: splits, warm-up base policy, fine-tuning
// with periodic checkpoints and a JSONL step log, final evaluation.
inline RunResult run_training(const RunConfig& rc, Method method, const fs::path& dir,
                              std::ostream& out) {
  const auto proto = build_protocol(rc);
  const auto vocab = build_vocabulary(rc.world);
  export_splits(dir, proto);
  fs::create_directories(dir / "checkpoints");

  const auto init = init_params(rc.dims, vocab, derive_seed(rc.seed, "init"));
  const auto base = warm_up(init, vocab, proto.train, rc.world, rc.warmup,
                            derive_seed(rc.seed, "warmup"));
  save_checkpoint_hashed(dir / "checkpoints" / "base.ckpt",
                         make_checkpoint(base, vocab, rc.seed, 0));

  JsonlWriter log(dir / "train_log.jsonl");
  auto on_step = [&](std::size_t s, const StepStats& st, const PolicyParams& p) {
    if (s % rc.log_interval == 0) log.write(to_json(st));
    if (rc.checkpoint_interval > 0 && (s + 1) % rc.checkpoint_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "step-%06zu.ckpt", s + 1);
      save_checkpoint_hashed(dir / "checkpoints" / name,
                             make_checkpoint(p, vocab, rc.seed, s + 1));
    }
  };

  PolicyParams final_params;
  if (method == Method::kGrpo) {
    GrpoTrainer trainer(base, base, vocab, to_training_prompts(proto.train, vocab),
                        rc.train, rc.reward);
    for (std::size_t s = 0; s < rc.train.max_steps; ++s) {
      const auto st = trainer.step(s);
      on_step(s, st, trainer.params());
    }
    final_params = trainer.params();
  } else {
    const auto gold_seed = derive_seed(rc.seed, "gold");
    std::vector<SftExample> data;
    JsonlWriter gold(dir / "data" / "sft_gold.jsonl");
    for (const auto& s : proto.train) {
      const auto text = gold_response(s, proto.train_domain, gold_seed);
      gold.write(json{{"id", s.id}, {"label", std::string(to_string(s.label))},
                      {"response", text}});
      data.push_back(make_sft_example(to_training_prompt(s, vocab), text, vocab, rc.reward));
    }
    SftTrainer trainer(base, base, vocab, std::move(data), rc.train, rc.reward);
    for (std::size_t s = 0; s < rc.train.max_steps; ++s) {
      const auto st = trainer.step(s);
      on_step(s, st, trainer.params());
    }
    final_params = trainer.params();
  }
  log.flush();

  const auto hash = save_checkpoint_hashed(
      dir / "checkpoints" / "final.ckpt",
      make_checkpoint(final_params, vocab, rc.seed, rc.train.max_steps));
  RunResult r;
  r.dir = dir;
  std::tie(r.holdout, r.test) =
      evaluate_and_report(dir, to_string(method), rc, proto, final_params, vocab, hash, out);
  return r;
}

inline int cmd_train(const CommandOptions& opt, Method method, std::ostream& out) {
  const auto rc = load_run_config(opt);
  build_protocol(rc);  // surface protocol errors before creating a run dir
  const std::string command = method == Method::kGrpo ? "train-grpo" : "train-sft";
  const auto dir = create_run_dir(opt.out, command, rc.protocol.name, rc.seed);
  write_run_header(dir, command, rc);
  run_training(rc, method, dir, out);
  out << "run directory: " << dir.string() << "\n";
  return 0;
}

inline int cmd_train_grpo(const CommandOptions& opt, std::ostream& out) {
  return cmd_train(opt, Method::kGrpo, out);
}

inline int cmd_train_sft(const CommandOptions& opt, std::ostream& out) {
  return cmd_train(opt, Method::kSft, out);
}

inline int cmd_eval(const CommandOptions& opt, std::ostream& out) {
  if (!opt.checkpoint) {
    throw Error(ErrorCategory::kArgument, "eval needs --checkpoint");
  }
  const auto rc = load_run_config(opt);
  const auto bytes = read_file(*opt.checkpoint);
  const auto ck = decode_checkpoint(bytes);
  const auto proto = build_protocol(rc);
  // Prompts must be expressible in the checkpoint's vocabulary.
  for (const auto* split : {&proto.holdout, &proto.test}) {
    for (const auto& s : *split) encode_prompt(s, ck.vocab);
  }
  const auto dir = create_run_dir(opt.out, "eval", rc.protocol.name, rc.seed);
  write_run_header(dir, "eval", rc);
  evaluate_and_report(dir, "eval", rc, proto, ck.params, ck.vocab,
                      hex64(fnv1a64(bytes)), out);
  out << "run directory: " << dir.string() << "\n";
  return 0;
}

inline int cmd_export_dataset(const CommandOptions& opt, std::ostream& out) {
  const auto rc = load_run_config(opt);
  const auto proto = build_protocol(rc);
  const auto dir = create_run_dir(opt.out, "export-dataset", rc.protocol.name, rc.seed);
  write_run_header(dir, "export-dataset", rc);
  export_splits(dir, proto);
  out << "exported " << proto.train.size() << " train, " << proto.holdout.size()
      << " holdout, " << proto.test.size() << " test samples to " << dir.string() << "\n";
  return 0;
}

struct SweepRow {
  std::size_t group_size = 0;
  std::uint64_t seed = 0;
  fs::path run_dir;
  MetricsReport holdout;
  MetricsReport test;
};

inline json sweep_summary_json(const std::vector<SweepRow>& rows) {
  json out{{"rows", json::array()}, {"mean_test_hter", json::object()}};
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    out["rows"].push_back({{"group_size", r.group_size},
                           {"seed", r.seed},
                           {"run_dir", r.run_dir.filename().string()},
                           {"test_hter", r.test.hter},
                           {"test_frr", r.test.frr},
                           {"test_far", r.test.far},
                           {"holdout_hter", r.holdout.hter}});
    acc[r.group_size].first += r.test.hter;
    acc[r.group_size].second += 1;
  }
  for (const auto& [n, a] : acc) {
    out["mean_test_hter"][std::to_string(n)] = a.first / static_cast<double>(a.second);
  }
  return out;
}

// One GRPO run per (group size, seed); every run shares the data seeds of
// its root seed, so runs differing only in N see identical splits.
inline int cmd_sweep_group_size(const CommandOptions& opt, std::ostream& out) {
  if (opt.group_sizes.empty()) {
    throw Error(ErrorCategory::kArgument, "sweep-group-size needs --group-sizes");
  }
  std::set<std::size_t> uniq;
  for (auto n : opt.group_sizes) {
    if (n < 2) throw Error(ErrorCategory::kConfig, "train.group_size must be >= 2");
    if (!uniq.insert(n).second) {
      throw Error(ErrorCategory::kArgument,
                  "duplicate group size " + std::to_string(n));
    }
  }
  const auto base_rc = load_run_config(opt);
  std::vector<std::uint64_t> seeds = opt.seeds;
  if (seeds.empty()) seeds.push_back(base_rc.seed);

  struct Job {
    std::size_t n;
    std::uint64_t seed;
    RunConfig rc;
  };
  std::vector<Job> jobs;
  for (auto n : opt.group_sizes) {
    for (auto seed : seeds) {
      auto ov = opt.overrides;
      ov.push_back("train.group_size=" + std::to_string(n));
      auto rc = parse_run_config(resolve_config(opt.config, ov, seed));
      build_protocol(rc);
      jobs.push_back({n, seed, std::move(rc)});
    }
  }

  const auto sweep_dir =
      create_run_dir(opt.out, "sweep-group-size", base_rc.protocol.name, base_rc.seed);
  write_run_header(sweep_dir, "sweep-group-size", base_rc);
  std::vector<SweepRow> rows(jobs.size());
  std::vector<std::ostringstream> logs(jobs.size());
  auto run_job = [&](std::size_t i) {
    const auto& j = jobs[i];
    const auto dir = sweep_dir / ("N" + std::to_string(j.n) + "-seed" + std::to_string(j.seed));
    fs::create_directory(dir);
    write_run_header(dir, "train-grpo", j.rc);
    const auto r = run_training(j.rc, Method::kGrpo, dir, logs[i]);
    rows[i] = {j.n, j.seed, dir, r.holdout, r.test};
  };
  if (opt.parallel) {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      threads.emplace_back([&, i] {
        try {
          run_job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
  }
  for (const auto& l : logs) out << l.str();

  const auto summary = sweep_summary_json(rows);
  write_json(sweep_dir / "summary.json", summary);
  std::ostringstream tsv;
  tsv << "group_size\tseed\ttest_hter\ttest_frr\ttest_far\tholdout_hter\n";
  for (const auto& r : rows) {
    tsv << r.group_size << '\t' << r.seed << '\t' << fmt2(r.test.hter) << '\t'
        << fmt2(r.test.frr) << '\t' << fmt2(r.test.far) << '\t' << fmt2(r.holdout.hter)
        << '\n';
  }
  write_file(sweep_dir / "summary.tsv", tsv.str());
  out << "group-size sweep (" << base_rc.protocol.name << ")\n" << tsv.str();
  for (auto it = summary["mean_test_hter"].begin(); it != summary["mean_test_hter"].end(); ++it) {
    out << "  N=" << it.key() << " mean test HTER " << fmt2(it.value().get<double>()) << "%\n";
  }
  out << "run directory: " << sweep_dir.string() << "\n";
  return 0;
}

// Side-by-side view of evaluation reports written by any command.
inline int cmd_compare(const CommandOptions& opt, std::ostream& out) {
  if (opt.reports.size() < 2) {
    throw Error(ErrorCategory::kArgument, "compare needs at least two --report files");
  }
  out << "report\tmethod\tsplit\tFRR\tFAR\tHTER\n";
  for (const auto& path : opt.reports) {
    const auto j = read_json(path);
    if (!j.contains("metrics")) {
      throw Error(ErrorCategory::kDataset, path.string() + " is not an evaluation report");
    }
    const auto m = metrics_from_json(j.at("metrics"));
    out << path.string() << '\t' << j.value("method", "?") << '\t' << j.value("split", "?")
        << '\t' << fmt2(m.frr) << '\t' << fmt2(m.far) << '\t' << fmt2(m.hter) << '\n';
  }
  return 0;
}

}  // namespace fasrl
