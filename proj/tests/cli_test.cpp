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

// End-to-end tests that drive the fasrl executable.

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fasrl/checkpoint.hpp"
#include "fasrl/io.hpp"
#include "fasrl/reward.hpp"

namespace fs = std::filesystem;
using fasrl::json;

namespace {

const std::string kFast =
    " --override protocol.train_samples=60 protocol.holdout_samples=20"
    " protocol.test_samples=40 warmup.steps=10 train.max_steps=4"
    " checkpoint_interval=2 policy.d=8 policy.h=8 train.group_size=3 train.batch_prompts=2";

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(FASRL_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / (std::string("fasrl_cli_") + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::vector<fs::path> run_dirs(const fs::path& out) const {
    std::vector<fs::path> dirs;
    if (!fs::exists(out)) return dirs;
    for (const auto& e : fs::directory_iterator(out)) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
  }

  fs::path only_run(const fs::path& out) const {
    const auto dirs = run_dirs(out);
    EXPECT_EQ(dirs.size(), 1u);
    return dirs.empty() ? fs::path() : dirs.front();
  }

  static std::string slurp(const fs::path& p) { return fasrl::read_file(p); }

  fs::path root_;
};

}  // namespace

TEST_F(CliTest, MissingConfigFailsWithoutCreatingRunDir) {
  const auto out = root_ / "runs";
  const auto r = run("train-grpo --config " + (root_ / "nope.json").string() + " --out " +
                     out.string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("error[config]"), std::string::npos) << r.output;
  EXPECT_TRUE(run_dirs(out).empty());
}

TEST_F(CliTest, InvalidValueFailsWithoutCreatingRunDir) {
  const auto out = root_ / "runs";
  const auto r = run("train-sft --override train.clip_epsilon=2 --out " + out.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("train.clip_epsilon"), std::string::npos) << r.output;
  EXPECT_TRUE(run_dirs(out).empty());
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run("").code, 64);
  EXPECT_EQ(run("frobnicate").code, 64);
  EXPECT_EQ(run("eval").code, 64);
  EXPECT_EQ(run("--version").code, 0);
}

TEST_F(CliTest, TrainGrpoIsDeterministic) {
  const auto a = root_ / "a", b = root_ / "b";
  const auto ra = run("train-grpo --seed 3" + kFast + " --out " + a.string());
  ASSERT_EQ(ra.code, 0) << ra.output;
  const auto rb = run("train-grpo --seed 3" + kFast + " --out " + b.string());
  ASSERT_EQ(rb.code, 0) << rb.output;
  const auto da = only_run(a), db = only_run(b);
  EXPECT_EQ(da.filename().string().rfind("train-grpo-A_to_C-3-", 0), 0u) << da;
  for (const char* f : {"train_log.jsonl", "report_test.json", "report_holdout.json",
                        "predictions_test.jsonl", "config.json", "manifest.json",
                        "checkpoints/base.ckpt", "checkpoints/step-000002.ckpt",
                        "checkpoints/step-000004.ckpt", "checkpoints/final.ckpt",
                        "data/train.jsonl", "data/test.jsonl"}) {
    ASSERT_TRUE(fs::exists(da / f)) << f;
    EXPECT_EQ(slurp(da / f), slurp(db / f)) << f;
  }
  std::istringstream log(slurp(da / "train_log.jsonl"));
  std::string line;
  std::size_t steps = 0;
  while (std::getline(log, line)) {
    const auto j = json::parse(line);
    EXPECT_EQ(j.at("step").get<std::size_t>(), steps);
    for (const char* k : {"loss", "mean_total_reward", "mean_format", "mean_cls", "mean_res",
                          "mean_kl", "clip_fraction", "grad_norm", "zero_std_group_fraction"}) {
      EXPECT_TRUE(j.contains(k)) << k;
    }
    ++steps;
  }
  EXPECT_EQ(steps, 4u);
  const auto manifest = json::parse(slurp(da / "manifest.json"));
  EXPECT_EQ(manifest["seeds"]["root"], 3);
  const auto ck = fasrl::load_checkpoint(da / "checkpoints/final.ckpt");
  EXPECT_EQ(ck.lineage.front(), (std::pair<std::string, std::uint64_t>{"root", 3}));
}

TEST_F(CliTest, DifferentSeedOrOverrideChangesResults) {
  const auto a = root_ / "a", b = root_ / "b";
  ASSERT_EQ(run("train-grpo --seed 3" + kFast + " --out " + a.string()).code, 0);
  ASSERT_EQ(run("train-grpo --seed 3" + kFast + " train.kl_beta=0.5 --out " + b.string()).code, 0);
  const auto ma = json::parse(slurp(only_run(a) / "manifest.json"));
  const auto mb = json::parse(slurp(only_run(b) / "manifest.json"));
  EXPECT_NE(ma["config_fingerprint"], mb["config_fingerprint"]);
  // Data seeds do not depend on training knobs.
  EXPECT_EQ(slurp(only_run(a) / "data/train.jsonl"), slurp(only_run(b) / "data/train.jsonl"));
}

TEST_F(CliTest, SftAndGrpoShareSplitsAndGoldIsWellFormed) {
  const auto g = root_ / "g", s = root_ / "s";
  ASSERT_EQ(run("train-grpo --seed 5" + kFast + " --out " + g.string()).code, 0);
  const auto rs = run("train-sft --seed 5" + kFast + " --out " + s.string());
  ASSERT_EQ(rs.code, 0) << rs.output;
  const auto dg = only_run(g), ds = only_run(s);
  for (const char* f : {"data/train.jsonl", "data/holdout.jsonl", "data/test.jsonl",
                        "checkpoints/base.ckpt"}) {
    EXPECT_EQ(slurp(dg / f), slurp(ds / f)) << f;
  }
  std::istringstream gold(slurp(ds / "data/sft_gold.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(gold, line)) {
    const auto j = json::parse(line);
    const auto p = fasrl::parse_response(j.at("response").get<std::string>());
    EXPECT_TRUE(p.format_ok) << line;
    EXPECT_EQ(std::string(fasrl::to_string(*p.answer)), j.at("label").get<std::string>());
    ++n;
  }
  EXPECT_EQ(n, 60u);
  const auto report = json::parse(slurp(ds / "report_test.json"));
  EXPECT_EQ(report["method"], "sft");
}

TEST_F(CliTest, EvalRejectsCorruptCheckpointAndIsRepeatable) {
  const auto t = root_ / "t";
  ASSERT_EQ(run("train-grpo --seed 2" + kFast + " --out " + t.string()).code, 0);
  const auto ckpt = only_run(t) / "checkpoints/final.ckpt";
  const auto bytes = slurp(ckpt);
  const auto broken = root_ / "broken.ckpt";
  fasrl::write_file(broken, bytes.substr(0, bytes.size() / 2));
  const auto e = root_ / "e";
  const auto bad = run("eval --seed 2" + kFast + " --checkpoint " + broken.string() + " --out " +
                       e.string());
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.output.find("error[checkpoint]"), std::string::npos) << bad.output;
  EXPECT_TRUE(run_dirs(e).empty());

  const auto e1 = root_ / "e1", e2 = root_ / "e2";
  ASSERT_EQ(run("eval --seed 2" + kFast + " --checkpoint " + ckpt.string() + " --out " +
                e1.string()).code, 0);
  ASSERT_EQ(run("eval --seed 2" + kFast + " --checkpoint " + ckpt.string() + " --out " +
                e2.string()).code, 0);
  EXPECT_EQ(slurp(only_run(e1) / "report_test.json"), slurp(only_run(e2) / "report_test.json"));
  // Eval of the final checkpoint reproduces the training run's own report.
  EXPECT_EQ(json::parse(slurp(only_run(e1) / "report_test.json"))["metrics"],
            json::parse(slurp(only_run(t) / "report_test.json"))["metrics"]);
}

TEST_F(CliTest, UntrainedPolicyIsNearChance) {
  const auto t = root_ / "t";
  const auto r = run("train-grpo --seed 1 --override train.max_steps=0 --out " + t.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = json::parse(slurp(only_run(t) / "report_test.json"));
  const auto m = fasrl::metrics_from_json(report["metrics"]);
  EXPECT_GE(m.n_real + m.n_fake, 1000u);
  EXPECT_NEAR(m.hter, 50.0, 10.0);
}

TEST_F(CliTest, SweepGroupSize) {
  const auto out = root_ / "sw";
  const auto r = run("sweep-group-size --group-sizes 2,3 --seed 4" + kFast + " --out " +
                     out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto dir = only_run(out);
  EXPECT_TRUE(fs::exists(dir / "N2-seed4" / "report_test.json"));
  EXPECT_TRUE(fs::exists(dir / "N3-seed4" / "report_test.json"));
  const auto summary = json::parse(slurp(dir / "summary.json"));
  ASSERT_EQ(summary["rows"].size(), 2u);
  for (const auto& row : summary["rows"]) {
    const auto rep = json::parse(slurp(dir / row["run_dir"].get<std::string>() / "report_test.json"));
    EXPECT_EQ(row["test_hter"], rep["metrics"]["hter"]);
  }
  // Members differing only in N share their splits.
  EXPECT_EQ(slurp(dir / "N2-seed4/data/test.jsonl"), slurp(dir / "N3-seed4/data/test.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "summary.tsv"));

  const auto dup = root_ / "dup";
  const auto d = run("sweep-group-size --group-sizes 2,2 --seed 4" + kFast + " --out " +
                     dup.string());
  EXPECT_EQ(d.code, 2);
  EXPECT_TRUE(run_dirs(dup).empty());
}

TEST_F(CliTest, ParallelSweepMatchesSequential) {
  const auto a = root_ / "a", b = root_ / "b";
  ASSERT_EQ(run("sweep-group-size --group-sizes 2,3 --seeds 1,2" + kFast + " --out " + a.string()).code, 0);
  ASSERT_EQ(run("sweep-group-size --group-sizes 2,3 --seeds 1,2 --parallel" + kFast + " --out " +
                b.string()).code, 0);
  EXPECT_EQ(json::parse(slurp(only_run(a) / "summary.json"))["mean_test_hter"],
            json::parse(slurp(only_run(b) / "summary.json"))["mean_test_hter"]);
}

TEST_F(CliTest, ExportDatasetAndCompare) {
  const auto x = root_ / "x";
  const auto r = run("export-dataset --seed 3" + kFast + " --out " + x.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(fasrl::triplets_from_jsonl(slurp(only_run(x) / "data/test.jsonl")).size(), 40u);

  const auto t = root_ / "t";
  ASSERT_EQ(run("train-grpo --seed 3" + kFast + " --out " + t.string()).code, 0);
  const auto dir = only_run(t);
  const auto c = run("compare --report " + (dir / "report_test.json").string() + " --report " +
                     (dir / "report_holdout.json").string());
  EXPECT_EQ(c.code, 0) << c.output;
  EXPECT_NE(c.output.find("HTER"), std::string::npos);
  const auto bad = run("compare --report " + (dir / "config.json").string() + " --report " +
                       (dir / "report_test.json").string());
  EXPECT_EQ(bad.code, 2);
}

TEST_F(CliTest, RepoConfigsParse) {
  for (const char* cfg : {"configs/benchmark.json", "configs/benchmark_b_to_c.json"}) {
    const auto out = root_ / "x";
    const auto r = run(std::string("export-dataset --config ") + FASRL_SOURCE_DIR + "/" + cfg +
                       " --override protocol.train_samples=10 --out " + out.string());
    EXPECT_EQ(r.code, 0) << cfg << r.output;
  }
}
