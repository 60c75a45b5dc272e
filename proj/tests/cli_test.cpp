#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#ifndef PROACTIVE_CLI_PATH
#error "PROACTIVE_CLI_PATH must point at the built executable"
#endif

namespace {

namespace fs = std::filesystem;

struct Run {
  int status = -1;
  std::string out;  // stdout and stderr together
};

Run run(const std::string& args) {
  const std::string cmd = std::string(PROACTIVE_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("proactive_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "spec.json") << R"({
      "goals": [{"name": "brew", "template": ["a0", "a1", "a2", "a0"]},
                {"name": "toast", "template": ["b0", "b1", "b2", "b0"]}],
      "actions": {"a0": {"mu": 0.0, "sigma": 0.3}, "a1": {"mu": 1.5, "sigma": 0.3}, "a2": {"mu": 0.0, "sigma": 0.3},
                  "b0": {"mu": 0.0, "sigma": 0.3}, "b1": {"mu": 1.5, "sigma": 0.3}, "b2": {"mu": 0.0, "sigma": 0.3}},
      "sequences": 60, "seed": 3})";
    std::ofstream(dir_ / "run.json") << R"({"model": {"D": 8, "M": 2}, "train": {"epochs": 2}})";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void synth_and_train() {
    ASSERT_EQ(run("synth --spec " + path("spec.json") + " --out " + path("corpus.jsonl")).status, 0);
    const auto r = run("train --data " + path("corpus.jsonl") + " --config " + path("run.json") + " --out " + path("ckpt"));
    ASSERT_EQ(r.status, 0) << r.out;
  }

  fs::path dir_;
};

TEST_F(Cli, HelpListsEverySubcommandAndFlag) {
  const auto top = run("--help");
  EXPECT_EQ(top.status, 0);
  for (const char* sub : {"synth", "train", "eval", "generate", "gradcheck", "sweep", "ablate-delete"})
    EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
  const auto gen = run("generate --help");
  EXPECT_EQ(gen.status, 0);
  for (const char* flag : {"--ckpt", "--goal", "--first-mark", "--first-t", "--greedy", "--seed", "--max-len", "--out"})
    EXPECT_NE(gen.out.find(flag), std::string::npos) << flag;
}

TEST_F(Cli, SynthTrainEvalGenerate) {
  synth_and_train();
  for (const char* f : {"ckpt/checkpoint.json", "ckpt/best.json", "ckpt/train_log.jsonl", "ckpt/train.jsonl", "ckpt/test.jsonl"})
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;

  auto r = run("eval --ckpt " + path("ckpt") + " --data " + path("ckpt/test.jsonl") + " --report " + path("report.json") +
               " --prefixes 0.3,0.6");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto report = nlohmann::json::parse(slurp(dir_ / "report.json"));
  EXPECT_EQ(report["format"], "proactive.eval_report");
  EXPECT_EQ(report["gpa_at"].size(), 2u);

  r = run("generate --ckpt " + path("ckpt") + " --goal toast --first-mark b0 --first-t 0.5 --count 4 --seed 2 --out " +
          path("gen.jsonl"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto first = slurp(dir_ / "gen.jsonl");
  EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 4);
  EXPECT_EQ(first.find("<EOS>"), std::string::npos);
  const auto reasons = nlohmann::json::parse(slurp(dir_ / "gen.reasons.json"));
  EXPECT_EQ(reasons["records"].size(), 4u);
  ASSERT_EQ(run("generate --ckpt " + path("ckpt") + " --goal toast --first-mark b0 --first-t 0.5 --count 4 --seed 2 --out " +
                path("gen.jsonl"))
                .status,
            0);
  EXPECT_EQ(slurp(dir_ / "gen.jsonl"), first);
}

TEST_F(Cli, ResumeExtendsTraining) {
  synth_and_train();
  const auto r = run("train --data " + path("corpus.jsonl") + " --config " + path("run.json") +
                     " --set train.epochs=3 --resume --out " + path("ckpt"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("resuming after epoch 2"), std::string::npos);
  const auto log = slurp(dir_ / "ckpt/train_log.jsonl");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 3);
}

TEST_F(Cli, OutputsReproducibleUnderSeed) {
  ASSERT_EQ(run("synth --spec " + path("spec.json") + " --seed 9 --out " + path("a.jsonl")).status, 0);
  ASSERT_EQ(run("synth --spec " + path("spec.json") + " --seed 9 --out " + path("b.jsonl")).status, 0);
  EXPECT_EQ(slurp(dir_ / "a.jsonl"), slurp(dir_ / "b.jsonl"));
  ASSERT_EQ(run("ablate-delete --data " + path("a.jsonl") + " --fraction 0.4 --seed 1 --out " + path("c.jsonl")).status, 0);
  ASSERT_EQ(run("ablate-delete --data " + path("a.jsonl") + " --fraction 0.4 --seed 1 --out " + path("d.jsonl")).status, 0);
  EXPECT_EQ(slurp(dir_ / "c.jsonl"), slurp(dir_ / "d.jsonl"));
  EXPECT_NE(slurp(dir_ / "a.jsonl"), slurp(dir_ / "c.jsonl"));
}

TEST_F(Cli, SweepWritesOneRowPerPoint) {
  ASSERT_EQ(run("synth --spec " + path("spec.json") + " --out " + path("corpus.jsonl")).status, 0);
  std::ofstream(dir_ / "grid.json") << R"({"D": [4, 8]})";
  const auto r = run("sweep --config " + path("run.json") + " --data " + path("corpus.jsonl") + " --grid " +
                     path("grid.json") + " --out " + path("sweep.csv"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto csv = slurp(dir_ / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST_F(Cli, GradcheckPassesOnDefaultConfig) {
  const auto r = run("gradcheck --tol 1e-4");
  EXPECT_EQ(r.status, 0) << r.out;
}

TEST_F(Cli, ErrorsCarryCodeAndStatus) {
  auto r = run("eval --ckpt " + path("nothing") + " --data " + path("x.jsonl") + " --report " + path("r.json"));
  EXPECT_EQ(r.status, 18);
  EXPECT_EQ(r.out.rfind("error: E_NO_CKPT: ", 0), 0u) << r.out;

  std::ofstream(dir_ / "bad.json") << R"({"model": {"dimension": 8}})";
  r = run("gradcheck --config " + path("bad.json"));
  EXPECT_EQ(r.status, 16);
  EXPECT_NE(r.out.find("E_CONFIG"), std::string::npos);

  r = run("synth --spec " + path("missing.json") + " --out " + path("o.jsonl"));
  EXPECT_EQ(r.status, 17);

  r = run("train --out " + path("ckpt"));
  EXPECT_EQ(r.status, 16);

  r = run("synth --spec");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("error: E_USAGE"), std::string::npos);
}

}  // namespace
