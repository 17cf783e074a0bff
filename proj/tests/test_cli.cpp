// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using fairlora::testing::scratch_dir;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

Outcome run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" FAIRLORA_CLI "\" " + args + " 2>/dev/null";
    Outcome o;
    FILE* p = popen(cmd.c_str(), "r");
    if (p == nullptr) return o;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) o.out.append(buf, n);
    const int status = pclose(p);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

constexpr const char* kTinySpec = R"({
  "strategies": ["erm", "orth"],
  "data": {"n": 200, "features": 8, "test_n": 100},
  "backbone": {"architecture": "mlp", "depth": 2, "width": 12, "input_dim": 8, "pretrain_steps": 10},
  "train": {"epochs": 2, "steps_per_epoch": 3, "batch_size": 16},
  "seeds": [0, 1]
})";

fs::path write_spec(const fs::path& dir, const std::string& body = kTinySpec) {
    std::ofstream(dir / "spec.json") << body;
    return dir / "spec.json";
}

} // namespace

TEST(Cli, RunIsByteReproducible) {
    const auto dir = scratch_dir("cli_run");
    const fs::path spec = write_spec(dir);
    const Outcome a = run_cli("run --spec " + spec.string() + " --out " + (dir / "a").string() + " --format csv");
    const Outcome b = run_cli("run --spec " + spec.string() + " --out " + (dir / "b").string() + " --format csv");
    ASSERT_EQ(a.code, 0);
    ASSERT_EQ(b.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(a.out.rfind("strategy,seed,metric,value\n", 0), 0u);
    EXPECT_EQ(slurp(dir / "a" / "report.csv"), slurp(dir / "b" / "report.csv"));
    EXPECT_TRUE(fs::exists(dir / "a" / "report.md"));
    EXPECT_EQ(slurp(dir / "a" / "runs" / "orth_seed1" / "sd" / "task_stack.flra"),
              slurp(dir / "b" / "runs" / "orth_seed1" / "sd" / "task_stack.flra"));
}

TEST(Cli, SeedOverrideFromEnvironment) {
    const auto dir = scratch_dir("cli_env");
    const fs::path spec = write_spec(dir);
    const Outcome o = run_cli("run --spec " + spec.string() + " --format csv", "FAIRLORA_SEED=7");
    ASSERT_EQ(o.code, 0);
    EXPECT_NE(o.out.find("erm,7,"), std::string::npos);
    EXPECT_EQ(o.out.find("erm,0,"), std::string::npos);
    EXPECT_EQ(run_cli("run --spec " + spec.string(), "FAIRLORA_SEED=seven").code, 2);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
    const auto dir = scratch_dir("cli_bad");
    EXPECT_EQ(run_cli("run --spec " + write_spec(dir, R"({"strategies": ["fair"]})").string()).code, 2);
    EXPECT_EQ(run_cli("run --spec " + write_spec(dir, R"({"colour": 1})").string()).code, 2);
    EXPECT_EQ(run_cli("run --spec " + write_spec(dir, R"({"data": {"features": 12}})").string()).code, 2);
    EXPECT_EQ(run_cli("frobnicate").code, 2);
    EXPECT_EQ(run_cli("run --spec /nonexistent.json").code, 2);
}

TEST(Cli, EvalReportsFromScores) {
    const auto dir = scratch_dir("cli_eval");
    std::ofstream(dir / "s.csv") << "score,label,group\n0.9,1,0\n0.2,0,0\n0.6,0,0\n0.7,1,1\n0.4,1,1\n0.1,0,1\n";
    const Outcome o = run_cli("eval --scores " + (dir / "s.csv").string() + " --format csv");
    ASSERT_EQ(o.code, 0);
    EXPECT_NE(o.out.find("model,0,ACC,0.66666666666666663"), std::string::npos) << o.out;
    std::ofstream(dir / "bad.csv") << "p,y,g\n0.5,1,0\n";
    EXPECT_EQ(run_cli("eval --scores " + (dir / "bad.csv").string()).code, 3);
}

TEST(Cli, GenDataAndAudit) {
    const auto dir = scratch_dir("cli_audit");
    const fs::path spec = write_spec(dir);
    ASSERT_EQ(run_cli("gen-data --spec " + spec.string() + " --out " + (dir / "data").string()).code, 0);
    EXPECT_TRUE(fs::exists(dir / "data" / "co_train.csv"));
    EXPECT_EQ(slurp(dir / "data" / "sd_train.csv").find("group"), std::string::npos);

    ASSERT_EQ(run_cli("run --spec " + spec.string() + " --out " + (dir / "out").string()).code, 0);
    const fs::path transcript = dir / "out" / "runs" / "orth_seed1" / "transcript.json";
    const Outcome ok = run_cli("audit --transcript " + transcript.string() + " --spec " + spec.string() + " --seed 1");
    EXPECT_EQ(ok.code, 0) << ok.out;
    EXPECT_NE(ok.out.find("PASS"), std::string::npos);

    // One payload byte flipped: the logged hash no longer matches.
    const fs::path msg = dir / "out" / "runs" / "orth_seed1" / "transcript_payloads" / "msg0.flra";
    std::string bytes = slurp(msg);
    bytes[bytes.size() - 1] ^= 1;
    std::ofstream(msg, std::ios::binary) << bytes;
    EXPECT_EQ(run_cli("audit --transcript " + transcript.string()).code, 6);
}

TEST(Cli, PartiesAsSeparateProcesses) {
    const auto dir = scratch_dir("cli_party");
    const fs::path spec = write_spec(dir);
    const std::string common = " --spec " + spec.string() + " --strategy orth --exchange " + (dir / "x").string() +
                               " --timeout 120";
    const std::string co_cmd = "\"" FAIRLORA_CLI "\" party --role co" + common + " >/dev/null 2>&1 &";
    ASSERT_EQ(std::system(co_cmd.c_str()), 0);
    const Outcome sd = run_cli("party --role sd" + common);
    ASSERT_EQ(sd.code, 0);
    EXPECT_NE(sd.out.find("SD finished orth"), std::string::npos);
    const Outcome au = run_cli("audit --transcript " + (dir / "x" / "transcript.json").string() + " --spec " +
                               spec.string());
    EXPECT_EQ(au.code, 0) << au.out;
}
