// Copyright 2026 the tus authors
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

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "support.hpp"
#include "tus/bundle.hpp"

namespace tus {
namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// ctest runs each case in its own process, so scratch space is per process.
std::filesystem::path private_dir(const std::string& name) {
  return testing::scratch_dir(name + "_" + std::to_string(::getpid()));
}

Run tus_cli(const std::string& args) {
  static const auto dir = private_dir("cli_io");
  const auto out = dir / "stdout", err = dir / "stderr";
  const std::string cmd = std::string(TUS_CLI_PATH) + " " + args + " >" + out.string() + " 2>" +
                          err.string();
  const int status = std::system(cmd.c_str());
  return Run{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

// Generates a small workload and builds a bundle once per test binary.
const std::filesystem::path& workspace() {
  static const std::filesystem::path dir = [] {
    auto d = private_dir("cli_ws");
    const auto g = tus_cli("generate --out " + d.string() +
                           " --n-sets 80 --queries 4 --noise 0.5 --topics 20 --seed 3");
    EXPECT_EQ(g.code, 0) << g.err;
    const auto b = tus_cli("build --repo " + (d / "repo.manifest").string() + " --out " +
                           (d / "bundle").string() + " --partition-mode single");
    EXPECT_EQ(b.code, 0) << b.err;
    return d;
  }();
  return dir;
}

std::string index_arg() { return " --index " + (workspace() / "bundle").string(); }
std::string queries_arg(const char* flag = "--queries") {
  return std::string(" ") + flag + " " + (workspace() / "queries.manifest").string();
}

bool one_error_line(const std::string& err, const std::string& code, const std::string& kind) {
  const std::regex line("^error code=" + code + " kind=" + kind + " msg=\"[^\\n]*\"\\n$");
  return std::regex_match(err, line);
}

TEST(Cli, BuildReportsSizes) {
  const auto d = private_dir("cli_build");
  const auto r = tus_cli("build --repo " + (workspace() / "repo.manifest").string() + " --out " +
                         d.string() + " --seed 5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("build_ms="), std::string::npos);
  EXPECT_NE(r.out.find("component=codebook.bin bytes="), std::string::npos);
  EXPECT_NE(r.out.find("quantized_bytes="), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(d / "bundle.meta"));
}

TEST(Cli, SearchPrintsRankedHitsAndExplain) {
  const auto r = tus_cli("search" + index_arg() + queries_arg("--query") + " -k 3 --explain");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::size_t hits = 0, explains = 0;
  const std::regex hit("query=\\d+ rank=\\d+ set=\\d+ score=[0-9.]+ cardinality=\\d+");
  while (std::getline(lines, line)) {
    if (std::regex_match(line, hit)) ++hits;
    if (line.find("refined=") != std::string::npos) ++explains;
  }
  EXPECT_EQ(hits, 4u * 3u);
  EXPECT_EQ(explains, 4u);
}

TEST(Cli, OversizedKReturnsAllSetsWithWarning) {
  const auto r = tus_cli("search" + index_arg() + queries_arg("--query") + " -k 500");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning: k=500"), std::string::npos);
  EXPECT_NE(r.out.find("query=0 rank=80 "), std::string::npos);
  EXPECT_EQ(r.out.find("query=0 rank=81 "), std::string::npos);
}

TEST(Cli, EvalOracleConfigurationGivesFullRecall) {
  const auto r = tus_cli("eval" + index_arg() + queries_arg() +
                         " --ann exact --phi-c 100000 --phi-ref 80 --phi-r 80 -k 5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mean_recall=1.000000"), std::string::npos) << r.out;

  const auto cache = private_dir("cli_truth");
  const auto a = tus_cli("eval" + index_arg() + queries_arg() + " --truth-dir " + cache.string());
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(std::distance(std::filesystem::directory_iterator(cache), {}), 1);
  const auto file = std::filesystem::directory_iterator(cache)->path();
  const auto b = tus_cli("eval" + index_arg() + queries_arg() + " --truth " + file.string());
  EXPECT_EQ(b.out, a.out);
  const auto c = tus_cli("eval" + index_arg() + queries_arg() + " --tau 0.8 --truth " + file.string());
  EXPECT_EQ(c.code, 3);
  EXPECT_TRUE(one_error_line(c.err, "truth_mismatch", "data")) << c.err;
}

TEST(Cli, InspectCapacitiesSumToVectors) {
  const auto r = tus_cli("inspect" + index_arg());
  ASSERT_EQ(r.code, 0) << r.err;
  std::smatch m1, m2;
  ASSERT_TRUE(std::regex_search(r.out, m1, std::regex("total_vectors=(\\d+)")));
  ASSERT_TRUE(std::regex_search(r.out, m2, std::regex("capacity_sum=(\\d+)")));
  EXPECT_EQ(m1[1], m2[1]);
  EXPECT_NE(r.out.find("branch=single sets=80"), std::string::npos);
  EXPECT_NE(r.out.find("dispersion=(0.9,1.0] sets="), std::string::npos);
}

TEST(Cli, BenchWritesTableAndJsonl) {
  const auto d = private_dir("cli_bench");
  std::ofstream(d / "cfg.json") << R"({"k": 3, "phi_c": [4], "phi_ref_multiples": [1, 2],
                                       "pruners": ["base", "enhanced"], "warmup": 0})";
  const auto r = tus_cli("bench" + index_arg() + queries_arg() + " --config " +
                         (d / "cfg.json").string() + " --jsonl " + (d / "out.jsonl").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("method\tphi_c\tphi_ref\tphi_r\trecall\tp50_ms\tp95_ms\tscore_calls\n", 0), 0u);
  const auto jsonl = slurp(d / "out.jsonl");
  EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 4);
}

TEST(Cli, ExitCodesAndErrorLines) {
  auto r = tus_cli("search" + index_arg() + queries_arg("--query") + " -k 5 --phi-r 3");
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(one_error_line(r.err, "invalid_parameter", "usage")) << r.err;

  r = tus_cli("search" + index_arg() + queries_arg("--query") + " --pruner fast");
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(one_error_line(r.err, "invalid_pruner", "usage")) << r.err;

  r = tus_cli("frobnicate");
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(one_error_line(r.err, "bad_arguments", "usage")) << r.err;

  r = tus_cli("inspect --index /nonexistent/bundle");
  EXPECT_EQ(r.code, 3);
  EXPECT_TRUE(one_error_line(r.err, "missing_file", "data")) << r.err;

  const auto d = private_dir("cli_badbundle");
  std::filesystem::copy(workspace() / "bundle", d, std::filesystem::copy_options::recursive);
  {
    std::fstream f(d / "codebook.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(20);
    f.put('\x7f');
  }
  r = tus_cli("inspect --index " + d.string());
  EXPECT_EQ(r.code, 3);
  EXPECT_TRUE(one_error_line(r.err, "checksum_mismatch", "data")) << r.err;

  r = tus_cli("search --index " + d.string() + " --query /nonexistent.manifest");
  EXPECT_EQ(r.code, 3);
}

TEST(Cli, BuildIsDeterministic) {
  const auto a = private_dir("cli_det_a"), b = private_dir("cli_det_b");
  const auto repo = (workspace() / "repo.manifest").string();
  ASSERT_EQ(tus_cli("build --repo " + repo + " --out " + a.string() + " --seed 9").code, 0);
  ASSERT_EQ(tus_cli("--threads 3 build --repo " + repo + " --out " + b.string() + " --seed 9").code, 0);
  for (const auto& e : std::filesystem::directory_iterator(a)) {
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
  }
}

}  // namespace
}  // namespace tus
