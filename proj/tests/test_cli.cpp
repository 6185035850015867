// Copyright 2026 The LVCM Workbench Authors
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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lvcm/cli/app.hpp"

namespace lvcm {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("lvcm_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  static std::string read(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    std::vector<const char*> argv{"lvcm"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, ExactRunWritesTraceAndSidecar) {
  const auto csv = path("exact.csv");
  ASSERT_EQ(run({"--backend", "exact", "--lambda-over-delta", "5", "--modes", "2", "-o", csv}), 0) << err_.str();
  const auto text = read(csv);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 41);
  const auto meta = read(csv + ".meta.ini");
  EXPECT_NE(meta.find("[model]"), std::string::npos);
  EXPECT_NE(meta.find("[diagnostics]"), std::string::npos);

  const auto again = path("again.csv");
  ASSERT_EQ(run({"--config", csv + ".meta.ini", "-o", again}), 0) << err_.str();
  EXPECT_EQ(read(again), text);
}

TEST_F(CliTest, FlagsOverrideConfig) {
  write("run.ini", "[run]\nbackend = exact\nlambda_over_delta = 1\nmodes = 2\n[grid]\npoints = 10\n");
  const auto csv = path("out.csv");
  ASSERT_EQ(run({"run", "--config", path("run.ini"), "--points", "5", "-o", csv}), 0) << err_.str();
  const auto text = read(csv);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 6);
}

TEST_F(CliTest, ParseErrorsExitTwo) {
  EXPECT_EQ(run({"--no-such-flag"}), 2);
  EXPECT_EQ(run({"--backend", "quantum"}), 2);
  write("bad.ini", "[run]\nbackend = exact\n\n[grid]\npoints = 10\nponts = 3\n");
  EXPECT_EQ(run({"--config", path("bad.ini"), "-o", path("x.csv")}), 2);
  EXPECT_NE(err_.str().find("ponts"), std::string::npos);
  EXPECT_NE(err_.str().find("6"), std::string::npos);
  write("clash.ini", "[run]\npreset = toy\n[model]\nstates = 2\n");
  EXPECT_EQ(run({"--config", path("clash.ini")}), 2);
  EXPECT_EQ(run({"compile", "--backend", "exact"}), 2);
  EXPECT_FALSE(fs::exists(path("x.csv")));
}

TEST_F(CliTest, ConvergenceFailureExitsThree) {
  write("tight.ini", "[run]\nbackend = exact\nlambda_over_delta = 30\nmodes = 2\n[exact]\nmax_dimension = 60\n");
  EXPECT_EQ(run({"--config", path("tight.ini"), "-o", path("t.csv")}), 3) << err_.str();
}

TEST_F(CliTest, InfeasibleScheduleExitsFour) {
  write("slow.ini", "[hardware]\nsideband_rabi_max_khz = 0.01\n");
  EXPECT_EQ(run({"compile", "--config", path("slow.ini"), "--lambda-over-delta", "30", "-o", path("s.txt")}), 4)
      << err_.str();
  EXPECT_NE(err_.str().find("term"), std::string::npos);
}

TEST_F(CliTest, EstimateCsv) {
  const auto csv = path("est.csv");
  ASSERT_EQ(run({"estimate", "--lambda-over-delta", "30", "--modes", "5", "-o", csv}), 0) << err_.str();
  const auto text = read(csv);
  EXPECT_EQ(text.rfind("lambda_over_delta,N,R,total_s,overhead_s,operation_s,run_operation_ms\n", 0), 0u);
  EXPECT_NE(text.find("57.005"), std::string::npos);
}

TEST_F(CliTest, Compare) {
  ASSERT_EQ(run({"--backend", "exact", "--lambda-over-delta", "1", "-o", path("a.csv")}), 0);
  ASSERT_EQ(run({"compare", path("a.csv"), path("a.csv")}), 0);
  EXPECT_NE(out_.str().find("max_overall 0 "), std::string::npos) << out_.str();
  EXPECT_NE(out_.str().find("OK"), std::string::npos);

  auto tr = load_trace(path("a.csv"));
  for (auto& row : tr.populations) row[1] += 0.25;
  write("b.csv", trace_to_csv(tr));
  ASSERT_EQ(run({"compare", path("a.csv"), path("b.csv"), "--threshold", "0.1"}), 0);
  const auto report = out_.str();
  const auto at = report.find("max_overall ");
  ASSERT_NE(at, std::string::npos);
  EXPECT_NEAR(std::stod(report.substr(at + 12)), 0.25, 1e-12);
  EXPECT_NE(out_.str().find("FLAG"), std::string::npos);
}

TEST_F(CliTest, SmallSweep) {
  write("grid.ini", "[run]\nbackend = exact\n[grid]\npoints = 5\n[sweep]\nlambda_over_delta = 1, 5\nmodes = 2\n");
  ASSERT_EQ(run({"sweep", "--config", path("grid.ini"), "-o", path("sw")}), 0) << err_.str();
  EXPECT_TRUE(fs::exists(path("sw/toy_l1_n2_exact.csv")));
  EXPECT_TRUE(fs::exists(path("sw/toy_l5_n2_exact.csv")));
  EXPECT_TRUE(fs::exists(path("sw/toy_l5_n2_exact.csv.meta.ini")));
}

TEST_F(CliTest, PresetFiles) {
  for (const char* name : {"ci", "vaet", "plet"}) {
    const auto preset = std::string(LVCM_SOURCE_DIR) + "/presets/" + name + ".ini";
    const auto csv = path(std::string(name) + ".csv");
    ASSERT_EQ(run({"--config", preset, "--points", "8", "-o", csv}), 0) << name << ": " << err_.str();
    EXPECT_EQ(load_trace(csv).size(), 8u);
  }
}

}  // namespace
}  // namespace lvcm
