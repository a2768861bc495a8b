#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::map<std::string, std::string> contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("uqr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  // Runs the CLI with stdout and stderr captured; returns the exit code.
  int run(const std::string& args) {
    const std::string cmd = std::string("'") + UQR_CLI_PATH + "' " + args + " > '" + (dir / "stdout").string() +
                            "' 2> '" + (dir / "stderr").string() + "'";
    const int raw = std::system(cmd.c_str());
    out = slurp(dir / "stdout");
    err = slurp(dir / "stderr");
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  }

  std::string p(const std::string& name) const { return "'" + (dir / name).string() + "'"; }

  fs::path dir;
  std::string out, err;
};

void expect_one_line(const std::string& err) {
  ASSERT_FALSE(err.empty());
  EXPECT_EQ(err.find('\n'), err.size() - 1) << err;
  EXPECT_EQ(err.rfind("uqr: error: ", 0), 0u) << err;
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  expect_one_line(err);
  EXPECT_EQ(run("simulate --phantoms 2 --out " + p("s") + " --bogus"), 1);
  expect_one_line(err);
  EXPECT_NE(err.find("--bogus"), std::string::npos);
  EXPECT_EQ(run("simulate --phantoms 2"), 1);
  expect_one_line(err);
  EXPECT_EQ(run("train --task denoise --out " + p("t")), 1);
  EXPECT_EQ(run("evaluate --protocol fig3 --model x --image y --out " + p("e")), 1);
  EXPECT_FALSE(fs::exists(dir / "s"));
}

TEST_F(Cli, HelpListsDefaults) {
  EXPECT_EQ(run("train --help"), 0);
  EXPECT_NE(out.find("lr: 1e-04"), std::string::npos) << out;
  EXPECT_NE(out.find("iterations: 5000"), std::string::npos);
}

TEST_F(Cli, DataErrorsExitTwo) {
  std::ofstream(dir / "bad.yaml") << "lr: -1\n";
  EXPECT_EQ(run("train --config " + p("bad.yaml") + " --out " + p("t")), 2);
  expect_one_line(err);
  EXPECT_NE(err.find("lr"), std::string::npos);
  std::ofstream(dir / "broken.yaml") << "lr: [1\n";
  EXPECT_EQ(run("train --config " + p("broken.yaml") + " --out " + p("t")), 2);
  EXPECT_NE(err.find("line"), std::string::npos) << err;
  std::ofstream(dir / "junk.uqr") << "UQR2\n";
  std::ofstream(dir / "junk.img") << "UQG1";
  EXPECT_EQ(run("qc-score --model " + p("junk.uqr") + " --image " + p("junk.img") + " --out " + p("q")), 2);
  expect_one_line(err);
}

TEST_F(Cli, NumericAbortExitsThree) {
  std::ofstream(dir / "wild.yaml") << "phantoms: 10\niterations: 200\n"
                                      "network: {depth: 2, base_channels: 2}\nphantom: {size: 32}\n"
                                      "corruption: {rician_weight: 0, motion_weight: 0, bias_weight: 1, "
                                      "max_bias_coefficient: 2000}\n";
  EXPECT_EQ(run("train --config " + p("wild.yaml") + " --out " + p("w")), 3);
  expect_one_line(err);
  EXPECT_NE(err.find("iteration"), std::string::npos);
}

TEST_F(Cli, SimulateTwiceIsByteIdentical) {
  ASSERT_EQ(run("simulate --phantoms 10 --seed 7 --out " + p("a")), 0) << err;
  ASSERT_EQ(run("simulate --phantoms 10 --seed 7 --out " + p("b")), 0) << err;
  const auto a = contents(dir / "a");
  EXPECT_EQ(a.size(), 21u);
  EXPECT_EQ(a, contents(dir / "b"));
}

TEST_F(Cli, PipelineRunsEndToEnd) {
  std::ofstream(dir / "tiny.yaml") << "phantoms: 10\niterations: 8\nnetwork: {depth: 2, base_channels: 2}\n"
                                      "phantom: {size: 32}\n";
  ASSERT_EQ(run("train --task multitask --config " + p("tiny.yaml") + " --out " + p("run")), 0) << err;
  ASSERT_EQ(run("simulate --phantoms 2 --seed 90 --config " + p("tiny.yaml") + " --out " + p("sim")), 0) << err;
  const std::string model = p("run/model.uqr"), img = p("sim/phantom_90.img"), img2 = p("sim/phantom_91.img");
  ASSERT_EQ(run("evaluate --protocol ladder --model " + model + " --image " + img + " --out " + p("ev")), 0) << err;
  const std::string ladder = slurp(dir / "ev/ladder.csv");
  EXPECT_EQ(std::count(ladder.begin(), ladder.end(), '\n'), 42);
  EXPECT_EQ(run("evaluate --protocol ladder --model " + model + " --image " + img + " " + img2 + " --out " +
                p("ev2")),
            1);
  ASSERT_EQ(run("evaluate --protocol partial --model " + model + " --image " + img + " " + img2 + " --out " +
                p("pa")),
            0)
      << err;
  ASSERT_EQ(run("qc-score --model " + model + " --image " + img + " " + img2 + " --out " + p("qc")), 0) << err;
  const std::string qc = slurp(dir / "qc/qc.csv");
  EXPECT_EQ(qc.rfind("image_id,median_sigma,q1,q3,total_sigma,", 0), 0u) << qc;
  ASSERT_EQ(run("corrupt --image " + img + " --ladder --levels 5 --out " + p("lad")), 0) << err;
  EXPECT_TRUE(fs::exists(dir / "lad/ladder_04.img"));
  ASSERT_EQ(run("report --input " + p("ev") + " " + p("pa") + " " + p("run") + " --out " + p("rep")), 0) << err;
  EXPECT_TRUE(fs::exists(dir / "rep/report.yaml"));
  for (const char* d : {"run", "sim", "ev", "pa", "qc", "lad", "rep"})
    EXPECT_TRUE(fs::exists(dir / d / "manifest.yaml")) << d;
}

TEST_F(Cli, InputsAreNotModified) {
  ASSERT_EQ(run("simulate --phantoms 1 --seed 3 --out " + p("sim")), 0);
  std::ofstream(dir / "r.yaml") << "steps:\n  - bias: {order: 1, coefficients: [0.1, 0.2, 0.0]}\n";
  const std::string before = slurp(dir / "sim/phantom_3.img");
  ASSERT_EQ(run("corrupt --image " + p("sim/phantom_3.img") + " --recipe " + p("r.yaml") + " --out " + p("c")), 0)
      << err;
  EXPECT_EQ(before, slurp(dir / "sim/phantom_3.img"));
  EXPECT_NE(before, slurp(dir / "c/corrupted.img"));
}

}  // namespace
