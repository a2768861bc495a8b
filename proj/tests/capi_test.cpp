#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "uqr/uqr.h"

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "phantoms: 10\n"
    "iterations: 12\n"
    "validation_every: 6\n"
    "network: {depth: 2, base_channels: 2}\n"
    "phantom: {size: 32}\n";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::map<std::string, std::string> contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

class CApi : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("uqr_capi_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "tiny.yaml") << kTinyConfig;
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  // Trains a tiny model and simulates two matching test phantoms.
  void prepare(const char* task) {
    ASSERT_EQ(uqr_train(task, path("tiny.yaml").c_str(), 0, 0, 0, 0, 0, path("run").c_str()), UQR_OK)
        << uqr_last_error();
    ASSERT_EQ(uqr_simulate(2, 90, path("tiny.yaml").c_str(), path("sim").c_str()), UQR_OK) << uqr_last_error();
  }

  fs::path dir;
};

TEST_F(CApi, GridRoundTrip) {
  const double v[6] = {0, 1, 2, 3, 4, 5};
  uqr_grid* g = nullptr;
  ASSERT_EQ(uqr_grid_create(2, 3, v, &g), UQR_OK);
  size_t h = 0, w = 0;
  ASSERT_EQ(uqr_grid_shape(g, &h, &w), UQR_OK);
  EXPECT_EQ(h, 2u);
  EXPECT_EQ(w, 3u);
  ASSERT_EQ(uqr_grid_save(g, path("g.img").c_str()), UQR_OK);
  uqr_grid* back = nullptr;
  ASSERT_EQ(uqr_grid_load(path("g.img").c_str(), &back), UQR_OK);
  double out[6] = {};
  ASSERT_EQ(uqr_grid_values(back, out, 6), UQR_OK);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(out[i], v[i]);
  EXPECT_EQ(uqr_grid_values(back, out, 5), UQR_ERR_USAGE);
  uqr_grid_free(g);
  uqr_grid_free(back);
}

TEST_F(CApi, NullArgumentsAreUsageErrors) {
  uqr_grid* g = nullptr;
  EXPECT_EQ(uqr_grid_create(2, 2, nullptr, &g), UQR_ERR_USAGE);
  EXPECT_NE(std::string(uqr_last_error()).find("values"), std::string::npos);
  EXPECT_EQ(uqr_grid_load(nullptr, &g), UQR_ERR_USAGE);
  EXPECT_EQ(uqr_simulate(0, 1, nullptr, path("s").c_str()), UQR_ERR_USAGE);
  EXPECT_EQ(uqr_simulate(1, 1, nullptr, nullptr), UQR_ERR_USAGE);
  uqr_grid_free(nullptr);
  uqr_model_free(nullptr);
}

TEST_F(CApi, MissingAndMalformedFilesAreDataErrors) {
  uqr_grid* g = nullptr;
  EXPECT_EQ(uqr_grid_load(path("absent.img").c_str(), &g), UQR_ERR_DATA);
  EXPECT_EQ(g, nullptr);
  std::ofstream(dir / "junk.img") << "not a grid";
  EXPECT_EQ(uqr_grid_load(path("junk.img").c_str(), &g), UQR_ERR_DATA);
  EXPECT_NE(std::string(uqr_last_error()).find("offset"), std::string::npos);
  uqr_model* m = nullptr;
  EXPECT_EQ(uqr_model_load(path("junk.img").c_str(), &m), UQR_ERR_DATA);
  std::ofstream(dir / "bad.yaml") << "lr: -1\n";
  EXPECT_EQ(uqr_train(nullptr, path("bad.yaml").c_str(), 0, 0, 0, 0, 0, path("r").c_str()), UQR_ERR_DATA);
  EXPECT_NE(std::string(uqr_last_error()).find("lr"), std::string::npos);
  std::ofstream(dir / "unknown.yaml") << "learning_rate: 0.1\n";
  EXPECT_EQ(uqr_train(nullptr, path("unknown.yaml").c_str(), 0, 0, 0, 0, 0, path("r").c_str()), UQR_ERR_DATA);
  EXPECT_NE(std::string(uqr_last_error()).find("learning_rate"), std::string::npos);
}

TEST_F(CApi, LastErrorIsPerThreadAndStable) {
  uqr_grid* g = nullptr;
  ASSERT_EQ(uqr_grid_load(path("absent.img").c_str(), &g), UQR_ERR_DATA);
  const std::string first = uqr_last_error();
  const double v[1] = {1};
  ASSERT_EQ(uqr_grid_create(1, 1, v, &g), UQR_OK);
  EXPECT_EQ(first, uqr_last_error());
  uqr_grid_free(g);
}

TEST_F(CApi, SimulateIsByteIdentical) {
  ASSERT_EQ(uqr_simulate(3, 7, nullptr, path("a").c_str()), UQR_OK);
  ASSERT_EQ(uqr_simulate(3, 7, nullptr, path("b").c_str()), UQR_OK);
  const auto a = contents(dir / "a");
  EXPECT_EQ(a.size(), 7u);  // three image/label pairs plus the manifest
  EXPECT_EQ(a, contents(dir / "b"));
  EXPECT_TRUE(a.count("phantom_9.lbl"));
}

TEST_F(CApi, CorruptWritesOutputAndManifest) {
  ASSERT_EQ(uqr_simulate(1, 3, nullptr, path("sim").c_str()), UQR_OK);
  std::ofstream(dir / "r.yaml") << "steps:\n  - rician: {snr_db: 5}\n";
  ASSERT_EQ(uqr_corrupt(path("sim/phantom_3.img").c_str(), path("r.yaml").c_str(), 4, path("c").c_str()), UQR_OK)
      << uqr_last_error();
  EXPECT_TRUE(fs::exists(dir / "c/corrupted.img"));
  EXPECT_NE(slurp(dir / "c/manifest.yaml").find("snr_db: 5"), std::string::npos);

  uqr_grid *in = nullptr, *out = nullptr;
  ASSERT_EQ(uqr_grid_load(path("sim/phantom_3.img").c_str(), &in), UQR_OK);
  ASSERT_EQ(uqr_corrupt_grid(in, path("r.yaml").c_str(), 4, &out), UQR_OK);
  ASSERT_EQ(uqr_grid_save(out, path("mem.img").c_str()), UQR_OK);
  EXPECT_EQ(slurp(dir / "mem.img"), slurp(dir / "c/corrupted.img"));
  uqr_grid_free(in);
  uqr_grid_free(out);

  ASSERT_EQ(uqr_corrupt_ladder(path("sim/phantom_3.img").c_str(), 10, -10, 41, 1, path("l").c_str()), UQR_OK);
  EXPECT_TRUE(fs::exists(dir / "l/ladder_00.img"));
  EXPECT_TRUE(fs::exists(dir / "l/ladder_40.img"));
}

TEST_F(CApi, TrainAndEvaluateRerunsAreByteIdentical) {
  prepare("multitask");
  ASSERT_EQ(uqr_train("multitask", path("tiny.yaml").c_str(), 0, 0, 0, 0, 0, path("run2").c_str()), UQR_OK);
  EXPECT_EQ(contents(dir / "run"), contents(dir / "run2"));

  const std::string model = path("run/model.uqr"), image = path("sim/phantom_90.img");
  for (const char* out : {"ev1", "ev2"})
    ASSERT_EQ(uqr_evaluate_ladder(model.c_str(), image.c_str(), 5, 10, -10, 41, path(out).c_str()), UQR_OK)
        << uqr_last_error();
  EXPECT_EQ(contents(dir / "ev1"), contents(dir / "ev2"));
  const std::string csv = slurp(dir / "ev1/ladder.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 42);

  const std::string i0 = path("sim/phantom_90.img"), i1 = path("sim/phantom_91.img");
  const std::string l0 = path("sim/phantom_90.lbl"), l1 = path("sim/phantom_91.lbl");
  const char* images[] = {i0.c_str(), i1.c_str()};
  const char* labels[] = {l0.c_str(), l1.c_str()};
  for (const char* out : {"pa1", "pa2"})
    ASSERT_EQ(uqr_evaluate_partial(model.c_str(), images, labels, 2, nullptr, nullptr, 0, 3, path(out).c_str()),
              UQR_OK)
        << uqr_last_error();
  EXPECT_EQ(contents(dir / "pa1"), contents(dir / "pa2"));
  EXPECT_TRUE(fs::exists(dir / "pa1/qc_partial.csv"));
}

TEST_F(CApi, ManifestReplaysTraining) {
  prepare("recon");
  ASSERT_EQ(uqr_train(nullptr, path("run/manifest.yaml").c_str(), 0, 0, 0, 0, 0, path("replay").c_str()), UQR_OK)
      << uqr_last_error();
  EXPECT_EQ(contents(dir / "run"), contents(dir / "replay"));
}

TEST_F(CApi, OverridesApply) {
  ASSERT_EQ(uqr_train("recon", path("tiny.yaml").c_str(), 1, 99, 1, 3, 0, path("run").c_str()), UQR_OK);
  const std::string m = slurp(dir / "run/manifest.yaml");
  EXPECT_NE(m.find("seed: 99"), std::string::npos);
  EXPECT_NE(m.find("iterations: 3"), std::string::npos);
  EXPECT_NE(m.find("iterations_completed: 3"), std::string::npos);
}

TEST_F(CApi, PredictAndQcScore) {
  prepare("recon");
  uqr_model* m = nullptr;
  ASSERT_EQ(uqr_model_load(path("run/model.uqr").c_str(), &m), UQR_OK);
  EXPECT_EQ(uqr_model_has_segmentation(m), 0);
  uqr_grid* img = nullptr;
  ASSERT_EQ(uqr_grid_load(path("sim/phantom_90.img").c_str(), &img), UQR_OK);
  uqr_grid *mean = nullptr, *sr = nullptr, *logit = nullptr, *ss = nullptr;
  ASSERT_EQ(uqr_model_predict(m, img, &mean, &sr, &logit, &ss), UQR_OK);
  EXPECT_NE(mean, nullptr);
  EXPECT_NE(sr, nullptr);
  EXPECT_EQ(logit, nullptr);
  EXPECT_EQ(ss, nullptr);
  std::vector<double> sigma(32 * 32);
  ASSERT_EQ(uqr_grid_values(sr, sigma.data(), sigma.size()), UQR_OK);
  for (double s : sigma) EXPECT_GT(s, 0);
  uqr_grid_free(mean);
  uqr_grid_free(sr);

  const double wrong[4] = {0, 0, 0, 0};
  uqr_grid* small = nullptr;
  ASSERT_EQ(uqr_grid_create(2, 2, wrong, &small), UQR_OK);
  EXPECT_EQ(uqr_model_predict(m, small, &mean, nullptr, nullptr, nullptr), UQR_ERR_DATA);
  EXPECT_EQ(mean, nullptr);
  uqr_grid_free(small);
  uqr_grid_free(img);
  uqr_model_free(m);

  const std::string i0 = path("sim/phantom_90.img");
  const char* images[] = {i0.c_str()};
  ASSERT_EQ(uqr_qc_score(path("run/model.uqr").c_str(), images, 1, path("qc").c_str()), UQR_OK);
  const std::string csv = slurp(dir / "qc/qc.csv");
  EXPECT_EQ(csv.rfind("image_id,median_sigma,q1,q3,total_sigma\nphantom_90,", 0), 0u) << csv;
}

TEST_F(CApi, PartialNeedsMultitaskModel) {
  prepare("recon");
  const std::string i0 = path("sim/phantom_90.img"), l0 = path("sim/phantom_90.lbl");
  const char* images[] = {i0.c_str()};
  const char* labels[] = {l0.c_str()};
  EXPECT_EQ(uqr_evaluate_partial(path("run/model.uqr").c_str(), images, labels, 1, nullptr, nullptr, 0, 1,
                                 path("p").c_str()),
            UQR_ERR_USAGE);
  EXPECT_NE(std::string(uqr_last_error()).find("multitask"), std::string::npos);
}

TEST_F(CApi, NumericAbortMapsToNumericStatus) {
  std::ofstream(dir / "wild.yaml") << "phantoms: 10\niterations: 200\n"
                                      "network: {depth: 2, base_channels: 2}\nphantom: {size: 32}\n"
                                      "corruption: {rician_weight: 0, motion_weight: 0, bias_weight: 1, "
                                      "max_bias_coefficient: 2000}\n";
  EXPECT_EQ(uqr_train(nullptr, path("wild.yaml").c_str(), 0, 0, 0, 0, 0, path("w").c_str()), UQR_ERR_NUMERIC);
  EXPECT_NE(std::string(uqr_last_error()).find("iteration"), std::string::npos);
  EXPECT_NE(slurp(dir / "w/manifest.yaml").find("status: aborted"), std::string::npos);
}

TEST_F(CApi, ReportWritesFigures) {
  prepare("multitask");
  const std::string model = path("run/model.uqr");
  ASSERT_EQ(uqr_evaluate_ladder(model.c_str(), path("sim/phantom_90.img").c_str(), 1, 10, -10, 41,
                                path("ev").c_str()),
            UQR_OK);
  const std::string ev = path("ev"), run = path("run");
  const char* inputs[] = {ev.c_str(), run.c_str()};
  ASSERT_EQ(uqr_report(inputs, 2, path("rep").c_str()), UQR_OK) << uqr_last_error();
  const auto files = contents(dir / "rep");
  EXPECT_TRUE(files.count("0_ev_ladder.svg"));
  EXPECT_TRUE(files.count("1_run_losses.svg"));
  EXPECT_EQ(files.at("0_ev_ladder.svg").rfind("<svg", 0), 0u);
  EXPECT_NE(files.at("report.yaml").find("r2:"), std::string::npos);

  const std::string missing = path("nope");
  const char* bad[] = {missing.c_str()};
  EXPECT_EQ(uqr_report(bad, 1, path("rep2").c_str()), UQR_ERR_DATA);
}

}  // namespace
