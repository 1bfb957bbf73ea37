// SPDX-License-Identifier: Apache-2.0
// End-to-end checks of the dbar-eit binary: exit codes, determinism and the
// files each subcommand leaves behind.
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "eit/dataset.hpp"
#include "eit/metrics.hpp"
#include "eit/serialize.hpp"

using namespace eit;
namespace fs = std::filesystem;

namespace {

const fs::path root = fs::temp_directory_path() / "eit_test_cli";

int run(const std::string& args, std::string* out = nullptr) {
  const fs::path log = root / "stdout.txt";
  const std::string cmd = std::string(EIT_CLI) + " " + args + " > " + log.string() + " 2> " + (root / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  if (out) {
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    *out = ss.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string p(const std::string& name) { return (root / name).string(); }

// A homogeneous disk: a phantom without inclusions.
std::string homogeneous_phantom() {
  const auto path = p("homogeneous.json");
  std::ofstream(path) << R"({"style": "kit4", "seed": 0, "background": 1.0, "inclusions": []})";
  return path;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(root);
    fs::create_directories(root);
  }
};

}  // namespace

TEST_F(Cli, SimulateWritesFullDtN) {
  ASSERT_EQ(run("simulate --style kit4 --seed 1 --noise 0.0075 --level 2 --out " + p("sim")), 0);
  const auto L = io::read_dtn(p("sim") + "/dtn.dbar");
  EXPECT_EQ(L.values.rows(), 33);
  EXPECT_EQ(L.values.cols(), 33);
  EXPECT_TRUE(fs::exists(p("sim") + "/phantom.json"));
}

TEST_F(Cli, NoiselessSimulationIsReproducible) {
  ASSERT_EQ(run("simulate --seed 3 --noise 0 --level 2 --out " + p("a")), 0);
  ASSERT_EQ(run("simulate --seed 3 --noise 0 --level 2 --out " + p("b")), 0);
  EXPECT_EQ(io::read_bytes(p("a") + "/dtn.dbar"), io::read_bytes(p("b") + "/dtn.dbar"));
}

TEST_F(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run("simulate --out " + p("x")), 1);
  EXPECT_EQ(run("simulate --seed 1 --phantom foo.json --out " + p("x")), 1);
  EXPECT_EQ(run("reconstruct --out " + p("x")), 1);
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, HomogeneousInputReconstructsToOne) {
  ASSERT_EQ(run("simulate --phantom " + homogeneous_phantom() + " --noise 0 --level 2 --out " + p("hom")), 0);
  ASSERT_EQ(run("reconstruct --dtn " + p("hom") + "/dtn.dbar --Rdelta 2 --l 5 --zgrid 16 --out " + p("hom.img") +
                " --png " + p("hom.png")),
            0);
  const auto img = io::read_image(p("hom.img"));
  EXPECT_EQ(img.values.width(), 16u);
  for (double v : img.values) EXPECT_NEAR(v, 1.0, 1e-3);
  EXPECT_TRUE(fs::exists(p("hom.png")));
}

TEST_F(Cli, DirectSolverGuardIsAStageFailure) {
  ASSERT_EQ(run("simulate --phantom " + homogeneous_phantom() + " --noise 0 --level 2 --out " + p("g")), 0);
  EXPECT_EQ(run("reconstruct --dtn " + p("g") + "/dtn.dbar --solver direct --l 7 --out " + p("g.img")), 2);
  EXPECT_FALSE(fs::exists(p("g.img")));
}

TEST_F(Cli, EmptyDataset) {
  ASSERT_EQ(run("dataset --count 0 --out " + p("empty")), 0);
  EXPECT_TRUE(dataset::read_manifest(p("empty")).empty());
  // a second run must not clobber it silently
  EXPECT_EQ(run("dataset --count 0 --out " + p("empty")), 1);
}

TEST_F(Cli, ResumeIsIdempotentAndEvalIsConsistent) {
  const std::string common = " --delta 0 --Rdelta 2 --radii 2.5,3 --l 5 --zgrid 16 --level 2 --out ";
  ASSERT_EQ(run("dataset --count 3" + common + p("full")), 0);
  ASSERT_EQ(run("dataset --count 2" + common + p("part")), 0);
  ASSERT_EQ(run("dataset --count 3 --resume" + common + p("part")), 0);
  ASSERT_EQ(run("dataset --count 3 --resume" + common + p("part")), 0);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_EQ(io::read_bytes(p("full") + "/" + dataset::sample_file_name(i)),
              io::read_bytes(p("part") + "/" + dataset::sample_file_name(i)));
  EXPECT_EQ(io::read_bytes(p("full") + "/manifest.txt"), io::read_bytes(p("part") + "/manifest.txt"));

  std::string table;
  ASSERT_EQ(run("eval --pred " + p("full") + " --gt " + p("part") + " --csv " + p("same.csv"), &table), 0);
  std::ifstream same(p("same.csv"));
  std::string line;
  std::getline(same, line);
  EXPECT_EQ(line, "sample,psnr,ssim,rmse");
  std::size_t rows = 0;
  while (std::getline(same, line)) {
    ++rows;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "0") << line;
  }
  EXPECT_EQ(rows, 3u + 1);  // samples plus the mean

  // low-pass channel: the mean row equals an independent recomputation
  ASSERT_EQ(run("eval --channel 1 --pred " + p("full") + " --gt " + p("full") + " --csv " + p("lp.csv")), 0);
  const auto data = dataset::read_dataset(p("full"));
  double psnr = 0, ssim = 0, rmse = 0;
  for (const auto& s : data) {
    const auto r = metrics::evaluate(s.lowpass.values, s.truth.values);
    psnr += r.psnr;
    ssim += r.ssim;
    rmse += r.rmse;
  }
  std::ifstream lp(p("lp.csv"));
  std::string last;
  while (std::getline(lp, line))
    if (!line.empty()) last = line;
  double m[3];
  ASSERT_EQ(std::sscanf(last.c_str(), "mean,%lf,%lf,%lf", &m[0], &m[1], &m[2]), 3);
  EXPECT_NEAR(m[0], psnr / 3, 1e-9);
  EXPECT_NEAR(m[1], ssim / 3, 1e-12);
  EXPECT_NEAR(m[2], rmse / 3, 1e-12);

  EXPECT_EQ(run("eval --channel 9 --pred " + p("full") + " --gt " + p("full")), 1);
  EXPECT_EQ(run("eval --pred " + p("full") + " --gt " + p("empty")), 2);
}

TEST_F(Cli, BenchReportsBothSolvers) {
  std::string out;
  ASSERT_EQ(run("bench --l 5,6 --points 1", &out), 0);
  EXPECT_NE(out.find("richardson"), std::string::npos);
  EXPECT_NE(out.find("direct"), std::string::npos);
  ASSERT_EQ(run("bench --l 7,8,9 --points 1", &out), 0);
  EXPECT_NE(out.find("skipped"), std::string::npos);
  EXPECT_NE(out.find("\n9 "), std::string::npos);
}
