// Drives the installed command-line tool as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

#include "hfe/dataset.hpp"
#include "hfe/degrade.hpp"
#include "hfe/image.hpp"
#include "tempdir.hpp"

namespace fs = std::filesystem;

namespace hfe {
namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(HFE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// File name -> bytes, for whole-directory comparisons.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

void write_clean_set(const fs::path& dir, std::size_t count, std::size_t size = 32) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < count; ++i)
    save_image(synthetic_image(size, size, 3, 200 + i), dir / ("im" + std::to_string(i) + ".png"));
}

class Cli : public ::testing::Test {
 protected:
  testing::TempDir tmp{"cli"};
  fs::path clean = tmp / "clean";
  void SetUp() override { write_clean_set(clean, 3); }
};

TEST_F(Cli, HelpExitsZeroEverywhere) {
  EXPECT_EQ(run("--help"), 0);
  for (const char* sub : {"synth", "train-phi", "train", "enhance", "gms", "eval"})
    EXPECT_EQ(run(std::string(sub) + " --help"), 0) << sub;
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("synth --input " + clean.string()), 2);
  EXPECT_EQ(run("synth --input " + clean.string() + " --output " + (tmp / "o").string() +
                " --mode sharpen"),
            2);
  EXPECT_EQ(run("synth --input " + clean.string() + " --output " + clean.string()), 2);
  EXPECT_EQ(run("synth --input " + clean.string() + " --output x --sigma abc"), 2);
}

TEST_F(Cli, MissingInputExitsThree) {
  EXPECT_EQ(run("synth --input " + (tmp / "nope").string() + " --output " + (tmp / "o").string()), 3);
  EXPECT_EQ(run("eval --ref " + clean.string() + " --test " + (tmp / "nope").string() +
                " --out " + (tmp / "r.csv").string()),
            3);
}

TEST_F(Cli, BadCheckpointExitsFive) {
  std::ofstream(tmp / "junk.ckpt") << "definitely not a model";
  EXPECT_EQ(run("enhance --model " + (tmp / "junk.ckpt").string() + " --input " +
                clean.string() + " --output " + (tmp / "e").string()),
            5);
}

TEST_F(Cli, SynthZeroSigmaReproducesInputs) {
  const fs::path out = tmp / "zero";
  ASSERT_EQ(run("synth --input " + clean.string() + " --output " + out.string() + " --sigma 0"), 0);
  for (const auto& e : fs::directory_iterator(clean)) {
    const ImageBuffer a = load_image(e.path());
    const ImageBuffer b = load_image(out / e.path().filename());
    EXPECT_EQ(a.pixels, b.pixels) << e.path();
  }
  const auto manifest = read_manifest(out / "manifest.tsv");
  EXPECT_EQ(manifest.size(), 3u);
}

TEST_F(Cli, SynthIsDeterministicAndLeavesInputAlone) {
  const auto before = snapshot(clean);
  const fs::path a = tmp / "a", b = tmp / "b", c = tmp / "c";
  ASSERT_EQ(run("synth --input " + clean.string() + " --output " + a.string() + " --sigma 10 --seed 4"), 0);
  ASSERT_EQ(run("synth --input " + clean.string() + " --output " + b.string() + " --sigma 10 --seed 4"), 0);
  ASSERT_EQ(run("synth --input " + clean.string() + " --output " + c.string() + " --sigma 10 --seed 5"), 0);
  for (const char* name : {"im0.png", "im1.png", "im2.png"}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
    EXPECT_NE(slurp(a / name), slurp(c / name)) << name;
  }
  ASSERT_EQ(run("synth --input " + clean.string() + " --output " + (tmp / "blur").string() +
                " --mode blur --sigma 1.5"),
            0);
  EXPECT_EQ(snapshot(clean), before);
}

TEST_F(Cli, EvalOfIdenticalFoldersIsPerfect) {
  const fs::path report = tmp / "r.csv";
  ASSERT_EQ(run("eval --ref " + clean.string() + " --test " + clean.string() + " --out " + report.string()), 0);
  std::istringstream lines(slurp(report));
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "path,psnr,ssim");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    EXPECT_NE(line.find(",100.000000,1.000000"), std::string::npos) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 4u);  // three images and the mean row
}

TEST_F(Cli, GmsOfIdenticalFoldersIsNearBlack) {
  const fs::path out = tmp / "masks";
  ASSERT_EQ(run("gms --ref " + clean.string() + " --test " + clean.string() + " --out " + out.string() + " --soft"), 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    const ImageBuffer m = load_image(e.path());
    EXPECT_EQ(m.channels, 1u);
    for (float v : m.pixels) ASSERT_LE(v, 0.01f) << e.path();
    ++files;
  }
  EXPECT_EQ(files, 9u);
}

TEST_F(Cli, TrainEnhanceRoundTrip) {
  const fs::path noisy = tmp / "noisy";
  ASSERT_EQ(run("synth --input " + clean.string() + " --output " + noisy.string() + " --sigma 30"), 0);
  const fs::path cfg = tmp / "run.ini";
  std::ofstream(cfg) << "[network]\nblocks = 1,1,1\nchannels = 4\n"
                        "[train]\nbatch_size = 2\npatch_size = 16\nmax_steps = 6\npsnr_every = 3\n"
                        "[finetune]\nsteps = 2\n";
  const fs::path model = tmp / "m.ckpt";
  ASSERT_EQ(run("train --config " + cfg.string() + " --data " + (noisy / "manifest.tsv").string() +
                " --out " + model.string()),
            0);
  const std::string log = slurp(tmp / "m.ckpt.csv");
  EXPECT_EQ(log.rfind("step,lr,loss,psnr\n", 0), 0u);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 9);

  const fs::path resumed = tmp / "m2.ckpt";
  EXPECT_EQ(run("train --config " + cfg.string() + " --data " + (noisy / "manifest.tsv").string() +
                " --resume " + model.string() + " --out " + resumed.string()),
            0);

  const auto before = snapshot(noisy);
  const fs::path enhanced = tmp / "enh";
  ASSERT_EQ(run("enhance --model " + model.string() + " --input " + noisy.string() + " --output " +
                enhanced.string()),
            0);
  EXPECT_EQ(snapshot(noisy), before);
  for (const char* name : {"im0.png", "im1.png", "im2.png"}) {
    const ImageBuffer out = load_image(enhanced / name);
    EXPECT_EQ(out.height, 32u);
    EXPECT_EQ(out.width, 32u);
  }

  // A checkpoint for a different architecture is rejected on resume.
  const fs::path other = tmp / "other.ini";
  std::ofstream(other) << "[network]\nblocks = 1,1,1\nchannels = 8\n[train]\nbatch_size = 2\npatch_size = 16\nmax_steps = 1\n";
  EXPECT_EQ(run("train --config " + other.string() + " --data " + (noisy / "manifest.tsv").string() +
                " --resume " + model.string() + " --out " + (tmp / "m3.ckpt").string()),
            5);
  // High-pass weight without a frozen network is a usage error.
  std::ofstream(other) << "[train]\nhf_weight = 0.1\npatch_size = 16\n";
  EXPECT_EQ(run("train --config " + other.string() + " --data " + (noisy / "manifest.tsv").string() +
                " --out " + (tmp / "m4.ckpt").string()),
            2);
}

}  // namespace
}  // namespace hfe
