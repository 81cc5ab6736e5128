// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string out;  // stdout and stderr
};

Result run(const std::string& args) {
  const std::string cmd = std::string(PCT_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("pct_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) +
                                       "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string at(const std::string& name) const { return (dir / name).string(); }

  fs::path dir;
};

}  // namespace

TEST_F(Cli, UnknownSubcommandAndFlag) {
  EXPECT_NE(run("frobnicate").status, 0);
  const Result r = run("params --bogus");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("bogus"), std::string::npos);
  EXPECT_NE(run("").status, 0);
}

TEST_F(Cli, ValidationNamesKey) {
  const Result r = run("gen-data --out " + at("d") + " --train-fraction 1.5");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("train_fraction"), std::string::npos);
  std::ofstream(at("c.json")) << R"({"epochs": 3, "colour": 1})";
  const Result c = run("gen-data --config " + at("c.json") + " --out " + at("d"));
  EXPECT_EQ(c.status, 1);
  EXPECT_NE(c.out.find("colour"), std::string::npos);
}

TEST_F(Cli, ParamsNearPublishedTotals) {
  auto total = [](const std::string& out) {
    const auto pos = out.find("total");
    return std::stod(out.substr(out.find_first_of("0123456789", pos)));
  };
  const Result spct = run("params --model spct");
  ASSERT_EQ(spct.status, 0) << spct.out;
  EXPECT_NEAR(total(spct.out), 1.36e6, 0.136e6);
  const Result pct = run("params --model pct");
  EXPECT_NEAR(total(pct.out), 2.88e6, 0.432e6);
  EXPECT_NE(pct.out.find("encoder.attention0"), std::string::npos);
}

TEST_F(Cli, GenTrainEvalInfer) {
  const std::string data = at("data"), runp = at("run");
  Result g = run("gen-data --out " + data + " --classes sphere cube --per-class 5 --points 32 --seed 3");
  ASSERT_EQ(g.status, 0) << g.out;
  EXPECT_TRUE(fs::exists(dir / "data" / "manifest.json"));
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "data" / "manifest.json"))["entries"].size(), 10u);

  Result t = run("train --data " + data + " --out " + runp + " --model spct --epochs 2 --batch 4 --deterministic");
  ASSERT_EQ(t.status, 0) << t.out;
  EXPECT_NE(t.out.find("epoch 2"), std::string::npos);
  for (const char* f : {"config.json", "metrics.csv", "checkpoint.bin"}) EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  const auto cfg = nlohmann::json::parse(slurp(dir / "run" / "config.json"));
  EXPECT_EQ(cfg["model"], "spct");
  EXPECT_EQ(cfg["n_outputs"], 2);

  Result e = run("eval --run " + runp);
  ASSERT_EQ(e.status, 0) << e.out;
  const auto ej = nlohmann::json::parse(slurp(dir / "run" / "eval.json"));
  EXPECT_EQ(ej["shapes"], 2);
  EXPECT_GE(ej["accuracy"].get<double>(), 0.0);
  EXPECT_EQ(run("eval --run " + runp + " --multi-scale").status, 0);

  Result i = run("infer --run " + runp + " --input " + data + "/points/00000.txt --output " + at("p.csv"));
  ASSERT_EQ(i.status, 0) << i.out;
  std::ifstream csv(at("p.csv"));
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "x,y,z,pred");

  Result d = run("dump-attention --run " + runp + " --input " + data + "/points/00000.txt --out " + at("att") + " --query 0 5");
  ASSERT_EQ(d.status, 0) << d.out;
  EXPECT_TRUE(fs::exists(dir / "att" / "attention_layer0.csv"));
  EXPECT_TRUE(fs::exists(dir / "att" / "attention_layer0.pgm"));
}

TEST_F(Cli, NormalsRunRejectsMultiScale) {
  const std::string data = at("data"), runp = at("run");
  ASSERT_EQ(run("gen-data --out " + data + " --classes sphere --per-class 4 --points 32").status, 0);
  Result t = run("train --data " + data + " --out " + runp + " --task normals --model pct --epochs 1 --batch 3");
  ASSERT_EQ(t.status, 0) << t.out;
  Result e = run("eval --run " + runp + " --multi-scale");
  EXPECT_EQ(e.status, 1);
  Result i = run("infer --run " + runp + " --input " + data + "/points/00000.txt --output " + at("n.csv"));
  ASSERT_EQ(i.status, 0) << i.out;
  std::ifstream csv(at("n.csv"));
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "x,y,z,nx,ny,nz,gt_nx,gt_ny,gt_nz");
}

TEST_F(Cli, MissingRunDirectory) { EXPECT_NE(run("eval --run " + at("nope")).status, 0); }

TEST_F(Cli, CorruptCheckpoint) {
  const std::string data = at("data"), runp = at("run");
  ASSERT_EQ(run("gen-data --out " + data + " --classes sphere cube --per-class 3 --points 16").status, 0);
  ASSERT_EQ(run("train --data " + data + " --out " + runp + " --model npct --epochs 1 --batch 2").status, 0);
  std::ofstream(dir / "run" / "checkpoint.bin") << "garbage";
  const Result e = run("eval --run " + runp);
  EXPECT_EQ(e.status, 1);
  EXPECT_NE(e.out.find("checkpoint"), std::string::npos);
}

TEST_F(Cli, BenchRuns) {
  const Result b = run("bench --sizes 64 128 --repeats 1");
  ASSERT_EQ(b.status, 0) << b.out;
  EXPECT_NE(b.out.find("128"), std::string::npos);
}
