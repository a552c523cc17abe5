#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("climax_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Result run(const std::string& args) {
  static int counter = 0;
  const fs::path err = fs::temp_directory_path() / ("climax_cli_err_" + std::to_string(++counter));
  const std::string cmd = std::string(CLIMAX_CLI) + " " + args + " 2>" + err.string();
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  fs::remove(err);
  return r;
}

const std::string kDiabetes = std::string("--data ") + CLIMAX_DATA_DIR + "/diabetes.csv --label outcome";
const std::string kBreast = std::string("--data ") + CLIMAX_DATA_DIR + "/breast_cancer.csv --label diagnosis";

}  // namespace

TEST(Cli, ExplainIsDeterministic) {
  const std::string args = "explain " + kBreast + " --method ce-climax --balance gmm --index 7 --seed 42 --trees 30";
  const Result a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto doc = nlohmann::json::parse(a.out);
  EXPECT_EQ(doc["seed"], 42);
  EXPECT_EQ(doc["phi"].size(), 30u);
}

TEST(Cli, ListsExactlyKFeatures) {
  const Result r = run("explain " + kDiabetes + " --method lime --k 5 --index 3 --seed 1 --trees 30");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["top_features"].size(), 5u);
  EXPECT_EQ(doc["method"], "lime");
}

TEST(Cli, WritesDocumentAndChartToOutDir) {
  const fs::path dir = scratch("explain");
  const Result r = run("explain " + kDiabetes + " --index 0 --seed 2 --trees 20 --influence --balance ros --out " +
                       dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto doc = nlohmann::json::parse(slurp(dir / "explanation.json"));
  EXPECT_EQ(doc["influence"], true);
  const std::string svg = slurp(dir / "explanation.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_FALSE(fs::exists(dir / "explanation.json.tmp"));
}

TEST(Cli, ExternalHostMatchesBuiltInForest) {
  const std::string common = kDiabetes + " --seed 9 --trees 20";
  const std::string host = std::string(CLIMAX_CLI) + " host " + common;
  const Result inproc = run("explain " + common + " --index 5 --method ce-climax --balance gmm");
  const Result remote =
      run("explain " + common + " --index 5 --method ce-climax --balance gmm --blackbox-cmd '" + host + "'");
  ASSERT_EQ(inproc.code, 0) << inproc.err;
  ASSERT_EQ(remote.code, 0) << remote.err;
  EXPECT_EQ(inproc.out, remote.out);
}

TEST(Cli, ExternalTestHost) {
  const std::string host = std::string(CLIMAX_TEST_HOST) + " echo 8";
  const Result r = run("explain " + kDiabetes + " --index 1 --seed 3 --k 1 --balance ros --blackbox-cmd '" + host + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  // The echo host's logit is 2 x0 - x1; on raw diabetes units glucose (x1)
  // has by far the larger standardized weight.
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["top_features"][0]["index"], 1);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("explain " + kDiabetes + " --index 0 --seed 1 --method bogus").code, 2);
  EXPECT_EQ(run("explain " + kDiabetes + " --index 0 --seed 1 --k 0").code, 2);
  EXPECT_EQ(run("explain " + kDiabetes + " --index 100000 --seed 1").code, 2);
  EXPECT_EQ(run("explain " + kDiabetes + " --seed 1").code, 2);  // --index missing
  EXPECT_EQ(run("explain --data /nonexistent.csv --label y --index 0 --seed 1").code, 3);
  const Result missing_label = run(std::string("explain --data ") + CLIMAX_DATA_DIR +
                                   "/diabetes.csv --label nope --index 0 --seed 1");
  EXPECT_EQ(missing_label.code, 3);
  EXPECT_NE(missing_label.err.find("nope"), std::string::npos);
  const Result dead = run("explain " + kDiabetes + " --index 0 --seed 1 --blackbox-cmd '" +
                          std::string(CLIMAX_TEST_HOST) + " exit'");
  EXPECT_EQ(dead.code, 4);
  const Result flat = run("explain " + kDiabetes + " --index 0 --seed 1 --blackbox-cmd '" +
                          std::string(CLIMAX_TEST_HOST) + " constant 8'");
  EXPECT_EQ(flat.code, 5);
}

TEST(Cli, MissingSeedIsPickedAndPrinted) {
  const Result r = run("explain " + kDiabetes + " --index 0 --trees 10");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = r.err.find("seed: ");
  ASSERT_NE(pos, std::string::npos);
  const std::string seed = r.err.substr(pos + 6, r.err.find('\n', pos) - pos - 6);
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(std::to_string(doc["seed"].get<unsigned long long>()), seed);
  // Replaying the printed seed reproduces the run.
  EXPECT_EQ(run("explain " + kDiabetes + " --index 0 --trees 10 --seed " + seed).out, r.out);
}

TEST(Cli, StabilityOutputs) {
  const fs::path dir = scratch("stability");
  const Result r = run("stability " + kDiabetes +
                       " --methods lime,ce-climax-gmm --n-prime 100,200 --repeats 3 --index-count 2 --seed 7 "
                       "--trees 10 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dir / "diabetes_stability.csv");
  EXPECT_EQ(csv.rfind("dataset,method,n_prime,index_id,mean_jaccard\n", 0), 0u);
  EXPECT_NE(csv.find("# summary"), std::string::npos);
  const auto doc = nlohmann::json::parse(slurp(dir / "diabetes_stability.json"));
  EXPECT_EQ(doc["cells"].size(), 8u);
  for (const auto& c : doc["cells"]) EXPECT_EQ(c["pairs"], 3);
  EXPECT_EQ(slurp(dir / "diabetes_stability.svg").rfind("<svg", 0), 0u);
  EXPECT_NE(r.out.find("diabetes ce-climax-gmm n'=200 mean_jaccard="), std::string::npos);
}

TEST(Cli, StabilitySingleRepeatIsNaN) {
  const fs::path dir = scratch("stability1");
  const Result r = run("stability " + kDiabetes +
                       " --methods lime --n-prime 100 --repeats 1 --index-count 2 --seed 7 --trees 10 --out " +
                       dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(dir / "diabetes_stability.csv"));
  std::string line;
  std::getline(csv, line);
  int cells = 0;
  while (std::getline(csv, line) && !line.empty()) {
    EXPECT_EQ(line.substr(line.size() - 4), ",NaN");
    ++cells;
  }
  EXPECT_EQ(cells, 2);
  EXPECT_NE(r.out.find("mean_jaccard=NaN"), std::string::npos);
}

TEST(Cli, ModelInfo) {
  const Result r = run("model-info " + kDiabetes + " --seed 1 --trees 20");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("n=768 d=8 classes=2"), std::string::npos);
  EXPECT_NE(r.out.find("accuracy "), std::string::npos);
}
