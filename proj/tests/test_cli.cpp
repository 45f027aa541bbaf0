#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "optree/cli.hpp"
#include "optree/errors.hpp"

using namespace optree;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "optree");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("optree_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("empty input with the mean estimator gives a uniform grid") {
  TempDir dir("empty");
  spit(dir / "empty.csv", "");
  REQUIRE(run({"estimate", "-i", dir / "empty.csv", "-o", dir / "out", "--grid-resolution", "64"}) == 0);
  std::istringstream grid(slurp(dir / "out/density_grid.csv"));
  std::size_t rows = 0;
  for (std::string line; std::getline(grid, line); ++rows) CHECK(line.substr(line.rfind(',') + 1) == "1");
  CHECK(rows == 64);
  const auto meta = nlohmann::json::parse(slurp(dir / "out/metadata.json"));
  CHECK(meta["format_version"] == 1);
  CHECK(meta["data"]["rows"] == 0);
  CHECK_FALSE(meta.contains("runtime_seconds"));
  const auto tree = nlohmann::json::parse(slurp(dir / "out/tree.json"));
  CHECK(tree["leaf_count"] == 1);
}

TEST_CASE("every estimator writes its artifacts") {
  TempDir dir("estimators");
  REQUIRE(run({"simulate", "-g", "BetaMixture", "-n", "300", "--seed", "4", "-o", dir / "beta.csv"}) == 0);
  for (std::string e : {"mean", "hmap", "hutter", "standard-pt"}) {
    CAPTURE(e);
    const std::string out = dir / e;
    REQUIRE(run({"estimate", "-i", dir / "beta.csv", "-o", out, "-e", e, "--grid-resolution", "256", "--truth",
                 "BetaMixture", "--record-runtime"}) == 0);
    for (auto f : {"density_grid.csv", "tree.json", "phi_table.json", "metadata.json"})
      CHECK(fs::exists(fs::path(out) / f));
    CHECK(fs::exists(fs::path(out) / "density.json") == (e != "hutter"));
    const auto meta = nlohmann::json::parse(slurp(fs::path(out) / "metadata.json"));
    CHECK(meta.contains("runtime_seconds"));
    if (e != "hutter") CHECK(meta["truth"]["l1"].get<double>() < 2.0);
  }
}

TEST_CASE("simulate is deterministic") {
  TempDir dir("simulate");
  REQUIRE(run({"simulate", "-g", "UniformSemiBeta2D", "-n", "10", "--seed", "3", "-o", dir / "a.csv"}) == 0);
  REQUIRE(run({"simulate", "-g", "uniform-semi-beta-2d", "-n", "10", "--seed", "3", "-o", dir / "b.csv",
               "--threads", "3"}) == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(run({"simulate", "-g", "SpikyUniforms", "-n", "0", "-o", dir / "c.csv"}) == 2);
  CHECK(run({"simulate", "-g", "Nope", "-n", "5", "-o", dir / "c.csv"}) == 2);

  spit(dir / "boxes.json", R"([{"weight": 1, "lower": [0.25], "upper": [0.5]}])");
  REQUIRE(run({"simulate", "-g", "Custom", "--boxes", dir / "boxes.json", "-n", "50", "-o", dir / "d.csv"}) == 0);
  std::istringstream rows(slurp(dir / "d.csv"));
  for (std::string line; std::getline(rows, line);) {
    const double v = std::stod(line);
    CHECK(v >= 0.25);
    CHECK(v <= 0.5);
  }
}

TEST_CASE("sample-prior") {
  TempDir dir("prior");
  REQUIRE(run({"sample-prior", "--rho", "1", "--draws", "3", "-o", dir / "one.json"}) == 0);
  const auto doc = nlohmann::json::parse(slurp(dir / "one.json"));
  REQUIRE(doc["draws"].size() == 3);
  for (const auto& d : doc["draws"]) {
    CHECK(d["pieces"].size() == 1);
    CHECK(d["pieces"][0]["mass"] == 1.0);
  }
  CHECK(run({"sample-prior", "--max-depth", "0", "-o", dir / "bad.json"}) == 2);
  CHECK(run({"sample-prior", "--rho", "1.5", "-o", dir / "bad.json"}) == 2);

  REQUIRE(run({"sample-prior", "-p", "2", "--rho", "0.3", "--draws", "4", "--seed", "9", "-o", dir / "a.json"}) == 0);
  REQUIRE(run({"sample-prior", "-p", "2", "--rho", "0.3", "--draws", "4", "--seed", "9", "-o", dir / "b.json",
               "--threads", "4"}) == 0);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
}

TEST_CASE("oracle-check exit codes") {
  CHECK(run({"oracle-check", "-p", "2", "-n", "3", "--trials", "50"}) == 0);
  CHECK(run({"oracle-check", "-p", "4"}) == 2);
  CHECK(run({"oracle-check", "--trials", "0"}) == 2);
}

TEST_CASE("configuration errors") {
  TempDir dir("config");
  spit(dir / "x.csv", "0.1\n0.2\n");
  CHECK(run({"estimate", "-i", dir / "x.csv", "-o", dir / "o", "--rho", "0"}) == 2);
  CHECK(run({"estimate", "-i", dir / "x.csv", "-o", dir / "o", "--rho", "1"}) == 2);
  CHECK(run({"estimate", "-i", dir / "x.csv", "-o", dir / "o", "--alpha-rule", "tau", "--tau", "0"}) == 2);
  CHECK(run({"estimate", "-i", dir / "x.csv", "-o", dir / "o", "--alpha-rule", "quadratic"}) == 2);
  CHECK(run({"estimate", "-i", dir / "x.csv", "-o", dir / "o", "-e", "median"}) == 2);
  CHECK(run({"estimate", "-i", dir / "x.csv", "-o", dir / "o", "-p", "2", "-e", "mean"}) == 2);
  CHECK(run({"estimate", "-i", dir / "x.csv", "-o", dir / "o", "--precision-threshold", "-1"}) == 2);
  CHECK(run({"estimate", "-i", dir / "x.csv", "-o", dir / "o", "--truth", "BivariateNormal2D"}) == 2);
  CHECK(run({"estimate", "--bogus"}) == 2);
  CHECK(run({}) == 2);
}

TEST_CASE("config file with flag override") {
  TempDir dir("file");
  spit(dir / "x.csv", "0.1\n0.2\n0.7\n");
  spit(dir / "run.toml", "[estimate]\nestimator = \"hmap\"\nrho = 0.25\ngrid-resolution = 16\n");
  REQUIRE(run({"--config", dir / "run.toml", "estimate", "-i", dir / "x.csv", "-o", dir / "o", "--rho", "0.4"}) == 0);
  const auto meta = nlohmann::json::parse(slurp(dir / "o/metadata.json"));
  CHECK(meta["config"]["estimator"] == "hmap");
  CHECK(meta["config"]["rho"] == 0.4);
  CHECK(meta["config"]["grid_resolution"] == 16);
}

TEST_CASE("data errors") {
  TempDir dir("data");
  spit(dir / "bad.csv", "0.1\nabc\n");
  CHECK(run({"estimate", "-i", dir / "bad.csv", "-o", dir / "o"}) == 3);
  spit(dir / "ragged.csv", "0.1,0.2\n0.3\n");
  CHECK(run({"estimate", "-i", dir / "ragged.csv", "-o", dir / "o", "-p", "2", "-e", "hmap"}) == 3);
  spit(dir / "wide.csv", "3.5\n-1\n");
  CHECK(run({"estimate", "-i", dir / "wide.csv", "-o", dir / "o"}) == 3);
  CHECK(run({"estimate", "-i", dir / "wide.csv", "-o", dir / "o", "--rescale"}) == 0);
  CHECK(run({"estimate", "-i", dir / "missing.csv", "-o", dir / "o"}) == 3);

  CHECK_THROWS_AS(read_csv(dir / "bad.csv", 1), DataError);
  spit(dir / "ok.csv", "0.5, 0.25\n1,0\n\n");
  const auto csv = read_csv(dir / "ok.csv", 2);
  CHECK(csv.coords == std::vector<double>{0.5, 0.25, 1.0, 0.0});
  spit(dir / "gap.csv", "0.5\n\n0.25\n");
  CHECK_THROWS_AS(read_csv(dir / "gap.csv", 1), DataError);
}

TEST_CASE("artifacts are byte-identical across thread counts") {
  TempDir dir("threads");
  REQUIRE(run({"simulate", "-g", "BivariateNormal2D", "-n", "2000", "--seed", "6", "-o", dir / "bn.csv"}) == 0);
  for (std::string e : {"hmap", "hutter"}) {
    CAPTURE(e);
    const std::vector<std::string> base{"estimate", "-i", dir / "bn.csv", "-p", "2", "-e", e, "--grid-resolution", "32"};
    auto one = base, four = base;
    one.insert(one.end(), {"-o", dir / (e + "1"), "--threads", "1"});
    four.insert(four.end(), {"-o", dir / (e + "4"), "--threads", "4"});
    REQUIRE(run(one) == 0);
    REQUIRE(run(four) == 0);
    for (auto f : {"density_grid.csv", "tree.json", "phi_table.json", "metadata.json"})
      CHECK(slurp(fs::path(dir / (e + "1")) / f) == slurp(fs::path(dir / (e + "4")) / f));
  }
}

TEST_CASE("binary tables") {
  TempDir dir("table");
  spit(dir / "t.csv", "1,2,1\n2,2,1\n1,1,1\n1,2,2\n");
  REQUIRE(run({"estimate", "-i", dir / "t.csv", "-o", dir / "o", "--scheme", "table", "-p", "3", "-e", "hmap"}) == 0);
  std::istringstream grid(slurp(dir / "o/density_grid.csv"));
  double total = 0.0;
  std::size_t rows = 0;
  for (std::string line; std::getline(grid, line); ++rows) total += std::stod(line.substr(line.rfind(',') + 1));
  CHECK(rows == 8);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  spit(dir / "bad.csv", "1,3,1\n");
  CHECK(run({"estimate", "-i", dir / "bad.csv", "-o", dir / "o2", "--scheme", "table", "-p", "3", "-e", "hmap"}) == 3);
}

}
