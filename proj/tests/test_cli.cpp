#include "test_util.hpp"

#include "nashfiber/fiber.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nashfiber;
using namespace testutil;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + NASHFIBER_CLI + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("nashfiber_test_" + name);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli cone: umbrella summary") {
  const Run r = run("cone catalog/whitney.json");
  CHECK(r.code == 0);
  CHECK(r.out.find("link: half great circle, dim C = 2") != std::string::npos);
}

TEST_CASE("cli cone: cusp summary") {
  const Run r = run("cone cusp");
  CHECK(r.code == 0);
  CHECK(r.out.find("link: 1 point (0,0,1)") != std::string::npos);
}

TEST_CASE("cli: missing scene file exits 2") {
  CHECK(run("cone /nonexistent/scene.json").code == 2);
  CHECK(run("classify /nonexistent/scene.json --ray 0,1,0").code == 2);
}

TEST_CASE("cli classify: exceptional and off-cone rays") {
  const Run a = run("classify catalog/whitney.json --ray 0,1,0");
  CHECK(a.code == 0);
  CHECK(Json::parse(a.out)["verdict"] == "exceptional_b");
  const Run b = run("classify catalog/whitney.json --ray 1,0,0");
  CHECK(b.code == 0);
  CHECK(Json::parse(b.out)["verdict"] == "not_in_cone");
}

TEST_CASE("cli classify: malformed ray is an analysis failure") {
  CHECK(run("classify whitney --ray 1,0").code == 1);
  CHECK(run("classify whitney --ray 1,x,0").code == 1);
}

TEST_CASE("cli: thresholds must be positive") {
  CHECK(run("classify whitney --ray 0,1,0 --eps-g 0").code == 1);
}

TEST_CASE("cli fiber: JSON round-trip reproduces the component count") {
  const auto path = temp_path("fiber.json");
  const Run r = run("fiber codim2 --ray 0,0,0,1 --json " + path.string());
  CHECK(r.code == 0);
  const Json j = Json::parse(read_file(path));
  const FiberEstimate f = fiber_from_json(j);
  CHECK(fiber_connectivity(f).size() == j["components"].size());
  CHECK(fiber_connectivity(f).size() == 2);
  std::filesystem::remove(path);
}

TEST_CASE("cli: seed from the environment is deterministic") {
  const Run a = run("classify whitney --ray 0.2,1,0.1", "NASHFIBER_SEED=11");
  const Run b = run("classify whitney --ray 0.2,1,0.1 --seed 99", "NASHFIBER_SEED=11");
  const Run c = run("classify whitney --ray 0.2,1,0.1 --seed 11");
  CHECK(a.code == b.code);
  CHECK(a.out == b.out);
  CHECK(a.out == c.out);
}

TEST_CASE("cli sphere-map: versioned CSV") {
  const Run r = run("sphere-map cusp --grid 40");
  CHECK(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "schema,x1,x2,x3,verdict,fiber_diameter,cluster_count");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.rfind("sphere-map/1,", 0) == 0);
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
  }
  CHECK(rows == 40);
}

TEST_CASE("cli dump-samples: one JSON record per line") {
  const Run r = run("dump-samples cusp --ray 0,0,1");
  CHECK(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    const Json j = Json::parse(line);
    for (const char* key : {"k", "r", "x", "piece", "plane"}) CHECK(j.contains(key));
    ++rows;
  }
  CHECK(rows > 0);
}

TEST_CASE("cli check-dimension: warns on a wrong declared dimension") {
  CHECK(run("check-dimension plane --strict").code == 0);
  const auto path = temp_path("wrong_dim.json");
  {
    std::ofstream out(path);
    out << R"({"name": "wrong", "ambient_dim": 3, "declared_dim": 1, "pieces": [{"equations": ["z"]}]})";
  }
  const Run r = run("check-dimension " + path.string() + " --strict");
  CHECK(r.code == 1);
  CHECK(r.out.find("local PCA estimate = 2") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("cli verify: JSON report and exit codes") {
  const auto path = temp_path("report.json");
  const Run ok = run("verify --filter harness/metric --json " + path.string());
  CHECK(ok.code == 0);
  const Json j = Json::parse(read_file(path));
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 4);
  for (const auto& e : j)
    for (const char* key : {"check", "scene", "parameters", "margin", "pass"}) CHECK(e.contains(key));
  std::filesystem::remove(path);

  const Run bad = run("verify --filter whitney/exceptional --eps-g 0.5");
  CHECK(bad.code == 1);
  CHECK(bad.out.find("FAIL whitney/exceptional_fiber.threshold_margin") != std::string::npos);
}
