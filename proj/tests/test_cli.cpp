#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "csdp/cli.hpp"
#include "csdp/mab.hpp"
#include "csdp/model_io.hpp"

using namespace csdp;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("csdp_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

struct CliRun {
  int exit_code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

json read_json(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  return json::parse(f);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("mab subcommand reports both solution routes") {
  TempDir tmp;
  const std::string out = tmp.file("mab.json");
  const CliRun r = run({"mab", "--p", "0.5", "--mode", "both", "--out", out});
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("gain discrepancy") != std::string::npos);
  const json j = read_json(out);
  CHECK(std::abs(j["closed_form"]["gain"].get<double>() - 0.75) <= 1e-5);
  CHECK(std::abs(j["rvi"]["gain"].get<double>() - 0.75) <= 1e-5);
  CHECK(j["gain_discrepancy"].get<double>() < 1e-5);
  // Closed-form residuals ride along in the report.
  for (const auto& [index, residual] : j["closed_form"]["residuals"].items()) {
    (void)index;
    CHECK(residual.get<double>() < 1e-9);
  }
}

TEST_CASE("mab reports are byte-stable") {
  TempDir tmp;
  const std::string a = tmp.file("a.json"), b = tmp.file("b.json");
  REQUIRE(run({"mab", "--p", "0.3", "--mode", "both", "--out", a}).exit_code == 0);
  REQUIRE(run({"mab", "--p", "0.3", "--mode", "both", "--out", b}).exit_code == 0);
  CHECK(read_file(a) == read_file(b));
}

TEST_CASE("closed form requires symmetric arrivals") {
  const CliRun r = run({"mab", "--p", "0.3", "--p2", "0.5", "--mode", "closed-form"});
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("symmetric") != std::string::npos);
}

TEST_CASE("roots print twelve digits") {
  SUBCASE("alpha_1") {
    const CliRun r = run({"roots", "--alpha", "1"});
    REQUIRE(r.exit_code == 0);
    CHECK(std::abs(std::stod(r.out) - 0.34727) <= 5e-5);
    CHECK(r.out.find('.') != std::string::npos);
    CHECK(r.out.substr(r.out.find('.') + 1).size() >= 12);
  }
  SUBCASE("tau") {
    const CliRun r = run({"roots", "--tau"});
    REQUIRE(r.exit_code == 0);
    CHECK(std::abs(std::stod(r.out) - 0.38196) <= 5e-5);
  }
}

TEST_CASE("verify subcommand gates on suite results") {
  const CliRun r = run({"verify", "--suite", "mab-fixed-point"});
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("PASS suite mab-fixed-point") != std::string::npos);
  const CliRun bad = run({"verify", "--suite", "no-such-suite"});
  CHECK(bad.exit_code == 2);
}

TEST_CASE("emitted model files load and solve") {
  TempDir tmp;
  const std::string model_path = tmp.file("emitted.json");
  REQUIRE(run({"mab", "--p", "0.4", "--emit-model", model_path}).exit_code == 0);
  const CoupledModel m = load_model(model_path);
  CHECK(m.n == 2);
  CHECK(m.sense == Sense::maximize);
}

TEST_CASE("solve subcommand on a model file") {
  TempDir tmp;
  const std::string model_path = tmp.file("mab.json");
  save_model(mab::mab_model({0.3, 0.3}), model_path);

  SUBCASE("finite horizon") {
    const std::string out = tmp.file("solve.json");
    const CliRun r =
        run({"solve", "--model", model_path, "--horizon", "1", "--out", out});
    REQUIRE(r.exit_code == 0);
    const json j = read_json(out);
    CHECK(j["kind"] == "finite-horizon");
    CHECK(std::abs(j["value_at_initial"].get<double>() - 0.42) < 1e-12);
  }
  SUBCASE("average reward") {
    const std::string out = tmp.file("avg.json");
    const CliRun r = run({"solve", "--model", model_path, "--average", "--tol", "1e-8",
                          "--out", out});
    REQUIRE(r.exit_code == 0);
    const json j = read_json(out);
    const double expected = mab::closed_form(0.3, 30).gain;
    CHECK(std::abs(j["gain"].get<double>() - expected) <= 1e-5);
  }
  SUBCASE("discounted") {
    const std::string out = tmp.file("disc.json");
    const CliRun r = run({"solve", "--model", model_path, "--discount", "0.9", "--tol",
                          "1e-6", "--out", out});
    REQUIRE(r.exit_code == 0);
    const json j = read_json(out);
    CHECK(j["kind"] == "discounted");
    CHECK(j["iterations"].get<int>() > 0);
    CHECK_FALSE(j["values"]["entries"].empty());
  }
  SUBCASE("missing mode is an error") {
    CHECK(run({"solve", "--model", model_path}).exit_code == 2);
  }
}

TEST_CASE("simulate subcommand") {
  TempDir tmp;
  SUBCASE("closed-form shortcut") {
    const std::string out = tmp.file("sim.json");
    const CliRun r = run({"simulate", "--mab-p", "0.2", "--policy", "closed-form",
                          "--steps", "20000", "--seed", "3", "--out", out});
    REQUIRE(r.exit_code == 0);
    const json j = read_json(out);
    CHECK(j["steps"] == 20000);
    CHECK(j["max_belief_drift"].get<double>() <= 1e-9);
    const double gain = mab::closed_form(0.2, 60).gain;
    CHECK(std::abs(j["mean"].get<double>() - gain) <=
          3.0 * j["std_error"].get<double>());
  }
  SUBCASE("policy file produced by the mab subcommand") {
    const std::string policy = tmp.file("policy.json");
    REQUIRE(run({"mab", "--p", "0.5", "--mode", "closed-form", "--out", policy})
                .exit_code == 0);
    const std::string out = tmp.file("sim2.json");
    const CliRun r = run({"simulate", "--mab-p", "0.5", "--policy", policy, "--steps",
                          "20000", "--seed", "9", "--out", out});
    REQUIRE(r.exit_code == 0);
    const json j = read_json(out);
    CHECK(std::abs(j["mean"].get<double>() - 0.75) <=
          3.0 * j["std_error"].get<double>());
  }
}

TEST_CASE("malformed inputs exit with code two and diagnostics") {
  TempDir tmp;
  const std::string bad = tmp.file("bad.json");
  {
    std::ofstream f(bad);
    f << "{ not json";
  }
  const CliRun r = run({"solve", "--model", bad, "--horizon", "1"});
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("parse error") != std::string::npos);

  const std::string invalid = tmp.file("invalid.json");
  {
    json j = model_to_json(mab::mab_model({0.3, 0.3}));
    j["shared_kernel"][0][0] = {0.5, 0.2};
    std::ofstream f(invalid);
    f << j.dump();
  }
  const CliRun rv = run({"solve", "--model", invalid, "--horizon", "1"});
  CHECK(rv.exit_code == 2);
  CHECK(rv.err.find("validation") != std::string::npos);
}

TEST_CASE("usage errors exit with code sixty-four") {
  CHECK(run({"mab", "--p", "0.5", "--frobnicate"}).exit_code == 64);
  CHECK(run({"no-such-command"}).exit_code == 64);
  CHECK(run({}).exit_code == 64);
}

TEST_CASE("help is not an error") {
  const CliRun r = run({"--help"});
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("solve") != std::string::npos);
}
