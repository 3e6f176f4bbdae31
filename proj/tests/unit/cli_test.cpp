#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_runner.hpp"
#include "termctl/io.hpp"
#include "test_util.hpp"

using namespace termctl;
using test::run_cli;

namespace {

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "termctl_cli_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& body) {
  const auto path = scratch_dir() / name;
  std::ofstream(path) << body;
  return path.string();
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kRegime = R"({"drift":{"kind":"geometric","lambda":0.5,"b":1,"upsilon_C":1},
  "minorisation":{"alpha":0.5},"moments":{"p":5,"epsilon":0.2,"M":1}})";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("plan happy path") {
    const auto regime = write_file("regime.json", kRegime);
    const auto r = run_cli({"plan", "--regime", regime, "--epsilon", "0.05"});
    REQUIRE(r.code == 0);
    const Json j = Json::parse(r.out);
    CHECK(j["p0"] == 5.0);
    CHECK(j.contains("T_star"));
    CHECK(j.contains("batch_exponent"));
    CHECK(j["stopping_batch_exponent"].get<double>() == doctest::Approx(0.7));
  }

  TEST_CASE("plan with bounds") {
    const auto regime = write_file("regime.json", kRegime);
    const auto r = run_cli({"plan", "--regime", regime, "--bounds", "--r", "1.2"});
    REQUIRE(r.code == 0);
    const Json j = Json::parse(r.out);
    CHECK(j["bounds"].contains("regen_mgf"));
  }

  TEST_CASE("usage errors exit 1") {
    auto r = run_cli({"plan", "--no-such-flag"});
    CHECK(r.code == 1);
    CHECK_FALSE(r.err.empty());
    CHECK(r.out.empty());
    CHECK(run_cli({}).code == 1);
    CHECK(run_cli({"frobnicate"}).code == 1);
    CHECK(run_cli({"run-fvsr"}).code == 1);  // --epsilon is required
    CHECK(run_cli({"experiment", "warmup"}).code == 1);
  }

  TEST_CASE("computational errors exit 2 with a JSON error") {
    const auto one_row = write_file("one_row.csv", "t,f1\n1,0.5\n");
    const auto r = run_cli({"analyze", "--input", one_row, "--p0", "4"});
    CHECK(r.code == 2);
    const Json j = Json::parse(r.out);
    CHECK(j["error"]["code"] == "TOO_FEW_BATCHES");

    const auto missing = run_cli({"analyze", "--input", (scratch_dir() / "nope.csv").string()});
    CHECK(missing.code == 2);
    CHECK(Json::parse(missing.out)["error"]["code"] == "IO");
  }

  TEST_CASE("simulate then analyze") {
    const auto traj = (scratch_dir() / "traj.csv").string();
    const auto regen = (scratch_dir() / "regen.csv").string();
    auto r = run_cli({"simulate", "--kernel", "ar1-split", "--T", "20000", "--seed", "7", "--out",
                      traj, "--regen", regen});
    REQUIRE(r.code == 0);
    std::ifstream rf(regen);
    std::string header, first;
    std::getline(rf, header);
    std::getline(rf, first);
    CHECK(header == "k,R_k,cycle_len");
    CHECK(first.back() == ',');  // no cycle before the first epoch

    r = run_cli({"analyze", "--input", traj, "--batch-mode", "table", "--p0", "4"});
    REQUIRE(r.code == 0);
    const Json j = Json::parse(r.out);
    for (const char* key : {"sigma_hat", "gamma_hat", "ess", "batch_plan", "spectral"})
      CHECK(j.contains(key));
    CHECK(j["batch_plan"]["batch_size"] == 1682);  // ceil(20000^0.75)
  }

  TEST_CASE("run-fvsr stops and writes a trace") {
    const auto trace = scratch_dir() / "trace.csv";
    const auto r = run_cli({"run-fvsr", "--epsilon", "0.3", "--chain", "ar1", "--d", "2",
                            "--t-star", "200", "--seed", "3", "--trace", trace.string()});
    REQUIRE(r.code == 0);
    const Json j = Json::parse(r.out);
    CHECK(j["status"] == "TERMINATED");
    CHECK(j["T1"].get<long>() >= 200);
    CHECK(read_file(trace).rfind("t,vol,ess,batch_size\n", 0) == 0);
  }

  TEST_CASE("run-fvsr budget exhaustion exits 2 and keeps the report") {
    const auto r = run_cli({"run-fvsr", "--epsilon", "0.001", "--chain", "ar1", "--d", "2",
                            "--t-star", "100", "--max-T", "1000"});
    CHECK(r.code == 2);
    const Json j = Json::parse(r.out);
    CHECK(j["error"]["code"] == "NOT_TERMINATED");
    CHECK(j.contains("report"));
  }

  TEST_CASE("identical invocations print identical bytes") {
    const std::vector<std::string> args{"run-fvsr", "--epsilon", "0.3", "--chain", "ar1",
                                        "--d", "2", "--t-star", "200", "--seed", "11"};
    CHECK(run_cli(args).out == run_cli(args).out);
    auto other = args;
    other.back() = "12";
    CHECK(run_cli(other).out != run_cli(args).out);
  }

  TEST_CASE("experiment writes results") {
    const auto cfg = write_file("cov.json", R"({"chain":{"kind":"ar1","d":2},"Ts":[1000,2000],"reps":2})");
    const auto out = scratch_dir() / "exp";
    std::filesystem::remove_all(out);
    const auto r = run_cli({"experiment", "covariance", "--config", cfg, "--out", out.string(),
                            "--seed", "5", "--jobs", "2"});
    REQUIRE(r.code == 0);
    CHECK(Json::parse(r.out)["config"]["seed"] == 5);
    CHECK(std::filesystem::exists(out / "results.json"));
    CHECK(read_file(out / "results.csv").rfind("# ", 0) == 0);
  }
}
