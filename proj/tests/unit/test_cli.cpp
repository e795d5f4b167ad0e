#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "frailtycc/report.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "frailtycc_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = env + " \"" + std::string(FRAILTYCC_CLI) + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WEXITSTATUS(status), slurp(out), slurp(err)};
}

std::string source(const std::string& rel) { return std::string(FRAILTYCC_SOURCE_DIR) + "/" + rel; }

}  // namespace

TEST_CASE("fit reproduces the frozen fit of the shipped dataset") {
  const fs::path dir = scratch("golden");
  const Run r = run("fit --data " + source("data/family_study.csv") + " --out " + (dir / "o").string() +
                        " --query 40,50,60,70",
                    dir);
  REQUIRE(r.code == 0);
  const auto got = nlohmann::json::parse(slurp(dir / "o" / "fit.json"));
  const auto want = nlohmann::json::parse(slurp(source("data/family_study_fit.json")));
  CHECK(got["converged"].get<bool>());
  CHECK(got["beta"][0].get<double>() == doctest::Approx(want["beta"][0].get<double>()).epsilon(1e-6));
  CHECK(got["theta"].get<double>() == doctest::Approx(want["theta"].get<double>()).epsilon(1e-6));
  for (int k = 0; k < 4; ++k) {
    CHECK(got["lambda0_at"][k]["lambda0"].get<double>() ==
          doctest::Approx(want["lambda0_at"][k]["lambda0"].get<double>()).epsilon(1e-6));
  }
  CHECK(fs::exists(dir / "o" / "hazard.csv"));
  CHECK(slurp(dir / "o" / "hazard.csv").rfind("tau_g,delta_lambda,lambda_cum", 0) == 0);
}

TEST_CASE("fit output does not depend on the thread count") {
  const fs::path dir = scratch("threads");
  const std::string base = "fit --data " + source("data/family_study.csv") + " --query 40,50,60,70 --out ";
  REQUIRE(run(base + (dir / "a").string() + " --threads 1", dir).code == 0);
  REQUIRE(run(base + (dir / "b").string(), dir, "FRAILTYCC_THREADS=4").code == 0);
  CHECK(slurp(dir / "a" / "fit.json") == slurp(dir / "b" / "fit.json"));
  CHECK(slurp(dir / "a" / "hazard.csv") == slurp(dir / "b" / "hazard.csv"));
}

TEST_CASE("malformed input is reported with its line") {
  const fs::path dir = scratch("malformed");
  std::ofstream(dir / "bad.csv") << "set_id,family_role,subject_role,time,event,z1\n"
                                 << "1,case,proband,1.0,1,0.5\n"
                                 << "1,control,proband,abc,0,0.5\n";
  const Run r = run("fit --data " + (dir / "bad.csv").string() + " --out " + (dir / "o").string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("line 3") != std::string::npos);
  CHECK(run("validate --data " + (dir / "bad.csv").string(), dir).code == 1);
  CHECK(run("validate --data " + source("data/family_study.csv"), dir).code == 0);
  CHECK(run("fit --out x", dir).code == 1);
  CHECK(run("frobnicate", dir).code == 1);
}

TEST_CASE("left restriction warns about probands below s0") {
  const fs::path dir = scratch("left");
  const Run r = run("fit --data " + source("data/family_study.csv") + " --left-restricted 5 --out " +
                        (dir / "o").string(),
                    dir);
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  const auto got = nlohmann::json::parse(slurp(dir / "o" / "fit.json"));
  CHECK(got["left_restricted"].get<double>() == 5.0);
  CHECK(got["lambda0_s0"].is_number());
}

TEST_CASE("simulate writes a six row summary reproducibly") {
  const fs::path dir = scratch("simulate");
  std::ofstream(dir / "design.json") << R"({"n_sets": 60, "seed": 3})";
  const std::string base = "simulate --design " + (dir / "design.json").string() + " --reps 3 --out ";
  REQUIRE(run(base + (dir / "a").string(), dir).code == 0);
  REQUIRE(run(base + (dir / "b").string() + " --threads 2", dir).code == 0);
  const std::string csv = slurp(dir / "a" / "summary.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(csv == slurp(dir / "b" / "summary.csv"));
  CHECK(slurp(dir / "a" / "replicates.csv") == slurp(dir / "b" / "replicates.csv"));
  CHECK(slurp(dir / "a" / "summary.txt").find("Lambda0(0.8)") != std::string::npos);

  REQUIRE(run(base + (dir / "c").string() + " --seed 9", dir).code == 0);
  CHECK(slurp(dir / "c" / "replicates.csv") != slurp(dir / "a" / "replicates.csv"));

  CHECK(run("simulate --design " + (dir / "design.json").string() + " --reps 0 --out " + (dir / "d").string(), dir)
            .code == 1);
  std::ofstream(dir / "bad.json") << R"({"n_sets": 60, "thetta": 2})";
  CHECK(run("simulate --design " + (dir / "bad.json").string() + " --reps 1 --out " + (dir / "d").string(), dir)
            .code == 1);
}

TEST_CASE("bootstrap around a saved fit") {
  const fs::path dir = scratch("bootstrap");
  std::ofstream(dir / "design.json") << R"({"n_sets": 80, "seed": 4})";
  REQUIRE(run("simulate --design " + (dir / "design.json").string() + " --reps 1 --out " + (dir / "s").string() +
                  " --emit-dataset " + (dir / "d.csv").string(),
              dir)
              .code == 0);
  REQUIRE(run("fit --data " + (dir / "d.csv").string() + " --out " + (dir / "f").string(), dir).code == 0);
  const std::string base = "bootstrap --data " + (dir / "d.csv").string() + " --fit " +
                           (dir / "f" / "fit.json").string() + " --seed 11 --query 0.3 ";
  CHECK(run(base + "--B 1 --out " + (dir / "x").string(), dir).code == 1);
  REQUIRE(run(base + "--B 4 --out " + (dir / "a").string(), dir).code == 0);
  REQUIRE(run(base + "--B 4 --threads 3 --out " + (dir / "b").string(), dir).code == 0);
  CHECK(slurp(dir / "a" / "bootstrap.json") == slurp(dir / "b" / "bootstrap.json"));
  const auto j = nlohmann::json::parse(slurp(dir / "a" / "bootstrap.json"));
  CHECK(j.contains("beta1"));
  CHECK(j.contains("theta"));
  CHECK(j["theta"]["se"].get<double>() > 0.0);
}

TEST_CASE("a config file is equivalent to flags") {
  const fs::path dir = scratch("config");
  std::ofstream(dir / "cfg.json") << R"({"data": ")" << source("data/family_study.csv")
                                  << R"(", "query": [40, 50], "theta_init": 0.5})";
  REQUIRE(run("fit --config " + (dir / "cfg.json").string() + " --out " + (dir / "a").string(), dir).code == 0);
  REQUIRE(run("fit --data " + source("data/family_study.csv") + " --query 40,50 --theta-init 0.5 --out " +
                  (dir / "b").string(),
              dir)
              .code == 0);
  CHECK(slurp(dir / "a" / "fit.json") == slurp(dir / "b" / "fit.json"));

  std::ofstream(dir / "unknown.json") << R"({"dta": "x"})";
  CHECK(run("fit --config " + (dir / "unknown.json").string() + " --out " + (dir / "c").string(), dir).code == 1);
}

TEST_CASE("fit that cannot converge exits with code 2") {
  const fs::path dir = scratch("noconv");
  const Run r = run("fit --data " + source("data/family_study.csv") + " --max-outer 1 --out " +
                        (dir / "o").string(),
                    dir);
  CHECK(r.code == 2);
}
