#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "frailtycc/errors.hpp"
#include "frailtycc/simulation.hpp"
#include "helpers.hpp"

using namespace frailtycc;
using testutil::subj;
namespace fs = std::filesystem;

namespace {

Dataset two_sets() {
  Dataset d;
  d.p = 1;
  d.tau = 1.0;
  MatchedSet a;
  a.case_family = {subj(0.4, 1, {0.1}), {subj(0.3, 1, {0.2})}};
  a.control_family = {subj(0.4, 0, {0.5}), {subj(0.9, 0, {0.0})}};
  MatchedSet b;
  b.case_family = {subj(0.7, 1, {1.0}), {subj(0.2, 0, {0.3}), subj(0.5, 1, {0.9})}};
  b.control_family = {subj(0.7, 0, {0.0}), {subj(1.0, 1, {0.4})}};
  d.matched_sets = {a, b};
  return d;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "frailtycc_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string error_of(const fs::path& p) {
  try {
    load_csv(p);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("validate accepts a well-formed dataset") { CHECK(validate(two_sets()).empty()); }

TEST_CASE("validate names the broken rule") {
  Dataset d = two_sets();
  d.matched_sets[1].control_family.proband.event = 1;
  auto v = validate(d);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "control proband must be censored");
  CHECK(v[0].set_index == 1);
  CHECK(v[0].family == FamilyRole::Control);
  CHECK(v[0].subject == -1);

  d = two_sets();
  d.matched_sets[0].case_family.relatives[0].time = 1.5;
  v = validate(d);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "time exceeds tau");
  CHECK(v[0].subject == 0);

  d = two_sets();
  d.matched_sets[0].case_family.proband.event = 0;
  d.matched_sets[0].control_family.proband.time = 0.41;
  v = validate(d);
  CHECK(v.size() == 2);

  d = two_sets();
  d.matched_sets[0].case_family.relatives.clear();
  CHECK(validate(d).size() == 1);
  d = two_sets();
  d.s0 = 0.5;
  CHECK(validate(d).size() == 2);
  d = two_sets();
  d.matched_sets[0].case_family.relatives[0].covariates = {1.0, 2.0};
  CHECK(validate(d).size() == 1);
}

TEST_CASE("validate is order independent") {
  Dataset d = two_sets();
  d.matched_sets[0].case_family.relatives[0].event = 3;
  d.matched_sets[1].control_family.proband.event = 1;
  auto a = validate(d);
  std::swap(d.matched_sets[0], d.matched_sets[1]);
  auto b = validate(d);
  REQUIRE(a.size() == b.size());
  CHECK(a.size() == 2);
}

TEST_CASE("csv and json round trips are exact") {
  Dataset d = two_sets();
  d.s0 = 0.1;
  d.matched_sets[0].case_family.relatives[0].time = 0.1 + 0.2;  // not representable in short decimal
  const auto csv = temp_file("round.csv");
  save_csv(d, csv);
  CHECK(load_csv(csv) == d);
  const auto js = temp_file("round.json");
  save_json(d, js);
  CHECK(load_json(js) == d);
  CHECK(load_dataset(js) == d);

  SimDesign design;
  design.n_sets = 40;
  design.relatives_per_family = 2;
  design.beta = Eigen::VectorXd::Constant(2, 0.3);
  const Dataset sim = generate_dataset(design, 3);
  save_dataset(sim, csv);
  CHECK(load_dataset(csv) == sim);
  save_dataset(sim, js);
  CHECK(load_dataset(js) == sim);
}

TEST_CASE("csv errors") {
  const auto p = temp_file("bad.csv");
  write(p, "");
  CHECK(error_of(p).find("no records") != std::string::npos);
  write(p, "set_id,family_role,subject_role,event,z1\n1,case,proband,1,0\n");
  CHECK(error_of(p).find("missing column 'time'") != std::string::npos);
  write(p,
        "set_id,family_role,subject_role,time,event,z1\n"
        "1,case,proband,0.5,1,0\n"
        "1,case,relative,0.4,1,0\n"
        "1,control,proband,abc,0,0\n");
  CHECK(error_of(p).find("line 4") != std::string::npos);
  write(p,
        "set_id,family_role,subject_role,time,event,z1\n"
        "1,case,proband,0.5,1,0\n"
        "1,case,relative,0.4,1\n");
  CHECK(error_of(p).find("line 3") != std::string::npos);
  write(p, "set_id,family_role,subject_role,time,event,z1\n");
  CHECK(error_of(p).find("no records") != std::string::npos);
}
