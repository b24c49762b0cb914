#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "lmtp/cli.hpp"
#include "lmtp/report.hpp"
#include "lmtp/simulation.hpp"
#include "test_util.hpp"

using namespace lmtp;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lmtp-roc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("identity versus identity reports exact zeros") {
  testutil::TempDir dir("lmtp_cli_id");
  write_csv(generate(study_params(0.0), 200, 1), dir / "d.csv");
  const Run r = cli({"estimate", "--input", (dir / "d.csv").string(), "--policy-prime", "identity",
                     "--policy-dprime", "identity", "--out", dir.path().string()});
  REQUIRE(r.code == 0);
  const Json j = Json::parse(slurp(dir / "report.json"));
  for (const auto& l : j["inference"]["locals"]) {
    CHECK(l["estimate"].get<double>() == 0.0);
    CHECK(l["p_max"].get<double>() == 1.0);
  }
  CHECK(j["inference"]["wald"]["p"].get<double>() == 1.0);
  CHECK(j["inference"]["max"]["p"].get<double>() == 1.0);
  CHECK(std::filesystem::exists(dir / "trajectory.csv"));
  CHECK(std::filesystem::exists(dir / "delta.csv"));
  CHECK(std::filesystem::exists(dir / "report.svg"));
  CHECK(slurp(dir / "delta.csv").rfind("# config_hash=", 0) == 0);
}

TEST_CASE("estimate on simulated data writes a complete report") {
  testutil::TempDir dir("lmtp_cli_est");
  write_csv(generate(study_params(1.0), 300, 2), dir / "d.csv");
  {
    std::ofstream f(dir / "learners.cfg");
    f << "regression_learners = ols\nclassification_learners = logistic\n";
  }
  const Run r = cli({"estimate", "--input", (dir / "d.csv").string(), "--config", (dir / "learners.cfg").string(),
                     "--out", dir.path().string(), "--dump-eif"});
  REQUIRE(r.code == 0);
  const Json j = Json::parse(slurp(dir / "report.json"));
  CHECK(j["schema_version"] == kSchemaVersion);
  CHECK(j["config"]["learners"]["regression"][0] == "ols");
  CHECK(j["inference"]["contrast_kind"] == "baseline");
  CHECK(j["inference"]["locals"].size() == 3);
  CHECK(std::filesystem::exists(dir / "eif.csv"));
}

TEST_CASE("malformed csv exits with code 2 and names the cell") {
  testutil::TempDir dir("lmtp_cli_bad");
  {
    std::ofstream f(dir / "bad.csv");
    f << "L1_1,A1,Y1\n1,2,3\n1,oops,3\n";
  }
  const Run r = cli({"estimate", "--input", (dir / "bad.csv").string(), "--out", dir.path().string()});
  CHECK(r.code == 2);
  const Json e = Json::parse(r.err);
  CHECK(e["error"]["kind"] == "data");
  CHECK(e["error"]["row"] == 2);
  CHECK(e["error"]["column"] == "A1");
}

TEST_CASE("unknown flags and bad policies are usage errors") {
  CHECK(cli({"estimate", "--bogus"}).code == 2);
  CHECK(cli({}).code == 2);
  testutil::TempDir dir("lmtp_cli_pol");
  write_csv(generate(study_params(0.0), 50, 3), dir / "d.csv");
  CHECK(cli({"estimate", "--input", (dir / "d.csv").string(), "--policy-dprime", "warp:2", "--out",
             dir.path().string()})
            .code == 2);
}

TEST_CASE("truth at beta zero has zero contrasts and reports gamma") {
  testutil::TempDir dir("lmtp_cli_truth");
  const Run r = cli({"truth", "--beta", "0", "--out", dir.path().string()});
  REQUIRE(r.code == 0);
  const Json j = Json::parse(slurp(dir / "truth.json"));
  for (const auto& v : j["truth"]["delta"]) CHECK(std::abs(v.get<double>()) <= 1e-8);
  CHECK(j["truth"]["gamma"].size() == 4);
  const Run one = cli({"truth", "--beta", "1", "--out", dir.path().string()});
  REQUIRE(one.code == 0);
  bool nonzero = false;
  const Json k = Json::parse(slurp(dir / "truth.json"));
  for (const auto& v : k["truth"]["delta"]) nonzero |= std::abs(v.get<double>()) > 1e-3;
  CHECK(nonzero);
}

TEST_CASE("contrast subcommand prints the matrix") {
  const Run r = cli({"contrast", "--contrast", "adjacent", "--tau", "3"});
  REQUIRE(r.code == 0);
  const Json j = Json::parse(r.out);
  CHECK(j["K"][1] == Json::array({0.0, 1.0, -1.0, 0.0, -1.0, 1.0}));
}

TEST_CASE("grid run produces one record per replicate and cell") {
  testutil::TempDir dir("lmtp_cli_grid");
  const std::vector<std::string> args = {"simulate", "--grid", "n=250 beta=0,1 reps=10", "--raw",
                                         "--config", "", "--out", dir.path().string()};
  {
    std::ofstream f(dir / "fast.cfg");
    f << "regression_learners = ols\nclassification_learners = logistic\n";
  }
  auto with_cfg = args;
  with_cfg[5] = (dir / "fast.cfg").string();
  const Run r = cli(with_cfg);
  REQUIRE(r.code == 0);
  const std::string first = slurp(dir / "study_tables.json");
  const Json j = Json::parse(first);
  CHECK(j["study"]["records"].size() == 20);
  CHECK(j["study"]["cells"].size() == 2);
  CHECK(j["study"]["cells"][0]["type_i_error"].is_number());
  CHECK(j["study"]["cells"][0]["family_wise_error"].is_object());
  for (const char* f : {"bias_vs_n.csv", "power_vs_beta.csv", "simultaneous.csv"})
    CHECK(std::filesystem::exists(dir / f));

  // Same seed: byte-identical tables.
  REQUIRE(cli(with_cfg).code == 0);
  CHECK(slurp(dir / "study_tables.json") == first);
}

TEST_CASE("desk-scale flag with a beta override reports type I error fields") {
  // The desk-scale grid is cut to two replicates per cell by the grid option
  // to keep the smoke check short; the beta override still applies.
  testutil::TempDir dir("lmtp_cli_desk");
  {
    std::ofstream f(dir / "fast.cfg");
    f << "regression_learners = ols\nclassification_learners = logistic\n";
  }
  const Run r = cli({"simulate", "--desk-scale", "--beta", "0", "--grid", "reps=2", "--config",
                     (dir / "fast.cfg").string(), "--out", dir.path().string()});
  REQUIRE(r.code == 0);
  const Json j = Json::parse(slurp(dir / "study_tables.json"));
  CHECK(j["study"]["grid"]["n"] == Json::array({250, 1000, 2500}));
  CHECK(j["study"]["cells"].size() == 3);
  for (const auto& c : j["study"]["cells"]) CHECK(c["type_i_error"].is_number());
}

TEST_CASE("config text parsing and the provenance hash") {
  RunConfig c;
  apply_config_text("# comment\nfolds = 3\nboost_rounds = 50\nregression_learners = ols, boost\n", c);
  CHECK(c.folds == 3);
  CHECK(c.learners.boost_rounds == 50);
  CHECK(c.learners.regression_learners == std::vector<std::string>{"ols", "boost"});
  CHECK_THROWS_AS(apply_config_text("colour = blue\n", c), Error);
  CHECK_THROWS_AS(apply_config_text("folds = many\n", c), Error);
  CHECK_THROWS_AS(apply_config_text("folds\n", c), Error);

  RunConfig a, b;
  b.out = "/elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}
