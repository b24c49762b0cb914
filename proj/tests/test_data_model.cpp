#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "lmtp/data_model.hpp"
#include "lmtp/simulation.hpp"
#include "test_util.hpp"

using namespace lmtp;

TEST_CASE("csv with two time points and three rows") {
  std::istringstream in(
      "L1_1,A1,Y1,L2_1,A2,Y2\n"
      "0.5,1,2,0.1,1.5,3\n"
      "1.5,2,3,0.2,2.5,4\n"
      "2.5,3,4,0.3,3.5,5\n");
  const LongitudinalDataset d = parse_csv(in);
  CHECK(d.n() == 3);
  CHECK(d.tau() == 2);
  CHECK(d.covariate_count(0) == 1);
  CHECK(d.covariate_count(1) == 1);
  CHECK(d.exposures()(2, 1) == 3.5);
  CHECK(d.outcomes()(0, 0) == 2.0);
  CHECK(d.assessment_times() == std::vector<double>{1.0, 2.0});
}

TEST_CASE("columns may come in any order and unknown columns are ignored") {
  std::istringstream in(
      "id,Y1,A1,L1_2,L1_1\n"
      "a,1,2,3,4\n"
      "b,5,6,7,8\n");
  const LongitudinalDataset d = parse_csv(in);
  CHECK(d.covariate_count(0) == 2);
  CHECK(d.covariates(0)(1, 0) == 8.0);
  CHECK(d.covariates(0)(1, 1) == 7.0);
  CHECK(d.outcome(0)(1) == 5.0);
}

TEST_CASE("assessment times come from the leading comment") {
  std::istringstream in(
      "# v: 0,2\n"
      "L1_1,A1,Y1,L2_1,A2,Y2\n"
      "0,1,2,0,1,3\n"
      "1,2,3,0,2,4\n");
  CHECK(parse_csv(in).assessment_times() == std::vector<double>{0.0, 2.0});
}

TEST_CASE("blank cell is a data error naming the row") {
  std::istringstream in(
      "L1_1,A1,Y1,L2_1,A2,Y2\n"
      "0.5,1,2,0.1,1.5,3\n"
      "1.5,2,3,0.2,2.5,\n"
      "2.5,3,4,0.3,3.5,5\n");
  try {
    parse_csv(in);
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    REQUIRE(e.row().has_value());
    CHECK(*e.row() == 2);
    CHECK(e.column() == "Y2");
  }
}

TEST_CASE("unparsable and non-finite cells are data errors") {
  for (const char* cell : {"abc", "nan", "1.0x", "inf"}) {
    std::istringstream in(std::string("L1_1,A1,Y1\n1,2,3\n1,") + cell + ",3\n");
    try {
      parse_csv(in);
      FAIL("expected a data error for " << cell);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::data);
      CHECK(e.column() == "A1");
    }
  }
}

TEST_CASE("missing exposure column is a schema error") {
  std::istringstream in("L1_1,Y1\n1,2\n3,4\n");
  try {
    parse_csv(in);
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::schema);
  }
}

TEST_CASE("simulated data round-trips through the csv writer") {
  const DgpParams p = study_params(1.0);
  const LongitudinalDataset d = generate(p, 200, 42);
  testutil::TempDir dir("lmtp_csv");
  write_csv(d, dir / "d.csv");
  const LongitudinalDataset back = load_csv(dir / "d.csv");
  CHECK(back == d);

  // A second write of the reloaded data is byte-identical.
  write_csv(back, dir / "e.csv");
  std::ifstream a(dir / "d.csv"), b(dir / "e.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}

TEST_CASE("history at the first time is the first covariate block") {
  std::mt19937_64 rng(1);
  const LongitudinalDataset d = testutil::random_dataset(rng, 20, 3, 2);
  const MatrixXd h = history_features(d, 0);
  CHECK(h == d.covariates(0));
}

TEST_CASE("history at the second time follows the documented order") {
  std::mt19937_64 rng(2);
  const LongitudinalDataset d = testutil::random_dataset(rng, 15, 2, 1);
  const MatrixXd h = history_features(d, 1);
  REQUIRE(h.cols() == 4);
  CHECK(h.col(0) == d.exposure(0));
  CHECK(h.col(1) == d.covariates(0).col(0));
  CHECK(h.col(2) == d.covariates(1).col(0));
  CHECK(h.col(3) == d.outcome(0));
}

TEST_CASE("history width matches enumeration for random covariate counts") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(1, 4);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 10; ++rep) {
    const int tau = 1 + rep % 5;
    const std::size_t n = 6;
    std::vector<MatrixXd> l;
    std::vector<int> p;
    for (int t = 0; t < tau; ++t) {
      p.push_back(pick(rng));
      l.push_back(MatrixXd::NullaryExpr(n, p.back(), [&] { return z(rng); }));
    }
    const LongitudinalDataset d(l, MatrixXd::NullaryExpr(n, tau, [&] { return z(rng); }),
                                MatrixXd::NullaryExpr(n, tau, [&] { return z(rng); }));
    for (int t = 0; t < tau; ++t) {
      int count = 0;
      for (int s = 0; s < t; ++s) count += 2;  // A_s and Y_s
      for (int s = 0; s <= t; ++s) count += p[s];
      CHECK(history_width(d, t) == count);
      CHECK(history_features(d, t).cols() == count);
    }
  }
}

TEST_CASE("constructor rejects inconsistent shapes and times") {
  MatrixXd a = MatrixXd::Zero(3, 2), y = MatrixXd::Zero(3, 2);
  std::vector<MatrixXd> l{MatrixXd::Zero(3, 1), MatrixXd::Zero(3, 1)};
  CHECK_THROWS_AS(LongitudinalDataset(l, a, MatrixXd::Zero(3, 1)), Error);
  CHECK_THROWS_AS(LongitudinalDataset({MatrixXd::Zero(3, 1)}, a, y), Error);
  CHECK_THROWS_AS(LongitudinalDataset(l, a, y, {2.0, 1.0}), Error);
  CHECK_NOTHROW(LongitudinalDataset(l, a, y, {0.0, 6.0}));
}

TEST_CASE("column means are exact to a few ulps on large offsets") {
  MatrixXd m(4, 1);
  m << 1e16, 1.0, -1e16, 1.0;
  CHECK(column_means(m)(0) == 0.5);
}
