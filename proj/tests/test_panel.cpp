#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "felogit/errors.hpp"
#include "felogit/montecarlo.hpp"
#include "felogit/panel.hpp"
#include "support/test_helpers.hpp"

using namespace felogit;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& contents) {
    static int counter = 0;
    path = "panel_test_" + std::to_string(counter++) + ".csv";
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("two-row file reads back as one unit") {
  TempFile f("id,t,y,x1\n1,1,0,0.1\n1,2,1,0.4\n");
  const PanelDataset data = load_panel(f.path);
  REQUIRE(data.size() == 1);
  const PanelUnit& u = data.individuals[0];
  CHECK(u.periods() == 2);
  CHECK(u.s == 1);
  CHECK(u.y[0] == 0);
  CHECK(u.y[1] == 1);
  CHECK(u.x(0, 0) == doctest::Approx(0.1));
  CHECK(u.x(1, 0) == doctest::Approx(0.4));
  CHECK(data.p == 1);
}

TEST_CASE("invalid input is rejected with row context") {
  SUBCASE("non-binary outcome") {
    TempFile f("id,t,y,x1\n1,1,0,0.1\n1,2,2,0.4\n");
    CHECK_THROWS_WITH_AS(load_panel(f.path), doctest::Contains("row 3"),
                         ValidationError);
  }
  SUBCASE("duplicate id-period") {
    TempFile f("id,t,y,x1\n1,1,0,0.1\n1,1,1,0.4\n");
    CHECK_THROWS_AS(load_panel(f.path), ValidationError);
  }
  SUBCASE("missing column") {
    TempFile f("id,t,outcome,x1\n1,1,0,0.1\n");
    CHECK_THROWS_AS(load_panel(f.path), SchemaError);
  }
  SUBCASE("missing field") {
    TempFile f("id,t,y,x1\n1,1,0,\n1,2,1,0.4\n");
    CHECK_THROWS_AS(load_panel(f.path), ValidationError);
  }
  SUBCASE("single-period unit") {
    TempFile f("id,t,y,x1\n1,1,0,0.2\n2,1,1,0.3\n2,2,0,0.4\n");
    CHECK_THROWS_AS(load_panel(f.path), ValidationError);
  }
}

TEST_CASE("periods are sorted and re-indexed, labels retained") {
  TempFile f("id,t,y,x1\n7,5,1,0.3\n7,2,0,0.1\n7,9,1,0.9\n");
  const PanelDataset data = load_panel(f.path);
  REQUIRE(data.size() == 1);
  const PanelUnit& u = data.individuals[0];
  CHECK(u.period_labels == std::vector<long long>{2, 5, 9});
  CHECK(u.x(0, 0) == doctest::Approx(0.1));
  CHECK(u.s == 2);
}

TEST_CASE("write then load is the identity") {
  const DgpConfig cfg{.dgp = 1, .T = 3, .n = 250, .beta0 = 1.0, .seed = 99};
  const PanelDataset data = generate(cfg);
  CHECK(data.size() == 250);
  for (const auto& u : data.individuals) CHECK(u.periods() == 3);

  write_panel(data, "roundtrip_test.csv");
  const PanelDataset back = load_panel("roundtrip_test.csv");
  std::remove("roundtrip_test.csv");

  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PanelUnit& a = data.individuals[i];
    const PanelUnit& b = back.individuals[i];
    CHECK(a.id == b.id);
    CHECK(a.y == b.y);
    CHECK(a.s == b.s);
    for (int t = 0; t < a.periods(); ++t) {
      CHECK(a.x(t, 0) == b.x(t, 0));  // bit-exact
    }
  }
}

TEST_CASE("rank condition") {
  SUBCASE("stayers only give a zero matrix") {
    TempFile f("id,t,y,x1\n1,1,0,0.5\n1,2,1,0.5\n2,1,1,-0.25\n2,2,0,-0.25\n");
    const PanelDataset data = load_panel(f.path);
    CHECK(data.stayer_count == 2);
    const RankCondition rc = check_rank_condition(data);
    CHECK(rc.matrix(0, 0) == 0.0);
    CHECK_FALSE(rc.nonsingular);
  }
  SUBCASE("single mover, ordered pairs counted both ways") {
    TempFile f("id,t,y,x1\n1,1,0,0\n1,2,1,1\n");
    const PanelDataset data = load_panel(f.path);
    const RankCondition rc = check_rank_condition(data);
    CHECK(rc.matrix(0, 0) == doctest::Approx(2.0));
    CHECK(rc.nonsingular);
  }
  SUBCASE("sample analog near the population value") {
    // X uniform on [-1/2,1/2]: the ordered-pair sum for T = 2 has
    // expectation 2 * T(T-1) * Var(X) = 1/3.
    const DgpConfig cfg{.dgp = 1, .T = 2, .n = 1000, .beta0 = 1.0, .seed = 5};
    const PanelDataset data = generate(cfg);
    const RankCondition rc = check_rank_condition(data);
    CHECK(rc.nonsingular);
    CHECK(std::abs(rc.min_eigenvalue - 1.0 / 3.0) < 0.2 / 3.0);
  }
  SUBCASE("matrix is symmetric positive semidefinite") {
    const DgpConfig cfg{.dgp = 2, .T = 3, .n = 200, .beta0 = 1.0, .seed = 6};
    const PanelDataset data = generate(cfg);
    const RankCondition rc = check_rank_condition(data);
    CHECK(rc.min_eigenvalue >= -1e-12 * rc.max_eigenvalue);
    CHECK((rc.matrix - rc.matrix.transpose()).norm() == 0.0);
  }
}
