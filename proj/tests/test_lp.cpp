#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <sstream>

#include "cyclomdp/lp.hpp"
#include "support/oracles.hpp"

using namespace cyclomdp;

TEST_CASE("forced equality", "[lp]") {
  auto p = LpProblem::with_cols(1);
  p.objective = {1.0};
  p.eq_rhs = {1.0};
  p.add_eq_entry(0, 0, 1.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.x[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(s.objective == Catch::Approx(1.0).margin(1e-12));
  CHECK(s.vertex);
}

TEST_CASE("degenerate objective returns a vertex", "[lp]") {
  auto p = LpProblem::with_cols(2);
  p.objective = {1.0, 1.0};
  p.eq_rhs = {1.0};
  p.add_eq_entry(0, 0, 1.0);
  p.add_eq_entry(0, 1, 1.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == Catch::Approx(1.0).margin(1e-12));
  CHECK(s.vertex);
  CHECK((s.x[0] < 1e-9 || s.x[1] < 1e-9));
}

TEST_CASE("infeasible and unbounded are distinguished", "[lp]") {
  auto p = LpProblem::with_cols(1);
  p.eq_rhs = {-1.0};
  p.add_eq_entry(0, 0, 1.0);
  CHECK(solve_lp(p).status == LpStatus::Infeasible);

  auto q = LpProblem::with_cols(2);
  q.objective = {-1.0, 0.0};
  q.eq_rhs = {0.0};
  q.add_eq_entry(0, 0, 1.0);
  q.add_eq_entry(0, 1, -1.0);
  CHECK(solve_lp(q).status == LpStatus::Unbounded);
}

TEST_CASE("free variables and upper bounds", "[lp]") {
  auto p = LpProblem::with_cols(1);
  p.set_free(0);
  p.eq_rhs = {5.0};
  p.add_eq_entry(0, 0, 1.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.x[0] == Catch::Approx(5.0));

  auto q = LpProblem::with_cols(1);
  q.objective = {-1.0};
  q.upper = {2.5};
  auto s2 = solve_lp(q);
  REQUIRE(s2.status == LpStatus::Optimal);
  CHECK(s2.x[0] == Catch::Approx(2.5));
}

TEST_CASE("inequality rows respected", "[lp]") {
  // min -x1 - x2 s.t. x1 + x2 <= 4, x1 <= 3, x2 <= 3
  auto p = LpProblem::with_cols(2);
  p.objective = {-1.0, -1.0};
  p.le_rhs = {4.0, 3.0, 3.0};
  p.add_le_entry(0, 0, 1.0);
  p.add_le_entry(0, 1, 1.0);
  p.add_le_entry(1, 0, 1.0);
  p.add_le_entry(2, 1, 1.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == Catch::Approx(-4.0));
}

TEST_CASE("beale degenerate cycle terminates", "[lp]") {
  auto p = LpProblem::with_cols(4);
  p.objective = {-0.75, 150.0, -0.02, 6.0};
  p.le_rhs = {0.0, 0.0, 1.0};
  p.add_le_entry(0, 0, 0.25);
  p.add_le_entry(0, 1, -60.0);
  p.add_le_entry(0, 2, -1.0 / 25.0);
  p.add_le_entry(0, 3, 9.0);
  p.add_le_entry(1, 0, 0.5);
  p.add_le_entry(1, 1, -90.0);
  p.add_le_entry(1, 2, -1.0 / 50.0);
  p.add_le_entry(1, 3, 3.0);
  p.add_le_entry(2, 2, 1.0);
  auto s = solve_lp(p);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == Catch::Approx(-0.05).margin(1e-9));
}

TEST_CASE("random instances agree with dense tableau oracle", "[lp]") {
  auto g = testsupport::rng(20240811);
  for (int trial = 0; trial < 25; ++trial) {
    const int m = 10, n = 20;
    std::vector<std::vector<double>> a(m, std::vector<double>(n));
    std::vector<double> x0(n), b(m, 0.0), c(n);
    for (auto& row : a)
      for (double& v : row) v = testsupport::uniform(g, -1.0, 1.0);
    for (double& v : x0) v = testsupport::uniform(g, 0.0, 1.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) b[i] += a[i][j] * x0[j];
    for (double& v : c) v = testsupport::uniform(g, 0.0, 1.0);

    auto p = LpProblem::with_cols(n);
    p.objective = c;
    p.eq_rhs = b;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) p.add_eq_entry(i, j, a[i][j]);

    auto s = solve_lp(p);
    auto o = testsupport::tableau_simplex(a, b, c);
    REQUIRE(o.status == 0);
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(s.objective == Catch::Approx(o.objective).margin(1e-7));
    CHECK(s.duality_gap <= 1e-7);
    CHECK(s.max_residual <= 1e-8);
  }
}

TEST_CASE("repeated solves are bit identical", "[lp]") {
  auto g = testsupport::rng(7);
  auto p = LpProblem::with_cols(12);
  p.eq_rhs.assign(5, 0.0);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 12; ++j) {
      const double v = testsupport::uniform(g, -1.0, 1.0);
      p.add_eq_entry(i, j, v);
      p.eq_rhs[i] += v * 0.3;
    }
  for (int j = 0; j < 12; ++j) p.objective[j] = testsupport::uniform(g, 0.0, 1.0);
  auto s1 = solve_lp(p);
  auto s2 = solve_lp(p);
  REQUIRE(s1.status == LpStatus::Optimal);
  REQUIRE(s2.status == LpStatus::Optimal);
  REQUIRE(s1.x.size() == s2.x.size());
  CHECK(std::memcmp(s1.x.data(), s2.x.data(), s1.x.size() * sizeof(double)) == 0);
}

TEST_CASE("validation rejects bad input", "[lp]") {
  auto p = LpProblem::with_cols(2);
  p.objective[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_lp(p), InvalidProblem);

  auto q = LpProblem::with_cols(2);
  q.eq_rhs = {1.0};
  q.add_eq_entry(0, 5, 1.0);
  CHECK_THROWS_AS(solve_lp(q), InvalidProblem);
}

TEST_CASE("lp file dump", "[lp]") {
  auto p = LpProblem::with_cols(2);
  p.objective = {3.0, -2.0};
  p.eq_rhs = {1.0};
  p.add_eq_entry(0, 0, 1.0);
  p.add_eq_entry(0, 1, 1.0);
  p.le_rhs = {2.0};
  p.add_le_entry(0, 0, 1.0);
  p.set_free(1);
  std::ostringstream os;
  write_lp_file(p, os);
  const std::string text = os.str();
  CHECK(text.find("Minimize") != std::string::npos);
  CHECK(text.find("Subject To") != std::string::npos);
  CHECK(text.find("x1 free") != std::string::npos);
  CHECK(text.find("End") != std::string::npos);
}

TEST_CASE("warm start reproduces cold objective", "[lp]") {
  auto g = testsupport::rng(99);
  auto p = LpProblem::with_cols(16);
  p.eq_rhs.assign(6, 0.0);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 16; ++j) {
      const double v = testsupport::uniform(g, -1.0, 1.0);
      p.add_eq_entry(i, j, v);
      p.eq_rhs[i] += v * 0.5;
    }
  for (int j = 0; j < 16; ++j) p.objective[j] = testsupport::uniform(g, 0.0, 1.0);
  auto cold = solve_lp(p);
  REQUIRE(cold.status == LpStatus::Optimal);

  auto p2 = p;
  for (int j = 0; j < 16; ++j) p2.objective[j] += 0.01 * j;
  auto cold2 = solve_lp(p2);
  LpOptions warm_opt;
  warm_opt.warm_start = &cold.basis;
  auto warm2 = solve_lp(p2, warm_opt);
  REQUIRE(cold2.status == LpStatus::Optimal);
  REQUIRE(warm2.status == LpStatus::Optimal);
  CHECK(warm2.objective == Catch::Approx(cold2.objective).margin(1e-9));
}
