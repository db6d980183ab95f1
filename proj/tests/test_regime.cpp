#include <catch2/catch_amalgamated.hpp>

#include "cyclomdp/regime.hpp"
#include "support/oracles.hpp"

using namespace cyclomdp;

namespace {

// Sample a path from a truth function p(t, from) -> row distribution.
template <typename Truth>
RegimePath sample_path(int n, int period, int regimes, Truth truth, uint64_t seed) {
  auto g = testsupport::rng(seed);
  RegimePath path;
  int r = 1;
  for (int i = 0; i < n; ++i) {
    const long t = 1 + i % period;
    path.t.push_back(static_cast<double>(i + 1));  // consecutive steps
    path.r.push_back(r);
    const std::vector<double> row = truth(t, r);
    double u = testsupport::uniform(g, 0.0, 1.0);
    int next = regimes;
    double cum = 0.0;
    for (int k = 0; k < regimes; ++k) {
      cum += row[k];
      if (u < cum) {
        next = k + 1;
        break;
      }
    }
    r = next;
  }
  return path;
}

}  // namespace

TEST_CASE("empirical chain on a deterministic cycle", "[regime]") {
  RegimePath path;
  for (int i = 0; i < 1000; ++i) {
    path.t.push_back(static_cast<double>(i + 1));
    path.r.push_back(1 + i % 2);
  }
  const auto chain = fit_empirical_chain(path, 2, TimeBucketing::uniform(24, 1), 1.0);
  chain.validate();
  // 999 transitions split across the two sources; Laplace alpha = 1
  const double c12 = 500.0, c21 = 499.0;
  CHECK(chain.prob(1, 1, 2) == Catch::Approx((c12 + 1.0) / (c12 + 2.0)).margin(1e-12));
  CHECK(chain.prob(1, 2, 1) == Catch::Approx((c21 + 1.0) / (c21 + 2.0)).margin(1e-12));
}

TEST_CASE("empirical chain single transition gives the Laplace ratio", "[regime]") {
  RegimePath path;
  path.t = {1.0, 2.0};
  path.r = {1, 2};
  const auto chain = fit_empirical_chain(path, 2, TimeBucketing::uniform(24, 1), 1.0);
  CHECK(chain.prob(1, 1, 2) == Catch::Approx(2.0 / 3.0).margin(1e-15));
  // unobserved source gets the uniform smoothed row
  CHECK(chain.prob(1, 2, 1) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("empirical chain on uniform noise approaches uniform rows", "[regime]") {
  auto g = testsupport::rng(31);
  RegimePath path;
  const int regimes = 3;
  for (int i = 0; i < 10000; ++i) {
    path.t.push_back(static_cast<double>(i + 1));
    path.r.push_back(1 + static_cast<int>(testsupport::uniform(g, 0.0, regimes)) % regimes);
  }
  const auto chain = fit_empirical_chain(path, regimes, TimeBucketing::uniform(24, 1), 1.0);
  for (int from = 1; from <= regimes; ++from)
    for (int to = 1; to <= regimes; ++to)
      CHECK(chain.prob(7, from, to) == Catch::Approx(1.0 / 3.0).margin(0.03));
}

TEST_CASE("constant-probability MLE recovers the matrix", "[regime]") {
  const std::vector<std::vector<double>> truth = {{0.6, 0.2, 0.1, 0.1},
                                                  {0.25, 0.5, 0.15, 0.1},
                                                  {0.1, 0.2, 0.5, 0.2},
                                                  {0.05, 0.15, 0.3, 0.5}};
  const auto path = sample_path(40000, 24, 4, [&](long, int from) { return truth[from - 1]; }, 2024);
  FourierBasis basis{24, {}, true};
  const auto chain = fit_regime_chain(path, 4, basis);
  chain.validate();
  CHECK(chain.converged);

  // with an intercept-only basis the MLE is the row-normalized count matrix
  std::vector<std::vector<double>> counts(4, std::vector<double>(5, 0.0));
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    counts[path.r[i] - 1][path.r[i + 1] - 1] += 1.0;
    counts[path.r[i] - 1][4] += 1.0;
  }
  for (int from = 1; from <= 4; ++from)
    for (int to = 1; to <= 4; ++to) {
      const double empirical = counts[from - 1][to - 1] / counts[from - 1][4];
      CHECK(chain.prob(5, from, to) == Catch::Approx(empirical).margin(1e-3));
      CHECK(chain.prob(5, from, to) == Catch::Approx(truth[from - 1][to - 1]).margin(0.02));
    }
}

TEST_CASE("single regime chain is the trivial distribution", "[regime]") {
  RegimePath path;
  for (int i = 0; i < 50; ++i) {
    path.t.push_back(static_cast<double>(i + 1));
    path.r.push_back(1);
  }
  FourierBasis basis{24, {}, true};
  const auto chain = fit_regime_chain(path, 1, basis);
  CHECK(chain.prob(3, 1, 1) == Catch::Approx(1.0).margin(1e-9));
  CHECK(log_likelihood(chain, path) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("sinusoidal transition curve recovered pointwise", "[regime]") {
  const int period = 24;
  auto truth = [&](long t, int from) -> std::vector<double> {
    const double p = 0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * (t - 1.0) / period);
    if (from == 1) return {p, 1.0 - p};
    return {1.0 - p, p};
  };
  const auto path = sample_path(50000, period, 2, truth, 7);
  FourierBasis basis{period, {1.0}, true};
  const auto chain = fit_regime_chain(path, 2, basis);
  chain.validate();
  for (int t = 1; t <= period; ++t) {
    const double expected = 0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * (t - 1.0) / period);
    CHECK(chain.prob(t, 1, 1) == Catch::Approx(expected).margin(0.05));
  }
  // exact periodicity of the evaluator
  CHECK(chain.prob(3, 1, 2) == chain.prob(3 + period, 1, 2));
}

TEST_CASE("row stochasticity holds on the whole grid", "[regime]") {
  const auto path = sample_path(5000, 24, 3,
                                [&](long t, int) -> std::vector<double> {
                                  const double a =
                                      0.2 + 0.1 * std::cos(2.0 * std::numbers::pi * t / 24.0);
                                  return {a, 0.5, 0.5 - a};
                                },
                                99);
  FourierBasis basis{24, {1.0}, true};
  const auto chain = fit_regime_chain(path, 3, basis);
  for (int t = 1; t <= 24; ++t)
    for (int from = 1; from <= 3; ++from) {
      double sum = 0.0;
      for (int to = 1; to <= 3; ++to) {
        const double p = chain.prob(t, from, to);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        sum += p;
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-10);
    }
}

TEST_CASE("a source regime never visited raises", "[regime]") {
  RegimePath path;
  for (int i = 0; i < 100; ++i) {
    path.t.push_back(static_cast<double>(i + 1));
    path.r.push_back(1 + i % 2);  // regime 3 never appears
  }
  FourierBasis basis{24, {}, true};
  CHECK_THROWS_AS(fit_regime_chain(path, 3, basis), UnvisitedRegime);
}

TEST_CASE("MLE likelihood dominates the nested empirical fit", "[regime]") {
  const std::vector<std::vector<double>> truth = {{0.7, 0.3}, {0.4, 0.6}};
  const auto path = sample_path(4000, 24, 2, [&](long, int from) { return truth[from - 1]; }, 55);
  FourierBasis basis{24, {}, true};  // intercept-only nests the single bucket
  const auto mle = fit_regime_chain(path, 2, basis);
  const auto emp = fit_empirical_chain(path, 2, TimeBucketing::uniform(24, 1), 1.0);
  CHECK(log_likelihood(mle, path) >= log_likelihood(emp, path) - 1e-8);
}
