#pragma once

// Reference implementations used only by the test suites. Everything here is
// deliberately naive and independent of the library's own solve paths.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace testsupport {

struct TableauResult {
  int status = 3;  // 0 optimal, 1 infeasible, 2 unbounded, 3 stalled
  double objective = 0.0;
  std::vector<double> x;
};

// Dense two-phase tableau simplex for min c'x s.t. A x = b, x >= 0,
// Bland's rule throughout.
inline TableauResult tableau_simplex(std::vector<std::vector<double>> a, std::vector<double> b,
                                     const std::vector<double>& c) {
  const int m = static_cast<int>(b.size());
  const int n = static_cast<int>(c.size());
  for (int i = 0; i < m; ++i) {
    if (b[i] < 0.0) {
      for (double& v : a[i]) v = -v;
      b[i] = -b[i];
    }
  }
  const int total = n + m;
  std::vector<std::vector<double>> t(m + 1, std::vector<double>(total + 1, 0.0));
  std::vector<int> basis(m);
  std::vector<char> active(m, 1);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) t[i][j] = a[i][j];
    t[i][n + i] = 1.0;
    t[i][total] = b[i];
    basis[i] = n + i;
  }
  auto pivot = [&](int pr, int pc) {
    const double pv = t[pr][pc];
    for (double& v : t[pr]) v /= pv;
    for (int i = 0; i <= m; ++i) {
      if (i == pr) continue;
      const double f = t[i][pc];
      if (f == 0.0) continue;
      for (int j = 0; j <= total; ++j) t[i][j] -= f * t[pr][j];
    }
    basis[pr] = pc;
  };
  auto run = [&]() -> int {
    for (long iter = 0; iter < 200000; ++iter) {
      int pc = -1;
      for (int j = 0; j < n; ++j) {
        if (t[m][j] < -1e-9) {
          pc = j;
          break;
        }
      }
      if (pc < 0) return 0;
      int pr = -1;
      double best = 0.0;
      for (int i = 0; i < m; ++i) {
        if (!active[i] || t[i][pc] <= 1e-9) continue;
        const double ratio = t[i][total] / t[i][pc];
        if (pr < 0 || ratio < best - 1e-12 ||
            (ratio < best + 1e-12 && basis[i] < basis[pr]))
          pr = i, best = ratio;
      }
      if (pr < 0) return 2;
      pivot(pr, pc);
    }
    return 3;
  };

  // phase 1
  for (int j = 0; j <= total; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += t[i][j];
    t[m][j] = -s;
  }
  for (int i = 0; i < m; ++i) t[m][n + i] = 0.0;
  int r = run();
  if (r != 0 && r != 2) return {};
  if (-t[m][total] > 1e-7) return {1, 0.0, {}};
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) continue;
    int pc = -1;
    for (int j = 0; j < n; ++j)
      if (std::fabs(t[i][j]) > 1e-9) {
        pc = j;
        break;
      }
    if (pc >= 0)
      pivot(i, pc);
    else
      active[i] = 0;  // redundant row
  }

  // phase 2
  for (int j = 0; j <= total; ++j) t[m][j] = 0.0;
  for (int j = 0; j < n; ++j) t[m][j] = c[j];
  for (int i = 0; i < m; ++i) {
    if (!active[i] || basis[i] >= n) continue;
    const double f = t[m][basis[i]];
    if (f == 0.0) continue;
    for (int j = 0; j <= total; ++j) t[m][j] -= f * t[i][j];
  }
  r = run();
  if (r == 2) return {2, 0.0, {}};
  if (r != 0) return {};
  TableauResult out;
  out.status = 0;
  out.x.assign(n, 0.0);
  for (int i = 0; i < m; ++i)
    if (active[i] && basis[i] < n) out.x[basis[i]] = t[i][total];
  out.objective = 0.0;
  for (int j = 0; j < n; ++j) out.objective += c[j] * out.x[j];
  return out;
}

inline std::mt19937_64 rng(uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

}  // namespace testsupport
