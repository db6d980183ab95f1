#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cyclomdp/errors.hpp"
#include "cyclomdp/fourier.hpp"
#include "cyclomdp/quantile.hpp"

namespace cyclomdp {

/// A regime index path over history; times are 1-based step indices and a
/// transition is counted wherever consecutive entries are one step apart.
struct RegimePath {
  std::vector<double> t;
  std::vector<int> r;  // 1-based
  size_t size() const { return r.size(); }
};

inline RegimePath classify_series(const RegimePartition& partition, const Series& series) {
  RegimePath path;
  path.t = series.t;
  path.r.reserve(series.size());
  for (size_t i = 0; i < series.size(); ++i)
    path.r.push_back(partition.classify(static_cast<long>(series.t[i]), series.y[i]));
  return path;
}

/// Time-varying regime transition probabilities p(r' | r, t), periodic in t.
/// The canonical evaluator is a dense per-step grid; Fourier coefficients are
/// kept alongside when the chain was fitted in a basis.
struct RegimeChain {
  int regimes = 0;
  int period = 0;
  FourierBasis basis;
  bool has_coefficients = false;
  std::vector<std::vector<std::vector<double>>> gamma;  // [from][to][basis term]
  std::vector<double> grid;                             // ((t-1)*R + from)*R + to
  bool converged = true;

  double prob(long t, int from, int to) const {
    long u = (t - 1) % period;
    if (u < 0) u += period;
    return grid[(static_cast<size_t>(u) * regimes + (from - 1)) * regimes + (to - 1)];
  }

  void validate() const {
    for (int t = 1; t <= period; ++t)
      for (int r = 1; r <= regimes; ++r) {
        double sum = 0.0;
        for (int r2 = 1; r2 <= regimes; ++r2) {
          const double p = prob(t, r, r2);
          if (p < -1e-12 || p > 1.0 + 1e-12)
            throw Error("transition probability out of [0,1]");
          sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-10) throw Error("transition row does not normalize");
      }
  }
};

/// Bucketed transition counts with Laplace smoothing.
inline RegimeChain fit_empirical_chain(const RegimePath& path, int regimes,
                                       const TimeBucketing& bucketing, double alpha = 1.0) {
  const int r_count = regimes;
  const int p = bucketing.period;
  std::vector<double> counts(static_cast<size_t>(bucketing.count) * r_count * r_count, 0.0);
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    if (path.t[i + 1] != path.t[i] + 1.0) continue;
    const int b = bucketing.bucket(static_cast<long>(path.t[i]));
    counts[(static_cast<size_t>(b) * r_count + (path.r[i] - 1)) * r_count + (path.r[i + 1] - 1)] += 1.0;
  }
  RegimeChain chain;
  chain.regimes = r_count;
  chain.period = p;
  chain.has_coefficients = false;
  chain.grid.assign(static_cast<size_t>(p) * r_count * r_count, 0.0);
  for (int t = 1; t <= p; ++t) {
    const int b = bucketing.bucket(t);
    for (int from = 0; from < r_count; ++from) {
      double total = 0.0;
      for (int to = 0; to < r_count; ++to)
        total += counts[(static_cast<size_t>(b) * r_count + from) * r_count + to];
      for (int to = 0; to < r_count; ++to) {
        const double c = counts[(static_cast<size_t>(b) * r_count + from) * r_count + to];
        chain.grid[(static_cast<size_t>(t - 1) * r_count + from) * r_count + to] =
            (c + alpha) / (total + alpha * r_count);
      }
    }
  }
  return chain;
}

inline double log_likelihood(const RegimeChain& chain, const RegimePath& path) {
  double acc = 0.0;
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    if (path.t[i + 1] != path.t[i] + 1.0) continue;
    acc += std::log(std::max(chain.prob(static_cast<long>(path.t[i]), path.r[i], path.r[i + 1]),
                             1e-300));
  }
  return acc;
}

struct RegimeFitOptions {
  int max_iterations = 2000;
  double stationarity_tol = 1e-6;
  double epsilon = 1e-6;  // probability floor on the grid
  int dykstra_iterations = 1000;
};

namespace detail {

// Euclidean projection of v onto {q >= eps, sum q = 1}.
inline void project_row_simplex(double* v, int n, double eps) {
  const double mass = 1.0 - eps * n;
  std::vector<double> z(n);
  for (int i = 0; i < n; ++i) z[i] = v[i] - eps;
  std::vector<double> u(z);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (int k = 0; k < n; ++k) {
    cum += u[k];
    const double cand = (cum - mass) / (k + 1);
    if (k + 1 == n || u[k + 1] <= cand) {
      tau = cand;
      break;
    }
  }
  for (int i = 0; i < n; ++i) v[i] = std::max(z[i] - tau, 0.0) + eps;
}

// Orthonormal columns spanning the basis image on the period grid.
inline std::vector<std::vector<double>> basis_orthonormal(const FourierBasis& basis) {
  const int p = basis.period;
  const int d = basis.dimension();
  std::vector<std::vector<double>> q;
  for (int k = 0; k < d; ++k) {
    std::vector<double> col(p);
    for (int t = 1; t <= p; ++t) col[t - 1] = basis.evaluate(t)[k];
    for (const auto& prev : q) {
      double dot = 0.0;
      for (int i = 0; i < p; ++i) dot += prev[i] * col[i];
      for (int i = 0; i < p; ++i) col[i] -= dot * prev[i];
    }
    double norm = 0.0;
    for (double v : col) norm += v * v;
    if (norm > 1e-18) {
      const double inv = 1.0 / std::sqrt(norm);
      for (double& v : col) v *= inv;
      q.push_back(std::move(col));
    }
  }
  return q;
}

}  // namespace detail

/// Maximum-likelihood fit of the Fourier-parameterized chain. Ascent runs in
/// grid space with projections onto {per-step epsilon-floored simplex rows}
/// intersected with the basis image (Dykstra), which keeps the likelihood
/// monotone across accepted iterates. Coefficients are recovered from the
/// grid by least squares and re-centered so rows normalize exactly.
inline RegimeChain fit_regime_chain(const RegimePath& path, int regimes, const FourierBasis& basis,
                                    const RegimeFitOptions& options = {}) {
  const int r_count = regimes;
  const int p = basis.period;
  const int d = basis.dimension();
  if (!basis.intercept) throw Error("regime chain basis requires an intercept term");

  // transition counts aggregated on the period grid
  std::vector<double> counts(static_cast<size_t>(p) * r_count * r_count, 0.0);
  std::vector<double> source_total(r_count, 0.0);
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    if (path.t[i + 1] != path.t[i] + 1.0) continue;
    long u = (static_cast<long>(path.t[i]) - 1) % p;
    if (u < 0) u += p;
    counts[(static_cast<size_t>(u) * r_count + (path.r[i] - 1)) * r_count + (path.r[i + 1] - 1)] += 1.0;
    source_total[path.r[i] - 1] += 1.0;
  }
  for (int r = 0; r < r_count; ++r)
    if (source_total[r] == 0.0)
      throw UnvisitedRegime("no observed transitions out of regime " + std::to_string(r + 1));

  const std::vector<std::vector<double>> qb = detail::basis_orthonormal(basis);
  if (static_cast<int>(qb.size()) < d)
    throw DegenerateBasis("regime basis is rank deficient on the period grid");

  RegimeChain chain;
  chain.regimes = r_count;
  chain.period = p;
  chain.basis = basis;
  chain.has_coefficients = true;
  chain.gamma.assign(r_count, std::vector<std::vector<double>>(r_count, std::vector<double>(d, 0.0)));
  chain.grid.assign(static_cast<size_t>(p) * r_count * r_count, 0.0);
  chain.converged = true;

  const double eps = options.epsilon;

  // subspace projection of a p x r matrix (column-wise), flat row-major [t][to]
  auto project_subspace = [&](std::vector<double>& m) {
    std::vector<double> col(p);
    for (int c = 0; c < r_count; ++c) {
      for (int t = 0; t < p; ++t) col[t] = m[static_cast<size_t>(t) * r_count + c];
      std::vector<double> acc(p, 0.0);
      for (const auto& base : qb) {
        double dot = 0.0;
        for (int t = 0; t < p; ++t) dot += base[t] * col[t];
        for (int t = 0; t < p; ++t) acc[t] += dot * base[t];
      }
      for (int t = 0; t < p; ++t) m[static_cast<size_t>(t) * r_count + c] = acc[t];
    }
  };
  auto project_rows = [&](std::vector<double>& m) {
    for (int t = 0; t < p; ++t) detail::project_row_simplex(&m[static_cast<size_t>(t) * r_count], r_count, eps);
  };
  // Dykstra onto the intersection, finishing on the subspace step
  auto project_feasible = [&](std::vector<double> m) {
    const size_t sz = m.size();
    std::vector<double> inc1(sz, 0.0), inc2(sz, 0.0), prev(sz);
    for (int it = 0; it < options.dykstra_iterations; ++it) {
      prev = m;
      for (size_t i = 0; i < sz; ++i) m[i] += inc1[i];
      std::vector<double> before = m;
      project_rows(m);
      for (size_t i = 0; i < sz; ++i) inc1[i] = before[i] - m[i];
      for (size_t i = 0; i < sz; ++i) m[i] += inc2[i];
      before = m;
      project_subspace(m);
      for (size_t i = 0; i < sz; ++i) inc2[i] = before[i] - m[i];
      double delta = 0.0;
      for (size_t i = 0; i < sz; ++i) delta = std::max(delta, std::fabs(m[i] - prev[i]));
      if (delta <= 1e-13) break;
    }
    return m;
  };

  // one independent ascent per source regime
  for (int from = 0; from < r_count; ++from) {
    std::vector<double> n_tr(static_cast<size_t>(p) * r_count, 0.0);
    for (int t = 0; t < p; ++t)
      for (int to = 0; to < r_count; ++to)
        n_tr[static_cast<size_t>(t) * r_count + to] =
            counts[(static_cast<size_t>(t) * r_count + from) * r_count + to] / source_total[from];

    auto loglik = [&](const std::vector<double>& q) {
      double acc = 0.0;
      for (size_t i = 0; i < q.size(); ++i)
        if (n_tr[i] > 0.0) acc += n_tr[i] * std::log(std::max(q[i], 1e-300));
      return acc;
    };

    // initialize from the time-homogeneous empirical fit, lifted into the set
    std::vector<double> q0(static_cast<size_t>(p) * r_count, 0.0);
    {
      std::vector<double> marginal(r_count, 0.0);
      double total = 0.0;
      for (int t = 0; t < p; ++t)
        for (int to = 0; to < r_count; ++to) {
          marginal[to] += n_tr[static_cast<size_t>(t) * r_count + to];
          total += n_tr[static_cast<size_t>(t) * r_count + to];
        }
      for (int t = 0; t < p; ++t)
        for (int to = 0; to < r_count; ++to)
          q0[static_cast<size_t>(t) * r_count + to] = (marginal[to] + 1.0 / r_count) / (total + 1.0);
    }
    std::vector<double> q = project_feasible(std::move(q0));
    double l_cur = loglik(q);
    double step = 1.0;
    bool stationary = false;

    std::vector<double> grad(q.size());
    for (int iter = 0; iter < options.max_iterations; ++iter) {
      for (size_t i = 0; i < q.size(); ++i) grad[i] = n_tr[i] > 0.0 ? n_tr[i] / q[i] : 0.0;

      std::vector<double> probe(q.size());
      for (size_t i = 0; i < q.size(); ++i) probe[i] = q[i] + grad[i];
      probe = project_feasible(std::move(probe));
      double pg = 0.0;
      for (size_t i = 0; i < q.size(); ++i) pg = std::max(pg, std::fabs(probe[i] - q[i]));
      if (pg <= options.stationarity_tol) {
        stationary = true;
        break;
      }

      bool accepted = false;
      while (step >= 1e-12) {
        std::vector<double> trial(q.size());
        for (size_t i = 0; i < q.size(); ++i) trial[i] = q[i] + step * grad[i];
        trial = project_feasible(std::move(trial));
        const double l_trial = loglik(trial);
        if (l_trial >= l_cur - 1e-14) {
          if (l_trial >= l_cur) {
            q = std::move(trial);
            l_cur = l_trial;
          }
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      step = std::min(step * 2.0, 1e6);
    }
    if (!stationary) chain.converged = false;

    // lift back to coefficients; re-center so every row sums to one exactly
    std::vector<double> col(p);
    for (int to = 0; to < r_count; ++to) {
      for (int t = 0; t < p; ++t) col[t] = q[static_cast<size_t>(t) * r_count + to];
      // coordinates in the orthonormal frame, then express in basis terms by
      // solving the small triangular-free least squares via normal equations
      std::vector<double> phi_t(d);
      std::vector<std::vector<double>> ata(d, std::vector<double>(d, 0.0));
      std::vector<double> atb(d, 0.0);
      for (int t = 1; t <= p; ++t) {
        const std::vector<double> phi = basis.evaluate(t);
        for (int a = 0; a < d; ++a) {
          atb[a] += phi[a] * col[t - 1];
          for (int b = 0; b <= a; ++b) ata[a][b] += phi[a] * phi[b];
        }
      }
      // Cholesky solve
      std::vector<std::vector<double>> lmat(d, std::vector<double>(d, 0.0));
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b <= a; ++b) {
          double s = ata[a][b];
          for (int k = 0; k < b; ++k) s -= lmat[a][k] * lmat[b][k];
          if (a == b)
            lmat[a][a] = std::sqrt(std::max(s, 1e-300));
          else
            lmat[a][b] = s / lmat[b][b];
        }
      }
      std::vector<double> z(d);
      for (int a = 0; a < d; ++a) {
        double s = atb[a];
        for (int k = 0; k < a; ++k) s -= lmat[a][k] * z[k];
        z[a] = s / lmat[a][a];
      }
      std::vector<double>& g = chain.gamma[from][to];
      for (int a = d - 1; a >= 0; --a) {
        double s = z[a];
        for (int k = a + 1; k < d; ++k) s -= lmat[k][a] * g[k];
        g[a] = s / lmat[a][a];
      }
    }
    // affine correction: sum over destinations of gamma must equal e_0
    for (int k = 0; k < d; ++k) {
      double g_sum = 0.0;
      for (int to = 0; to < r_count; ++to) g_sum += chain.gamma[from][to][k];
      const double target = k == 0 ? 1.0 : 0.0;
      const double shift = (g_sum - target) / r_count;
      for (int to = 0; to < r_count; ++to) chain.gamma[from][to][k] -= shift;
    }
    for (int t = 1; t <= p; ++t)
      for (int to = 0; to < r_count; ++to)
        chain.grid[(static_cast<size_t>(t - 1) * r_count + from) * r_count + to] =
            basis.dot(t, chain.gamma[from][to]);
  }

  chain.validate();
  return chain;
}

}  // namespace cyclomdp
