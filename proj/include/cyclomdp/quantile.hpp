#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cyclomdp/errors.hpp"
#include "cyclomdp/fourier.hpp"
#include "cyclomdp/lp.hpp"

namespace cyclomdp {

/// A time series sampled on (a multiple of) the basis period. Times are
/// 1-based step indices; fractional times are allowed.
struct Series {
  std::vector<double> t;
  std::vector<double> y;
  size_t size() const { return y.size(); }
};

/// Fits one quantile curve by minimizing the pinball loss
///   sum_i rho_level(y_i - phi(t_i) . B)
/// compiled to an LP with over/under slack variables per observation.
inline std::vector<double> fit_quantile(const Series& series, double level,
                                        const FourierBasis& basis) {
  const int n = static_cast<int>(series.size());
  const int d = basis.dimension();
  if (level <= 0.0 || level >= 1.0) throw Error("quantile level must lie in (0,1)");
  if (n < 2 * d) throw InsufficientData("need at least " + std::to_string(2 * d) +
                                        " observations, got " + std::to_string(n));

  // rank check on the design matrix via column Gram determinant-free QR
  {
    std::vector<std::vector<double>> q;  // orthonormalized columns
    for (int k = 0; k < d; ++k) {
      std::vector<double> col(n);
      for (int i = 0; i < n; ++i) col[i] = basis.evaluate(series.t[i])[k];
      double norm0 = 0.0;
      for (double v : col) norm0 += v * v;
      for (const auto& prev : q) {
        double dot = 0.0;
        for (int i = 0; i < n; ++i) dot += prev[i] * col[i];
        for (int i = 0; i < n; ++i) col[i] -= dot * prev[i];
      }
      double norm = 0.0;
      for (double v : col) norm += v * v;
      if (norm <= 1e-20 * std::max(1.0, norm0))
        throw DegenerateBasis("design matrix is rank deficient at column " + std::to_string(k));
      const double inv = 1.0 / std::sqrt(norm);
      for (double& v : col) v *= inv;
      q.push_back(std::move(col));
    }
  }

  // columns: B (free, d) | u_i (n) | v_i (n); rows: phi_i . B + u_i - v_i = y_i
  auto lp = LpProblem::with_cols(d + 2 * n);
  for (int k = 0; k < d; ++k) lp.set_free(k);
  lp.eq_rhs = series.y;
  std::vector<std::vector<double>> design(n);
  for (int i = 0; i < n; ++i) {
    design[i] = basis.evaluate(series.t[i]);
    for (int k = 0; k < d; ++k)
      if (design[i][k] != 0.0) lp.add_eq_entry(i, k, design[i][k]);
    lp.add_eq_entry(i, d + i, 1.0);
    lp.add_eq_entry(i, d + n + i, -1.0);
    lp.objective[d + i] = level;
    lp.objective[d + n + i] = 1.0 - level;
  }

  // Starting basis anchored on a least-squares interpolant: d anchor rows
  // carry the coefficient columns, every other row its over- or under-slack by
  // residual sign. Feasible by construction, and close enough to the quantile
  // curve that the simplex walk stays short.
  LpBasis warm;
  {
    std::vector<std::vector<double>> ata(d, std::vector<double>(d, 0.0));
    std::vector<double> atb(d, 0.0);
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < d; ++a) {
        atb[a] += design[i][a] * series.y[i];
        for (int b = 0; b < d; ++b) ata[a][b] += design[i][a] * design[i][b];
      }
    auto solve_dense = [d](std::vector<std::vector<double>> m, std::vector<double> rhs) {
      for (int k = 0; k < d; ++k) {
        int piv = k;
        for (int i = k + 1; i < d; ++i)
          if (std::fabs(m[i][k]) > std::fabs(m[piv][k])) piv = i;
        std::swap(m[k], m[piv]);
        std::swap(rhs[k], rhs[piv]);
        const double diag = m[k][k] == 0.0 ? 1e-300 : m[k][k];
        for (int i = k + 1; i < d; ++i) {
          const double f = m[i][k] / diag;
          if (f == 0.0) continue;
          for (int j = k; j < d; ++j) m[i][j] -= f * m[k][j];
          rhs[i] -= f * rhs[k];
        }
      }
      std::vector<double> x(d, 0.0);
      for (int k = d - 1; k >= 0; --k) {
        double s = rhs[k];
        for (int j = k + 1; j < d; ++j) s -= m[k][j] * x[j];
        x[k] = s / (m[k][k] == 0.0 ? 1e-300 : m[k][k]);
      }
      return x;
    };
    std::vector<double> b_ls = solve_dense(ata, atb);

    std::vector<double> res(n);
    for (int i = 0; i < n; ++i) {
      double f = 0.0;
      for (int k = 0; k < d; ++k) f += design[i][k] * b_ls[k];
      res[i] = series.y[i] - f;
    }
    if (basis.intercept) {
      // center the start on the target quantile, not the mean
      std::vector<double> sorted = res;
      const size_t k = std::min(static_cast<size_t>(level * n), static_cast<size_t>(n - 1));
      std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end());
      b_ls[0] += sorted[k];
      for (int i = 0; i < n; ++i) res[i] -= sorted[k];
    }

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::vector<double> absres(n);
    for (int i = 0; i < n; ++i) absres[i] = std::fabs(res[i]);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return absres[a] < absres[b]; });
    std::vector<int> anchors;
    std::vector<std::vector<double>> frame;  // orthonormalized anchor rows
    for (int idx : order) {
      if (static_cast<int>(anchors.size()) == d) break;
      std::vector<double> row = design[idx];
      double norm0 = 0.0;
      for (double v : row) norm0 += v * v;
      for (const auto& f : frame) {
        double dot = 0.0;
        for (int k = 0; k < d; ++k) dot += f[k] * row[k];
        for (int k = 0; k < d; ++k) row[k] -= dot * f[k];
      }
      double norm = 0.0;
      for (double v : row) norm += v * v;
      if (norm <= 1e-12 * std::max(1.0, norm0)) continue;
      const double inv = 1.0 / std::sqrt(norm);
      for (double& v : row) v *= inv;
      frame.push_back(std::move(row));
      anchors.push_back(idx);
    }
    if (static_cast<int>(anchors.size()) == d) {
      std::vector<std::vector<double>> amat(d, std::vector<double>(d));
      std::vector<double> arhs(d);
      for (int k = 0; k < d; ++k) {
        amat[k] = design[anchors[k]];
        arhs[k] = series.y[anchors[k]];
      }
      const std::vector<double> b_interp = solve_dense(amat, arhs);
      warm.basic.assign(n, -1);
      warm.state.assign(d + 2 * n, 1);  // nonbasic at lower bound
      for (int k = 0; k < d; ++k) {
        warm.basic[anchors[k]] = k;
        warm.state[k] = 0;
      }
      for (int i = 0; i < n; ++i) {
        if (warm.basic[i] >= 0) continue;
        double f = 0.0;
        for (int k = 0; k < d; ++k) f += design[i][k] * b_interp[k];
        warm.basic[i] = series.y[i] - f >= 0.0 ? d + i : d + n + i;
        warm.state[warm.basic[i]] = 0;
      }
    }
  }

  LpOptions lp_options;
  if (!warm.empty()) lp_options.warm_start = &warm;
  const LpSolution sol = solve_lp(lp, lp_options);
  if (sol.status != LpStatus::Optimal)
    throw Error(std::string("quantile fit LP failed: ") + to_string(sol.status));
  return std::vector<double>(sol.x.begin(), sol.x.begin() + d);
}

/// Quantile curves for an ordered set of levels, with grid values repaired to
/// be non-crossing (pointwise monotone rearrangement on the period grid).
struct QuantileModel {
  FourierBasis basis;
  std::vector<double> levels;
  std::vector<std::vector<double>> coeffs;  // raw per-level fits
  std::vector<std::vector<double>> grid;    // repaired values, [level][t-1]
  std::vector<double> coverage;             // fraction of fit data below each raw curve

  int curve_count() const { return static_cast<int>(levels.size()); }

  double raw_value(int level_index, double t) const { return basis.dot(t, coeffs[level_index]); }

  /// Repaired curve value at integer time step t (1-based, cyclic).
  double grid_value(int level_index, long t) const {
    long u = (t - 1) % basis.period;
    if (u < 0) u += basis.period;
    return grid[level_index][static_cast<size_t>(u)];
  }
};

inline QuantileModel fit_quantile_model(const Series& series, const std::vector<double>& levels,
                                        const FourierBasis& basis) {
  if (levels.empty()) throw Error("no quantile levels given");
  for (size_t k = 0; k + 1 < levels.size(); ++k)
    if (!(levels[k] < levels[k + 1])) throw Error("quantile levels must be strictly increasing");

  QuantileModel model;
  model.basis = basis;
  model.levels = levels;
  for (double level : levels) model.coeffs.push_back(fit_quantile(series, level, basis));

  model.grid.assign(levels.size(), std::vector<double>(basis.period, 0.0));
  for (int t = 1; t <= basis.period; ++t) {
    std::vector<double> column(levels.size());
    for (size_t k = 0; k < levels.size(); ++k) column[k] = model.raw_value(static_cast<int>(k), t);
    std::sort(column.begin(), column.end());
    for (size_t k = 0; k < levels.size(); ++k) model.grid[k][t - 1] = column[k];
  }

  model.coverage.assign(levels.size(), 0.0);
  for (size_t k = 0; k < levels.size(); ++k) {
    long below = 0;
    for (size_t i = 0; i < series.size(); ++i)
      if (series.y[i] < model.raw_value(static_cast<int>(k), series.t[i])) ++below;
    model.coverage[k] = static_cast<double>(below) / static_cast<double>(series.size());
  }
  return model;
}

/// Inter-quantile regimes: regime r covers [w_{r-1}(t), w_r(t)) with the
/// convention w_0 = floor and w_{|R|} = +inf. Values on a curve belong to the
/// higher regime.
struct RegimePartition {
  QuantileModel model;
  double floor = 0.0;

  int regimes() const { return model.curve_count() + 1; }
  int period() const { return model.basis.period; }

  /// Curve r (1..|R|-1) bounding regimes r and r+1 at step t, floored.
  double boundary(int r, long t) const {
    return std::max(model.grid_value(r - 1, t), floor);
  }

  /// 1-based regime of value w at time step t.
  int classify(long t, double w) const {
    if (!std::isfinite(w)) throw UnclassifiableInput("non-finite input value");
    int r = 1;
    for (int k = 1; k < regimes(); ++k)
      if (w >= boundary(k, t)) r = k + 1;
    return r;
  }
};

/// Maps period steps to histogram buckets.
struct TimeBucketing {
  int period = 0;
  int count = 0;
  std::vector<int> bucket_of;  // size period

  static TimeBucketing uniform(int period, int buckets) {
    TimeBucketing tb;
    tb.period = period;
    tb.count = std::max(1, std::min(buckets, period));
    tb.bucket_of.resize(period);
    for (int t = 0; t < period; ++t)
      tb.bucket_of[t] = static_cast<int>(static_cast<long>(t) * tb.count / period);
    return tb;
  }

  /// Hour-of-day crossed with a coarse season index; requires a period that
  /// is a whole number of days.
  static TimeBucketing hour_season(int period, int seasons) {
    if (period % 24 != 0) throw Error("hour/season bucketing needs period divisible by 24");
    const int days = period / 24;
    TimeBucketing tb;
    tb.period = period;
    seasons = std::max(1, std::min(seasons, days));
    tb.count = 24 * seasons;
    tb.bucket_of.resize(period);
    for (int t = 0; t < period; ++t) {
      const int hour = t % 24;
      const int season = static_cast<int>(static_cast<long>(t / 24) * seasons / days);
      tb.bucket_of[t] = season * 24 + hour;
    }
    return tb;
  }

  int bucket(long t) const {
    long u = (t - 1) % period;
    if (u < 0) u += period;
    return bucket_of[static_cast<size_t>(u)];
  }

  bool operator==(const TimeBucketing&) const = default;
};

/// Conditional within-regime distributions, one discrete histogram per
/// (regime, time bucket) cell. Atom values are the mean of the observations
/// that fell in the bin.
struct ConditionalHistogram {
  TimeBucketing bucketing;
  int regimes = 0;
  std::vector<std::vector<double>> edges;  // per regime, deduplicated
  std::vector<std::vector<double>> probs;  // per cell
  std::vector<std::vector<double>> atoms;  // per cell
  std::vector<int> borrowed_from;          // per cell, -1 if own data

  int cell(int regime, long t) const { return (regime - 1) * bucketing.count + bucketing.bucket(t); }
  const std::vector<double>& cell_probs(int regime, long t) const { return probs[cell(regime, t)]; }
  const std::vector<double>& cell_atoms(int regime, long t) const { return atoms[cell(regime, t)]; }

  double expected_positive_part(int regime, long t, double threshold) const {
    const int c = cell(regime, t);
    double acc = 0.0;
    for (size_t k = 0; k < probs[c].size(); ++k)
      acc += probs[c][k] * std::max(atoms[c][k] - threshold, 0.0);
    return acc;
  }
};

inline ConditionalHistogram fit_histograms(const Series& series, const RegimePartition& partition,
                                           int bins, const TimeBucketing& bucketing) {
  if (bucketing.period != partition.period()) throw Error("bucketing period mismatch");
  const int nregimes = partition.regimes();
  ConditionalHistogram h;
  h.bucketing = bucketing;
  h.regimes = nregimes;

  std::vector<std::vector<double>> pooled(nregimes);
  std::vector<std::vector<std::pair<int, double>>> per_cell(nregimes * bucketing.count);
  for (size_t i = 0; i < series.size(); ++i) {
    const long t = static_cast<long>(series.t[i]);
    const int r = partition.classify(t, series.y[i]);
    pooled[r - 1].push_back(series.y[i]);
    per_cell[(r - 1) * bucketing.count + bucketing.bucket(t)].push_back({0, series.y[i]});
  }
  for (int r = 0; r < nregimes; ++r)
    if (pooled[r].empty())
      throw EmptyRegime("regime " + std::to_string(r + 1) + " has no observations (" +
                        std::to_string(series.size()) + " points total)");

  // equal-probability edges from the pooled per-regime sample
  h.edges.resize(nregimes);
  for (int r = 0; r < nregimes; ++r) {
    std::vector<double>& s = pooled[r];
    std::sort(s.begin(), s.end());
    std::vector<double> e;
    e.push_back(s.front());
    for (int k = 1; k < bins; ++k) {
      const size_t idx = std::min(s.size() - 1, static_cast<size_t>(k) * s.size() / bins);
      e.push_back(s[idx]);
    }
    e.push_back(s.back());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    if (e.size() == 1) e.push_back(e.front());  // point mass
    h.edges[r] = std::move(e);
  }

  auto bin_of = [&](int r, double v) {
    const std::vector<double>& e = h.edges[r];
    const int nb = static_cast<int>(e.size()) - 1;
    int k = static_cast<int>(std::upper_bound(e.begin() + 1, e.end() - 1, v) - (e.begin() + 1));
    return std::clamp(k, 0, nb - 1);
  };

  const int ncells = nregimes * bucketing.count;
  h.probs.assign(ncells, {});
  h.atoms.assign(ncells, {});
  h.borrowed_from.assign(ncells, -1);

  // per-regime fallback atoms for bins a cell never observed
  std::vector<std::vector<double>> regime_atoms(nregimes);
  for (int r = 0; r < nregimes; ++r) {
    const int nb = static_cast<int>(h.edges[r].size()) - 1;
    std::vector<double> sum(nb, 0.0);
    std::vector<long> cnt(nb, 0);
    for (double v : pooled[r]) {
      const int k = bin_of(r, v);
      sum[k] += v;
      cnt[k] += 1;
    }
    regime_atoms[r].resize(nb);
    for (int k = 0; k < nb; ++k)
      regime_atoms[r][k] = cnt[k] > 0 ? sum[k] / cnt[k] : 0.5 * (h.edges[r][k] + h.edges[r][k + 1]);
  }

  for (int r = 0; r < nregimes; ++r) {
    const int nb = static_cast<int>(h.edges[r].size()) - 1;
    for (int b = 0; b < bucketing.count; ++b) {
      const int c = r * bucketing.count + b;
      const auto& obs = per_cell[c];
      if (obs.empty()) continue;
      std::vector<double> sum(nb, 0.0);
      std::vector<long> cnt(nb, 0);
      for (const auto& [unused, v] : obs) {
        const int k = bin_of(r, v);
        sum[k] += v;
        cnt[k] += 1;
      }
      std::vector<double> p(nb, 0.0), av(nb, 0.0);
      for (int k = 0; k < nb; ++k) {
        p[k] = static_cast<double>(cnt[k]) / static_cast<double>(obs.size());
        av[k] = cnt[k] > 0 ? sum[k] / cnt[k] : regime_atoms[r][k];
      }
      h.probs[c] = std::move(p);
      h.atoms[c] = std::move(av);
    }
  }

  // fill empty cells from the nearest populated bucket (cyclic time distance,
  // lowest bucket index on ties) within the same regime
  for (int r = 0; r < nregimes; ++r) {
    std::vector<uint8_t> populated(bucketing.count, 0);
    for (int b = 0; b < bucketing.count; ++b)
      if (!h.probs[r * bucketing.count + b].empty()) populated[b] = 1;
    for (int b = 0; b < bucketing.count; ++b) {
      const int c = r * bucketing.count + b;
      if (!h.probs[c].empty()) continue;
      int best = -1;
      for (int delta = 0; delta <= bucketing.period && best < 0; ++delta) {
        for (int t = 0; t < bucketing.period; ++t) {
          if (bucketing.bucket_of[t] != b) continue;
          for (int sgn : {+1, -1}) {
            int u = ((t + sgn * delta) % bucketing.period + bucketing.period) % bucketing.period;
            const int cand = bucketing.bucket_of[u];
            if (populated[cand] && (best < 0 || cand < best)) best = cand;
            if (delta == 0) break;
          }
        }
      }
      if (best < 0) throw EmptyRegime("regime " + std::to_string(r + 1) + " has no populated bucket");
      h.probs[c] = h.probs[r * bucketing.count + best];
      h.atoms[c] = h.atoms[r * bucketing.count + best];
      h.borrowed_from[c] = best;
    }
  }
  return h;
}

}  // namespace cyclomdp
