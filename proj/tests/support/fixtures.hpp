#pragma once

// Shared deterministic fixtures: synthetic data generators, hand-built model
// components, the desk-scale thermal instance, and exact reference
// computations (policy enumeration, cyclostationary occupancy) used as
// oracles against the LP path.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "cyclomdp/mdp.hpp"
#include "cyclomdp/occupancy.hpp"
#include "cyclomdp/quantile.hpp"
#include "cyclomdp/regime.hpp"

namespace testsupport {

using namespace cyclomdp;

// ---------------------------------------------------------------------------
// synthetic data

inline Series synthetic_net_demand(int hours, uint64_t seed, double base = 16.0,
                                   double amplitude = 6.0, double ar = 0.8,
                                   double noise_sd = 2.5) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> eps(0.0, noise_sd);
  Series s;
  double carry = 0.0;
  for (int i = 0; i < hours; ++i) {
    const double t = 1.0 + i % 24;
    carry = ar * carry + eps(g);
    const double w =
        base + amplitude * std::sin(2.0 * std::numbers::pi * (t - 1.0) / 24.0) + carry;
    s.t.push_back(t);
    s.y.push_back(std::max(w, 0.0));
  }
  return s;
}

// ---------------------------------------------------------------------------
// hand-built model components (bypass fitting for unit tests)

inline RegimeChain uniform_chain(int period, int regimes) {
  RegimeChain chain;
  chain.regimes = regimes;
  chain.period = period;
  chain.grid.assign(static_cast<size_t>(period) * regimes * regimes, 1.0 / regimes);
  return chain;
}

// single-bucket histogram with the given atoms in every regime cell
inline ConditionalHistogram atom_histogram(int period, int regimes, std::vector<double> atoms,
                                           std::vector<double> probs) {
  ConditionalHistogram h;
  h.bucketing = TimeBucketing::uniform(period, 1);
  h.regimes = regimes;
  h.edges.assign(regimes, atoms);
  h.probs.assign(regimes * h.bucketing.count, probs);
  h.atoms.assign(regimes * h.bucketing.count, atoms);
  h.borrowed_from.assign(regimes * h.bucketing.count, -1);
  return h;
}

inline RegimePartition flat_partition(std::vector<double> curves, int period) {
  QuantileModel model;
  model.basis = FourierBasis{period, {}, true};
  for (size_t k = 0; k < curves.size(); ++k) {
    model.levels.push_back((k + 1.0) / (curves.size() + 1.0));
    model.coeffs.push_back({curves[k]});
    model.grid.push_back(std::vector<double>(period, curves[k]));
  }
  return RegimePartition{model, 0.0};
}

// ---------------------------------------------------------------------------
// desk-scale thermal instance (fit end to end on synthetic data)

struct ThermalDesk {
  Series series;
  RegimePartition partition;
  RegimeChain chain;
  ConditionalHistogram hist;
  ThermalParams params;
  CyclicMdp mdp;
};

inline const ThermalDesk& thermal_desk() {
  static const ThermalDesk desk = [] {
    ThermalDesk d;
    d.series = synthetic_net_demand(2 * 8760, 20240801);
    FourierBasis basis{24, {1.0}, true};
    d.partition = RegimePartition{fit_quantile_model(d.series, {0.25, 0.5, 0.75}, basis), 0.0};
    const RegimePath path = classify_series(d.partition, d.series);
    d.chain = fit_regime_chain(path, d.partition.regimes(), basis);
    d.hist = fit_histograms(d.series, d.partition, 8, TimeBucketing::uniform(24, 24));
    d.params = ThermalParams{};
    d.mdp = build_thermal_mdp(d.params, d.partition, d.chain, d.hist);
    return d;
  }();
  return desk;
}

// ---------------------------------------------------------------------------
// random cyclostationary MDPs (strictly positive kernels, two-decimal costs)

inline CyclicMdp random_mdp(int period, int states, int actions, uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  CyclicMdp mdp;
  mdp.period = period;
  mdp.regimes = 1;
  for (int l = 0; l < states; ++l) mdp.level_values.push_back(l);
  for (int a = 0; a < actions; ++a) mdp.action_values.push_back(a);
  mdp.state_level.resize(states);
  mdp.state_regime.assign(states, 1);
  mdp.state_aug.assign(states, 0);
  mdp.admissible.resize(states);
  for (int s = 0; s < states; ++s) {
    mdp.state_level[s] = s;
    for (int a = 0; a < actions; ++a) mdp.admissible[s].push_back(a);
  }
  mdp.curtail.assign(static_cast<size_t>(period) * states, 0.0);
  mdp.cost.resize(static_cast<size_t>(period) * states * actions);
  for (double& c : mdp.cost) c = std::round(u(g) * 100.0) / 100.0;

  std::vector<std::vector<double>> rows(static_cast<size_t>(period) * states * actions,
                                        std::vector<double>(states));
  for (auto& row : rows) {
    double total = 0.0;
    for (double& p : row) {
      p = u(g);
      total += p;
    }
    for (double& p : row) p /= total;
  }
  cyclomdp::detail::KernelBuilder kb(period, states, actions);
  kb.build(mdp, [&](int t, int s, int a, auto&& add) {
    const auto& row = rows[mdp.tsa_index(t, s, a)];
    for (int s2 = 0; s2 < states; ++s2) add(s2, row[s2]);
  });
  mdp.validate();
  return mdp;
}

// ---------------------------------------------------------------------------
// exact references

inline std::vector<double> solve_dense_system(std::vector<std::vector<double>> a,
                                              std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::fabs(a[i][k]) > std::fabs(a[piv][k])) piv = i;
    std::swap(a[k], a[piv]);
    std::swap(b[k], b[piv]);
    for (int i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      if (f == 0.0) continue;
      for (int j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n, 0.0);
  for (int k = n - 1; k >= 0; --k) {
    double s = b[k];
    for (int j = k + 1; j < n; ++j) s -= a[k][j] * x[j];
    x[k] = s / a[k][k];
  }
  return x;
}

// Exact per-time state marginals of a fixed deterministic policy: solves the
// cyclostationary balance system mu = mu P_1 ... P_T, then propagates.
inline std::vector<std::vector<double>> stationary_marginals(const CyclicMdp& mdp,
                                                             const std::vector<int>& action) {
  const int S = mdp.num_states();
  // per-time transition matrices under the policy
  std::vector<std::vector<std::vector<double>>> pt(
      mdp.period, std::vector<std::vector<double>>(S, std::vector<double>(S, 0.0)));
  for (int t = 0; t < mdp.period; ++t)
    for (int s = 0; s < S; ++s)
      for (const auto& o : mdp.outcomes(t, s, action[static_cast<size_t>(t) * S + s]))
        pt[t][s][o.next_state] += o.prob;

  std::vector<std::vector<double>> cycle(S, std::vector<double>(S, 0.0));
  for (int s = 0; s < S; ++s) cycle[s][s] = 1.0;
  for (int t = 0; t < mdp.period; ++t) {
    std::vector<std::vector<double>> next(S, std::vector<double>(S, 0.0));
    for (int i = 0; i < S; ++i)
      for (int k = 0; k < S; ++k) {
        if (cycle[i][k] == 0.0) continue;
        for (int j = 0; j < S; ++j) next[i][j] += cycle[i][k] * pt[t][k][j];
      }
    cycle = std::move(next);
  }
  // mu (M - I) = 0 with normalization replacing the last column equation
  std::vector<std::vector<double>> a(S, std::vector<double>(S, 0.0));
  std::vector<double> b(S, 0.0);
  for (int j = 0; j < S; ++j) {
    for (int i = 0; i < S; ++i) a[j][i] = cycle[i][j] - (i == j ? 1.0 : 0.0);
  }
  for (int i = 0; i < S; ++i) a[S - 1][i] = 1.0;
  b[S - 1] = 1.0;
  const std::vector<double> mu0 = solve_dense_system(a, b);

  std::vector<std::vector<double>> mu(mdp.period, std::vector<double>(S, 0.0));
  mu[0] = mu0;
  for (int t = 0; t + 1 < mdp.period; ++t)
    for (int s = 0; s < S; ++s) {
      if (mu[t][s] == 0.0) continue;
      for (int j = 0; j < S; ++j) mu[t + 1][j] += mu[t][s] * pt[t][s][j];
    }
  return mu;
}

inline double policy_average_cost(const CyclicMdp& mdp, const std::vector<int>& action) {
  const auto mu = stationary_marginals(mdp, action);
  double acc = 0.0;
  for (int t = 0; t < mdp.period; ++t)
    for (int s = 0; s < mdp.num_states(); ++s)
      acc += mu[t][s] * mdp.stage_cost(t, s, action[static_cast<size_t>(t) * mdp.num_states() + s]);
  return acc / mdp.period;
}

// Visits every deterministic policy (odometer over the admissible sets).
template <typename F>
void for_each_policy(const CyclicMdp& mdp, F&& f) {
  const int S = mdp.num_states();
  const size_t cells = static_cast<size_t>(mdp.period) * S;
  std::vector<size_t> digit(cells, 0);
  std::vector<int> action(cells);
  for (;;) {
    for (size_t c = 0; c < cells; ++c) action[c] = mdp.admissible[c % S][digit[c]];
    f(action);
    size_t c = 0;
    while (c < cells) {
      if (++digit[c] < mdp.admissible[c % S].size()) break;
      digit[c] = 0;
      ++c;
    }
    if (c == cells) break;
  }
}

inline double best_policy_cost(const CyclicMdp& mdp) {
  double best = std::numeric_limits<double>::infinity();
  for_each_policy(mdp, [&](const std::vector<int>& action) {
    best = std::min(best, policy_average_cost(mdp, action));
  });
  return best;
}

// ---------------------------------------------------------------------------
// brute-force mean-risk reference: enumerate deterministic policies and all
// cost-atom thresholds, evaluating the mean-risk objective term by term

namespace bruteforce {

inline double mean_risk_objective(const CyclicMdp& mdp,
                                  const std::vector<std::vector<double>>& mu,
                                  const std::vector<int>& action, double eta, double beta,
                                  double lambda) {
  double acc = 0.0;
  for (int t = 0; t < mdp.period; ++t)
    for (int s = 0; s < mdp.num_states(); ++s) {
      const double x = mu[t][s];
      if (x == 0.0) continue;
      const double c = mdp.stage_cost(t, s, action[static_cast<size_t>(t) * mdp.num_states() + s]);
      const double over = c > eta ? c - eta : 0.0;
      const double under = eta > c ? eta - c : 0.0;
      acc += x * (c + lambda * (beta * over + (1.0 - beta) * under));
    }
  return acc / mdp.period;
}

inline std::vector<double> cost_atoms(const CyclicMdp& mdp) {
  std::vector<double> atoms;
  for (int t = 0; t < mdp.period; ++t)
    for (int s = 0; s < mdp.num_states(); ++s)
      for (int a : mdp.admissible[s]) atoms.push_back(mdp.stage_cost(t, s, a));
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  return atoms;
}

inline double best_mean_risk(const CyclicMdp& mdp, double beta, double lambda) {
  const auto atoms = cost_atoms(mdp);
  double best = std::numeric_limits<double>::infinity();
  for_each_policy(mdp, [&](const std::vector<int>& action) {
    const auto mu = stationary_marginals(mdp, action);
    for (double eta : atoms)
      best = std::min(best, mean_risk_objective(mdp, mu, action, eta, beta, lambda));
  });
  return best;
}

}  // namespace bruteforce

}  // namespace testsupport
