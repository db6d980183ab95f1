#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "cyclomdp/errors.hpp"
#include "cyclomdp/occupancy.hpp"

namespace cyclomdp {

/// CVaR level and mean-risk weight. The default weight 1/(1-beta) is the one
/// the exact-search theory (atom property, early stop) is proved for;
/// overriding it flags the scan as heuristic and disables the early stop.
struct RiskConfig {
  double beta = 0.9;
  double lambda = 10.0;
  bool lambda_overridden = false;

  static RiskConfig with_beta(double beta) { return {beta, 1.0 / (1.0 - beta), false}; }
  static RiskConfig with_lambda(double beta, double lambda) { return {beta, lambda, true}; }

  void validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw Error("beta must lie in (0,1)");
    if (!std::isfinite(lambda) || lambda <= 0.0) throw Error("lambda must be positive and finite");
  }
};

struct CvarValue {
  double var = 0.0;   // eta, the beta-quantile
  double cvar = 0.0;  // mean of the beta-tail
};

/// Eq.-style LP route: min eta + 1/(1-beta) sum p_i u_i, u_i >= c_i - eta.
inline double cvar_of_distribution_lp(const std::vector<double>& values,
                                      const std::vector<double>& probs, double beta) {
  const int n = static_cast<int>(values.size());
  auto lp = LpProblem::with_cols(1 + n);
  lp.set_free(0);
  lp.objective[0] = 1.0;
  for (int i = 0; i < n; ++i) {
    lp.objective[1 + i] = probs[i] / (1.0 - beta);
    lp.add_le_entry(i, 0, -1.0);
    lp.add_le_entry(i, 1 + i, -1.0);
    lp.le_rhs.push_back(-values[i]);
  }
  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::Optimal)
    throw Error(std::string("cvar LP failed: ") + to_string(sol.status));
  return sol.objective;
}

/// VaR/CVaR of a finite distribution. The direct route sorts the atoms and
/// takes the beta-tail mean with a fractional atom at the quantile; in
/// self-check mode the LP route must agree to 1e-8.
inline CvarValue cvar_of_distribution(const std::vector<double>& values,
                                      const std::vector<double>& probs, double beta,
                                      bool self_check = true) {
  if (values.size() != probs.size() || values.empty())
    throw BadDistribution("atom/probability size mismatch");
  double total = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0) || !std::isfinite(values[i]))
      throw BadDistribution("negative probability or non-finite atom");
    total += probs[i];
  }
  if (std::fabs(total - 1.0) > 1e-10) throw BadDistribution("probabilities do not sum to one");
  if (!(beta > 0.0 && beta < 1.0)) throw Error("beta must lie in (0,1)");

  std::vector<size_t> order(values.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });

  CvarValue out;
  double cum = 0.0;
  out.var = values[order.back()];
  for (size_t k = 0; k < order.size(); ++k) {
    cum += probs[order[k]];
    if (cum >= beta - 1e-12) {
      out.var = values[order[k]];
      break;
    }
  }
  double tail = 0.0;
  for (size_t i = 0; i < values.size(); ++i) tail += probs[i] * std::max(values[i] - out.var, 0.0);
  out.cvar = out.var + tail / (1.0 - beta);

  if (self_check) {
    const double lp = cvar_of_distribution_lp(values, probs, beta);
    if (std::fabs(lp - out.cvar) > 1e-8 * std::max(1.0, std::fabs(out.cvar)))
      throw Error("cvar self-check failed: direct " + std::to_string(out.cvar) + " vs lp " +
                  std::to_string(lp));
  }
  return out;
}

/// Fixed-eta subproblem: the feasible set of build_mdplp with the mean-risk
/// objective (1/|T|) [c + lambda (beta (c-eta)^+ + (1-beta) (eta-c)^+)].
inline LpProblem build_sub_mdpbl(const CyclicMdp& mdp, const OccupancyLayout& layout,
                                 const RiskConfig& risk, double eta) {
  if (!std::isfinite(eta)) throw Error("eta must be finite");
  LpProblem lp = build_mdplp(mdp, layout);
  for (int col = 0; col < layout.columns(); ++col) {
    const auto [t, s, a] = layout.tsa_of[col];
    const double c = mdp.stage_cost(t, s, a);
    const double penalty = risk.beta * std::max(c - eta, 0.0) +
                           (1.0 - risk.beta) * std::max(eta - c, 0.0);
    lp.objective[col] = (c + risk.lambda * penalty) / mdp.period;
  }
  return lp;
}

inline LpProblem build_sub_mdpbl(const CyclicMdp& mdp, const RiskConfig& risk, double eta) {
  return build_sub_mdpbl(mdp, occupancy_layout(mdp), risk, eta);
}

/// The equivalent threshold form: eta + (lambda/|T|) sum x (c - eta)^+.
inline double evaluate_mdpeta(const CyclicMdp& mdp, const OccupancyMeasure& x, double eta,
                              const RiskConfig& risk) {
  double acc = 0.0;
  for (int t = 0; t < mdp.period; ++t)
    for (int s = 0; s < mdp.num_states(); ++s)
      for (int a : mdp.admissible[s])
        acc += x.at(t, s, a) * std::max(mdp.stage_cost(t, s, a) - eta, 0.0);
  return eta + risk.lambda * acc / mdp.period;
}

/// Mean-risk objective of Eq.-(8) form evaluated term by term.
inline double evaluate_mean_risk(const CyclicMdp& mdp, const OccupancyMeasure& x, double eta,
                                 const RiskConfig& risk) {
  double acc = 0.0;
  for (int t = 0; t < mdp.period; ++t)
    for (int s = 0; s < mdp.num_states(); ++s)
      for (int a : mdp.admissible[s]) {
        const double c = mdp.stage_cost(t, s, a);
        const double penalty = risk.beta * std::max(c - eta, 0.0) +
                               (1.0 - risk.beta) * std::max(eta - c, 0.0);
        acc += x.at(t, s, a) * (c + risk.lambda * penalty);
      }
  return acc / mdp.period;
}

/// Ascending unique stage-cost atoms over admissible (t, s, a).
inline std::vector<double> eta_candidates(const CyclicMdp& mdp) {
  std::vector<double> costs;
  double scale = 0.0;
  for (int t = 0; t < mdp.period; ++t)
    for (int s = 0; s < mdp.num_states(); ++s)
      for (int a : mdp.admissible[s]) {
        costs.push_back(mdp.stage_cost(t, s, a));
        scale = std::max(scale, std::fabs(costs.back()));
      }
  std::sort(costs.begin(), costs.end());
  const double tol = 1e-12 * scale;
  std::vector<double> unique;
  for (double c : costs)
    if (unique.empty() || c - unique.back() > tol) unique.push_back(c);
  return unique;
}

struct EtaScanEntry {
  double eta = 0.0;
  double objective = 0.0;
  LpStatus status = LpStatus::NumericalBreakdown;
  bool after_stop = false;  // scanned past the break point (diagnostic mode)
  double wall_seconds = 0.0;
};

struct EtaScanResult {
  double eta_star = 0.0;
  double objective = 0.0;
  OccupancyMeasure occupancy;
  bool vertex = false;
  std::vector<EtaScanEntry> log;
  int stop_index = -1;  // first candidate meeting the linear-growth identity
  long pruned = 0;      // candidates never solved
  bool heuristic = false;
};

struct CvarSolveOptions {
  bool full_scan = false;   // diagnostic: keep scanning past the break
  bool warm_start = true;   // reuse the previous candidate's basis
  double stop_tol = 1e-7;   // |f - eta| <= stop_tol * max(1, |eta|)
};

/// Exact search over the cost atoms: solve the fixed-eta subproblem at every
/// candidate in ascending order, record the minimum, and stop at (inclusive)
/// the first candidate whose optimum equals eta, after which the optimum
/// grows linearly. With an overridden lambda the identity is not available
/// and the whole candidate list is scanned.
inline EtaScanResult solve_cvar(const CyclicMdp& mdp, const RiskConfig& risk,
                                const CvarSolveOptions& options = {}) {
  risk.validate();
  const OccupancyLayout layout = occupancy_layout(mdp);
  const std::vector<double> candidates = eta_candidates(mdp);

  EtaScanResult result;
  result.heuristic = risk.lambda_overridden;
  const bool early_stop_available = !risk.lambda_overridden;

  LpProblem lp = build_mdplp(mdp, layout);
  LpBasis warm;
  double best = kInfinity;
  int best_index = -1;
  bool stopped = false;

  for (size_t i = 0; i < candidates.size(); ++i) {
    const double eta = candidates[i];
    for (int col = 0; col < layout.columns(); ++col) {
      const auto [t, s, a] = layout.tsa_of[col];
      const double c = mdp.stage_cost(t, s, a);
      const double penalty = risk.beta * std::max(c - eta, 0.0) +
                             (1.0 - risk.beta) * std::max(eta - c, 0.0);
      lp.objective[col] = (c + risk.lambda * penalty) / mdp.period;
    }
    LpOptions lp_options;
    if (options.warm_start && !warm.empty()) lp_options.warm_start = &warm;
    const auto t0 = std::chrono::steady_clock::now();
    LpSolution sol = solve_lp(lp, lp_options);
    const auto t1 = std::chrono::steady_clock::now();

    EtaScanEntry entry;
    entry.eta = eta;
    entry.status = sol.status;
    entry.after_stop = stopped;
    entry.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    if (sol.status != LpStatus::Optimal) {
      // a candidate lost to numerical trouble does not abort the scan
      result.log.push_back(entry);
      warm = LpBasis{};
      continue;
    }
    entry.objective = sol.objective;
    result.log.push_back(entry);
    warm = sol.basis;

    if (sol.objective < best) {
      best = sol.objective;
      best_index = static_cast<int>(i);
    }
    if (early_stop_available && !stopped &&
        std::fabs(sol.objective - eta) <= options.stop_tol * std::max(1.0, std::fabs(eta))) {
      result.stop_index = static_cast<int>(result.log.size()) - 1;
      stopped = true;
      if (!options.full_scan) break;
    }
  }
  if (best_index < 0) throw Error("every eta candidate failed to solve");
  result.pruned = static_cast<long>(candidates.size()) - static_cast<long>(result.log.size());
  result.eta_star = candidates[best_index];
  result.objective = best;

  // the reported occupancy comes from a cold re-solve at the winner, so the
  // returned point does not depend on the warm-start path
  const LpProblem final_lp = build_sub_mdpbl(mdp, layout, risk, result.eta_star);
  LpSolution final_sol = solve_lp(final_lp);
  if (final_sol.status != LpStatus::Optimal)
    throw Error(std::string("final subproblem re-solve failed: ") + to_string(final_sol.status));
  if (std::fabs(final_sol.objective - best) > 1e-9 * std::max(1.0, std::fabs(best)))
    throw Error("cold re-solve objective drifted from the scan value");
  result.occupancy = unpack_occupancy(mdp, layout, final_sol.x);
  result.vertex = final_sol.vertex;

  if (!risk.lambda_overridden) {
    // threshold-form cross-check of the winning subproblem value
    const double check = evaluate_mdpeta(mdp, result.occupancy, result.eta_star, risk);
    if (std::fabs(check - result.objective) > 1e-8 * std::max(1.0, std::fabs(result.objective)))
      throw Error("threshold-form cross-check failed");
  }
  return result;
}

}  // namespace cyclomdp
