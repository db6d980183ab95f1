#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "cyclomdp/errors.hpp"
#include "cyclomdp/lp.hpp"
#include "cyclomdp/mdp.hpp"

namespace cyclomdp {

/// Per-time distribution over state-action pairs, x_{tsa}.
struct OccupancyMeasure {
  int period = 0;
  int states = 0;
  int actions = 0;
  std::vector<double> x;  // dense (t*S+s)*A+a, zero where inadmissible

  double at(int t, int s, int a) const {
    return x[(static_cast<size_t>(t) * states + s) * actions + a];
  }
  double mass(int t, int s) const {
    double acc = 0.0;
    for (int a = 0; a < actions; ++a) acc += at(t, s, a);
    return acc;
  }
};

/// Deterministic column order of the occupancy LP: (t, s, admissible a)
/// lexicographic. Rows: the |T| normalization rows first, then the balance
/// rows (t, s) lexicographic.
struct OccupancyLayout {
  int period = 0;
  int states = 0;
  int actions = 0;
  std::vector<int> col_of;  // (t*S+s)*A+a -> column or -1
  std::vector<std::tuple<int, int, int>> tsa_of;

  int columns() const { return static_cast<int>(tsa_of.size()); }
  int normalization_row(int t) const { return t; }
  int balance_row(int t, int s) const { return period + t * states + s; }
};

inline OccupancyLayout occupancy_layout(const CyclicMdp& mdp) {
  OccupancyLayout layout;
  layout.period = mdp.period;
  layout.states = mdp.num_states();
  layout.actions = mdp.num_actions();
  layout.col_of.assign(static_cast<size_t>(mdp.period) * layout.states * layout.actions, -1);
  for (int t = 0; t < mdp.period; ++t)
    for (int s = 0; s < layout.states; ++s)
      for (int a : mdp.admissible[s]) {
        layout.col_of[mdp.tsa_index(t, s, a)] = layout.columns();
        layout.tsa_of.emplace_back(t, s, a);
      }
  return layout;
}

/// The average-cost occupancy LP: minimize sum c_{tsa} x_{tsa} / |T| over the
/// feasible set (per-time normalization plus cyclic balance).
inline LpProblem build_mdplp(const CyclicMdp& mdp, const OccupancyLayout& layout) {
  auto lp = LpProblem::with_cols(layout.columns());
  lp.eq_rhs.assign(mdp.period + static_cast<size_t>(mdp.period) * layout.states, 0.0);
  for (int t = 0; t < mdp.period; ++t) lp.eq_rhs[layout.normalization_row(t)] = 1.0;

  for (int col = 0; col < layout.columns(); ++col) {
    const auto [t, s, a] = layout.tsa_of[col];
    lp.objective[col] = mdp.stage_cost(t, s, a) / mdp.period;
    lp.add_eq_entry(layout.normalization_row(t), col, 1.0);
    // outgoing mass of (t, s, a) feeds the balance rows of time t
    for (const auto& o : mdp.outcomes(t, s, a))
      lp.add_eq_entry(layout.balance_row(t, o.next_state), col, -o.prob);
    // incoming side: x_{t', s, a} appears with +1 in balance row (t'-1, s)
    const int t_prev = (t + mdp.period - 1) % mdp.period;
    lp.add_eq_entry(layout.balance_row(t_prev, s), col, 1.0);
  }
  return lp;
}

inline LpProblem build_mdplp(const CyclicMdp& mdp) { return build_mdplp(mdp, occupancy_layout(mdp)); }

inline OccupancyMeasure unpack_occupancy(const CyclicMdp& mdp, const OccupancyLayout& layout,
                                         const std::vector<double>& x) {
  OccupancyMeasure occ;
  occ.period = layout.period;
  occ.states = layout.states;
  occ.actions = layout.actions;
  occ.x.assign(static_cast<size_t>(layout.period) * layout.states * layout.actions, 0.0);
  for (int col = 0; col < layout.columns(); ++col) {
    const auto [t, s, a] = layout.tsa_of[col];
    occ.x[mdp.tsa_index(t, s, a)] = x[col];
  }
  return occ;
}

struct RiskNeutralSolution {
  OccupancyMeasure occupancy;
  double objective = 0.0;
  bool vertex = false;
  LpSolution lp;
};

inline RiskNeutralSolution solve_risk_neutral(const CyclicMdp& mdp) {
  const OccupancyLayout layout = occupancy_layout(mdp);
  const LpProblem lp = build_mdplp(mdp, layout);
  LpSolution sol = solve_lp(lp);
  if (sol.status == LpStatus::Infeasible)
    throw Error("occupancy LP infeasible: the kernel is not a proper stochastic model");
  if (sol.status != LpStatus::Optimal)
    throw Error(std::string("occupancy LP failed: ") + to_string(sol.status));
  RiskNeutralSolution out;
  out.occupancy = unpack_occupancy(mdp, layout, sol.x);
  out.objective = sol.objective;
  out.vertex = sol.vertex;
  out.lp = std::move(sol);
  return out;
}

/// Operating policy extracted from an occupancy measure. Deterministic when
/// every visited (t, s) puts at least 1 - 1e-6 of its mass on one action;
/// otherwise the per-state action distributions are kept as-is.
struct Policy {
  enum class Kind { Deterministic, Randomized };
  Kind kind = Kind::Deterministic;
  int period = 0;
  int states = 0;
  int actions = 0;
  std::vector<int> action;                        // per (t, s)
  std::vector<std::vector<double>> distribution;  // per (t, s); empty if deterministic
  std::vector<uint8_t> visited;                   // per (t, s)

  int action_at(int t, int s) const { return action[static_cast<size_t>(t) * states + s]; }
  bool visited_at(int t, int s) const { return visited[static_cast<size_t>(t) * states + s] != 0; }
};

inline constexpr double kVisitedMassThreshold = 1e-9;
inline constexpr double kDeterministicShare = 1.0 - 1e-6;

inline Policy extract_policy(const CyclicMdp& mdp, const OccupancyMeasure& occ) {
  Policy policy;
  policy.period = occ.period;
  policy.states = occ.states;
  policy.actions = occ.actions;
  const size_t cells = static_cast<size_t>(occ.period) * occ.states;
  policy.action.assign(cells, 0);
  policy.visited.assign(cells, 0);
  bool deterministic = true;

  for (int t = 0; t < occ.period; ++t)
    for (int s = 0; s < occ.states; ++s) {
      const size_t cell = static_cast<size_t>(t) * occ.states + s;
      const double mass = occ.mass(t, s);
      if (mass > kVisitedMassThreshold) {
        policy.visited[cell] = 1;
        int best = mdp.admissible[s].front();
        for (int a : mdp.admissible[s])
          if (occ.at(t, s, a) > occ.at(t, s, best)) best = a;
        policy.action[cell] = best;
        if (occ.at(t, s, best) < kDeterministicShare * mass) deterministic = false;
      } else {
        // unvisited: cheapest admissible stage cost, lowest action on ties
        int best = mdp.admissible[s].front();
        for (int a : mdp.admissible[s])
          if (mdp.stage_cost(t, s, a) < mdp.stage_cost(t, s, best)) best = a;
        policy.action[cell] = best;
      }
    }

  if (!deterministic) {
    policy.kind = Policy::Kind::Randomized;
    policy.distribution.assign(cells, {});
    for (int t = 0; t < occ.period; ++t)
      for (int s = 0; s < occ.states; ++s) {
        const size_t cell = static_cast<size_t>(t) * occ.states + s;
        std::vector<double> dist(occ.actions, 0.0);
        const double mass = occ.mass(t, s);
        if (policy.visited[cell]) {
          for (int a = 0; a < occ.actions; ++a) dist[a] = occ.at(t, s, a) / mass;
        } else {
          dist[policy.action[cell]] = 1.0;
        }
        policy.distribution[cell] = std::move(dist);
      }
  }
  return policy;
}

}  // namespace cyclomdp
