#pragma once

#include <string>
#include <vector>

#include "cyclomdp/cvar.hpp"
#include "cyclomdp/errors.hpp"
#include "cyclomdp/occupancy.hpp"

namespace cyclomdp {

enum class ReliabilityVariant { AvgCurtailment, CurtailProbability, Consecutive };
enum class ReliabilityHorizon { Daily, Annual };

/// One reliability constraint block. `bound` is tau (power units) for the
/// average-curtailment variant and a probability for the other two.
struct ReliabilitySpec {
  ReliabilityVariant variant = ReliabilityVariant::AvgCurtailment;
  ReliabilityHorizon horizon = ReliabilityHorizon::Annual;
  double bound = 0.0;
  int consecutive_n = 1;

  std::string name() const {
    std::string n;
    switch (variant) {
      case ReliabilityVariant::AvgCurtailment: n = "avg_curtailment"; break;
      case ReliabilityVariant::CurtailProbability: n = "curtail_probability"; break;
      case ReliabilityVariant::Consecutive:
        n = "consecutive_n" + std::to_string(consecutive_n);
        break;
    }
    n += horizon == ReliabilityHorizon::Daily ? "_daily" : "_annual";
    return n;
  }

  void validate() const {
    if (variant == ReliabilityVariant::AvgCurtailment) {
      if (!(bound >= 0.0)) throw Error("tau must be non-negative");
    } else {
      if (!(bound >= 0.0 && bound <= 1.0)) throw Error("probability bound must lie in [0,1]");
    }
    if (variant == ReliabilityVariant::Consecutive) {
      if (consecutive_n < 1) throw Error("consecutive cap must be >= 1");
      if (horizon == ReliabilityHorizon::Daily)
        throw Error("the consecutive variant defines an annual constraint only");
    }
  }
};

namespace detail {

inline std::vector<std::pair<int, int>> horizon_windows(const CyclicMdp& mdp,
                                                        ReliabilityHorizon horizon) {
  if (horizon == ReliabilityHorizon::Annual) return {{0, mdp.period}};
  if (mdp.period % 24 != 0)
    throw Error("daily constraints need a period divisible by 24, got " +
                std::to_string(mdp.period));
  std::vector<std::pair<int, int>> days;
  for (int t = 0; t < mdp.period; t += 24) days.push_back({t, t + 24});
  return days;
}

}  // namespace detail

/// Variation 1 rows: sum over the window of expected curtailment mass,
///   sum_{t in window} sum_{s,a} CD_{ts} x_{tsa} <= tau.
inline LpProblem add_avg_curtailment_constraints(LpProblem lp, const CyclicMdp& mdp,
                                                 const OccupancyLayout& layout,
                                                 const ReliabilitySpec& spec) {
  spec.validate();
  if (spec.variant != ReliabilityVariant::AvgCurtailment) throw Error("wrong spec variant");
  for (const auto& [t0, t1] : detail::horizon_windows(mdp, spec.horizon)) {
    const int row = lp.le_rows();
    lp.le_rhs.push_back(spec.bound);
    for (int col = 0; col < layout.columns(); ++col) {
      const auto [t, s, a] = layout.tsa_of[col];
      if (t < t0 || t >= t1) continue;
      const double cd = mdp.curtailment(t, s);
      if (cd != 0.0) lp.add_le_entry(row, col, cd);
    }
  }
  return lp;
}

/// Variation 2 rows: average occupancy of curtailing-state copies,
///   (1/window) sum_{t in window} sum_{s: e=1, a} x_{tsa} <= P.
/// The counter augmentation carries the same flag (z >= 1 iff the landing
/// state curtails), so either augmentation serves.
inline LpProblem add_curtail_probability_constraints(LpProblem lp, const CyclicMdp& mdp,
                                                     const OccupancyLayout& layout,
                                                     const ReliabilitySpec& spec) {
  spec.validate();
  if (spec.variant != ReliabilityVariant::CurtailProbability) throw Error("wrong spec variant");
  if (mdp.augmentation == Augmentation::None)
    throw MissingAugmentation("curtail-probability constraints need the curtail-flag states");
  for (const auto& [t0, t1] : detail::horizon_windows(mdp, spec.horizon)) {
    const int row = lp.le_rows();
    lp.le_rhs.push_back(spec.bound);
    const double weight = 1.0 / (t1 - t0);
    for (int col = 0; col < layout.columns(); ++col) {
      const auto [t, s, a] = layout.tsa_of[col];
      if (t < t0 || t >= t1) continue;
      if (mdp.state_aug[s] >= 1) lp.add_le_entry(row, col, weight);
    }
  }
  return lp;
}

/// Variation 3 row: average occupancy of states with z >= n,
///   (1/|T|) sum_t sum_{s: z>=n, a} x_{tsa} <= P.
inline LpProblem add_consecutive_constraints(LpProblem lp, const CyclicMdp& mdp,
                                             const OccupancyLayout& layout,
                                             const ReliabilitySpec& spec) {
  spec.validate();
  if (spec.variant != ReliabilityVariant::Consecutive) throw Error("wrong spec variant");
  if (mdp.augmentation != Augmentation::ConsecutiveCounter)
    throw MissingAugmentation("consecutive constraints need the counter-augmented states");
  if (mdp.counter_cap < spec.consecutive_n)
    throw MissingAugmentation("counter cap " + std::to_string(mdp.counter_cap) +
                              " below requested n " + std::to_string(spec.consecutive_n));
  const int row = lp.le_rows();
  lp.le_rhs.push_back(spec.bound);
  const double weight = 1.0 / mdp.period;
  for (int col = 0; col < layout.columns(); ++col) {
    const auto [t, s, a] = layout.tsa_of[col];
    if (mdp.state_aug[s] >= spec.consecutive_n) lp.add_le_entry(row, col, weight);
  }
  return lp;
}

inline LpProblem add_reliability_constraints(LpProblem lp, const CyclicMdp& mdp,
                                             const OccupancyLayout& layout,
                                             const ReliabilitySpec& spec) {
  switch (spec.variant) {
    case ReliabilityVariant::AvgCurtailment:
      return add_avg_curtailment_constraints(std::move(lp), mdp, layout, spec);
    case ReliabilityVariant::CurtailProbability:
      return add_curtail_probability_constraints(std::move(lp), mdp, layout, spec);
    case ReliabilityVariant::Consecutive:
      return add_consecutive_constraints(std::move(lp), mdp, layout, spec);
  }
  throw Error("unknown reliability variant");
}

/// Raised when the composed program has no feasible occupancy; names the
/// spec(s) whose removal restores feasibility.
struct ReliabilityInfeasible : Error {
  std::vector<std::string> binding;
  explicit ReliabilityInfeasible(const std::string& what, std::vector<std::string> specs)
      : Error(what), binding(std::move(specs)) {}
};

struct ConstraintAuditRow {
  std::string name;
  double lhs = 0.0;
  double bound = 0.0;
  double slack = 0.0;
};

struct ReliabilitySolution {
  OccupancyMeasure occupancy;
  double objective = 0.0;
  Policy policy;
  bool vertex = false;
  std::vector<ConstraintAuditRow> audit;
};

inline ReliabilitySolution solve_with_reliability(const CyclicMdp& mdp,
                                                  const std::vector<ReliabilitySpec>& specs) {
  const OccupancyLayout layout = occupancy_layout(mdp);
  LpProblem lp = build_mdplp(mdp, layout);

  std::vector<std::pair<std::string, int>> row_names;  // name, first le row of the spec
  for (const auto& spec : specs) {
    const int first_row = lp.le_rows();
    lp = add_reliability_constraints(std::move(lp), mdp, layout, spec);
    row_names.push_back({spec.name(), first_row});
  }

  LpSolution sol = solve_lp(lp);
  if (sol.status == LpStatus::Infeasible) {
    // leave-one-out probing: a spec is binding if dropping it restores
    // feasibility
    std::vector<std::string> binding;
    for (size_t k = 0; k < specs.size(); ++k) {
      LpProblem probe = build_mdplp(mdp, layout);
      for (size_t j = 0; j < specs.size(); ++j) {
        if (j == k) continue;
        probe = add_reliability_constraints(std::move(probe), mdp, layout, specs[j]);
      }
      if (solve_lp(probe).status == LpStatus::Optimal) binding.push_back(specs[k].name());
    }
    std::string msg = "reliability program infeasible";
    if (!binding.empty()) {
      msg += "; binding spec(s):";
      for (const auto& b : binding) msg += " " + b;
    }
    throw ReliabilityInfeasible(msg, std::move(binding));
  }
  if (sol.status != LpStatus::Optimal)
    throw Error(std::string("reliability LP failed: ") + to_string(sol.status));

  ReliabilitySolution out;
  out.occupancy = unpack_occupancy(mdp, layout, sol.x);
  out.objective = sol.objective;
  out.vertex = sol.vertex;
  out.policy = extract_policy(mdp, out.occupancy);

  // audit every added row against the returned point
  std::vector<double> lhs(lp.le_rows(), 0.0);
  for (const auto& e : lp.le) lhs[e.row] += e.value * sol.x[e.col];
  for (size_t k = 0; k < row_names.size(); ++k) {
    const int first = row_names[k].second;
    const int last = k + 1 < row_names.size() ? row_names[k + 1].second : lp.le_rows();
    for (int row = first; row < last; ++row) {
      ConstraintAuditRow audit;
      audit.name = row_names[k].first;
      if (last - first > 1) audit.name += "_w" + std::to_string(row - first + 1);
      audit.lhs = lhs[row];
      audit.bound = lp.le_rhs[row];
      audit.slack = audit.bound - audit.lhs;
      out.audit.push_back(audit);
    }
  }
  return out;
}

}  // namespace cyclomdp
