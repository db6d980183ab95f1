#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cyclomdp/errors.hpp"
#include "cyclomdp/quantile.hpp"
#include "cyclomdp/regime.hpp"

namespace cyclomdp {

enum class Augmentation { None, CurtailFlag, ConsecutiveCounter };

/// Finite cyclostationary decision process over states s = (level, regime)
/// plus an optional reliability component (curtail flag e or saturating
/// consecutive-curtailment counter z). Time wraps: transitions from the last
/// period land in the first.
struct CyclicMdp {
  int period = 0;
  int regimes = 0;
  Augmentation augmentation = Augmentation::None;
  int counter_cap = 0;  // z in 0..counter_cap (1 for the curtail flag)

  std::vector<double> level_values;   // physical value per level index
  std::vector<double> action_values;  // physical value per action index

  // state decode tables
  std::vector<int> state_level;   // level index
  std::vector<int> state_regime;  // 1-based regime
  std::vector<int> state_aug;     // e or z; 0 when unaugmented

  std::vector<std::vector<int>> admissible;  // action indices per state

  struct Outcome {
    int next_state;
    double prob;
  };
  std::vector<int> kernel_start;  // size period*S*A + 1
  std::vector<Outcome> kernel;
  std::vector<double> cost;     // per (t,s,a); 0 where inadmissible
  std::vector<double> curtail;  // CD per (t,s), power units

  int num_states() const { return static_cast<int>(state_level.size()); }
  int num_levels() const { return static_cast<int>(level_values.size()); }
  int num_actions() const { return static_cast<int>(action_values.size()); }

  size_t tsa_index(int t, int s, int a) const {
    return (static_cast<size_t>(t) * num_states() + s) * num_actions() + a;
  }
  size_t ts_index(int t, int s) const { return static_cast<size_t>(t) * num_states() + s; }

  bool is_admissible(int s, int a) const {
    const auto& acts = admissible[s];
    return std::find(acts.begin(), acts.end(), a) != acts.end();
  }

  struct OutcomeSpan {
    const Outcome* begin_;
    const Outcome* end_;
    const Outcome* begin() const { return begin_; }
    const Outcome* end() const { return end_; }
  };
  OutcomeSpan outcomes(int t, int s, int a) const {
    const size_t k = tsa_index(t, s, a);
    return {kernel.data() + kernel_start[k], kernel.data() + kernel_start[k + 1]};
  }

  double stage_cost(int t, int s, int a) const { return cost[tsa_index(t, s, a)]; }
  double curtailment(int t, int s) const { return curtail[ts_index(t, s)]; }

  int next_time(int t) const { return (t + 1) % period; }

  void validate() const {
    for (int t = 0; t < period; ++t)
      for (int s = 0; s < num_states(); ++s) {
        for (int a : admissible[s]) {
          double sum = 0.0;
          for (const Outcome& o : outcomes(t, s, a)) {
            if (o.next_state < 0 || o.next_state >= num_states())
              throw Error("kernel target out of range");
            if (o.prob < -1e-12) throw Error("negative transition probability");
            sum += o.prob;
          }
          if (std::fabs(sum - 1.0) > 1e-10)
            throw Error("kernel row (t=" + std::to_string(t + 1) + ",s=" + std::to_string(s) +
                        ",a=" + std::to_string(a) + ") sums to " + std::to_string(sum));
          if (!std::isfinite(stage_cost(t, s, a))) throw Error("non-finite stage cost");
        }
        if (curtailment(t, s) < 0.0) throw Error("negative curtailment");
      }
  }
};

/// Incremental kernel assembly with duplicate-target aggregation.
namespace detail {
class KernelBuilder {
 public:
  KernelBuilder(int period, int states, int actions)
      : starts_(static_cast<size_t>(period) * states * actions + 1, 0), accum_(states, 0.0) {}

  template <typename Fill>
  void build(CyclicMdp& mdp, Fill&& fill) {
    mdp.kernel_start.assign(starts_.size(), 0);
    mdp.kernel.clear();
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    std::vector<int> touched;
    for (int t = 0; t < mdp.period; ++t)
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
          const size_t k = mdp.tsa_index(t, s, a);
          mdp.kernel_start[k] = static_cast<int>(mdp.kernel.size());
          if (mdp.is_admissible(s, a)) {
            touched.clear();
            fill(t, s, a, [&](int next, double p) {
              if (p == 0.0) return;
              if (accum_[next] == 0.0) touched.push_back(next);
              accum_[next] += p;
            });
            std::sort(touched.begin(), touched.end());
            for (int next : touched) {
              mdp.kernel.push_back({next, accum_[next]});
              accum_[next] = 0.0;
            }
          }
        }
    mdp.kernel_start.back() = static_cast<int>(mdp.kernel.size());
  }

 private:
  std::vector<int> starts_;
  std::vector<double> accum_;
};
}  // namespace detail

struct ThermalParams {
  double base_ramp = 6.0;     // GW
  double penalty_cost = 3.0;  // cost per MWh curtailed
  double fuel_cost = 0.1;     // cost per MWh generated
  double ramp_rate = 1.5;     // GW per level unit
  int level_min = 0;
  int level_max = 13;
  int action_min = -1;
  int action_max = 1;

  void validate() const {
    if (!(ramp_rate > 0.0)) throw Error("ramp_rate must be positive");
    if (!(penalty_cost >= fuel_cost && fuel_cost >= 0.0))
      throw Error("need penalty_cost >= fuel_cost >= 0");
    if (level_max < level_min || action_max < action_min) throw Error("empty level/action range");
  }

  double generation(double level) const { return (base_ramp + level) * ramp_rate; }
};

/// Thermal backup process: level moves by the ramp action (clamped to the
/// grid by excluding boundary-leaving actions), regime moves by the fitted
/// chain, and the stage cost charges fuel on generation plus the penalty on
/// the expected curtailment E[(w - generation)^+] under the conditional
/// histogram of the current (regime, time) cell.
inline CyclicMdp build_thermal_mdp(const ThermalParams& params, const RegimePartition& partition,
                                   const RegimeChain& chain, const ConditionalHistogram& hist) {
  params.validate();
  if (chain.period != partition.period() || hist.bucketing.period != partition.period())
    throw ModelMismatch("component periods disagree");
  if (chain.regimes != partition.regimes() || hist.regimes != partition.regimes())
    throw ModelMismatch("component regime counts disagree");

  CyclicMdp mdp;
  mdp.period = partition.period();
  mdp.regimes = partition.regimes();
  const int L = params.level_max - params.level_min + 1;
  for (int i = 0; i < L; ++i) mdp.level_values.push_back(params.level_min + i);
  for (int a = params.action_min; a <= params.action_max; ++a) mdp.action_values.push_back(a);

  const int S = L * mdp.regimes;
  mdp.state_level.resize(S);
  mdp.state_regime.resize(S);
  mdp.state_aug.assign(S, 0);
  for (int r = 0; r < mdp.regimes; ++r)
    for (int l = 0; l < L; ++l) {
      const int s = r * L + l;
      mdp.state_level[s] = l;
      mdp.state_regime[s] = r + 1;
    }

  mdp.admissible.resize(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const int l2 = mdp.state_level[s] + static_cast<int>(mdp.action_values[a]);
      if (l2 >= 0 && l2 < L) mdp.admissible[s].push_back(a);
    }
  }

  mdp.curtail.resize(static_cast<size_t>(mdp.period) * S);
  mdp.cost.assign(static_cast<size_t>(mdp.period) * S * mdp.num_actions(), 0.0);
  for (int t = 0; t < mdp.period; ++t)
    for (int s = 0; s < S; ++s) {
      const double gen = params.generation(mdp.level_values[mdp.state_level[s]]);
      const double cd = hist.expected_positive_part(mdp.state_regime[s], t + 1, gen);
      mdp.curtail[mdp.ts_index(t, s)] = cd;
      const double c = gen * params.fuel_cost + cd * params.penalty_cost;
      for (int a : mdp.admissible[s]) mdp.cost[mdp.tsa_index(t, s, a)] = c;
    }

  detail::KernelBuilder kb(mdp.period, S, mdp.num_actions());
  kb.build(mdp, [&](int t, int s, int a, auto&& add) {
    const int l2 = mdp.state_level[s] + static_cast<int>(mdp.action_values[a]);
    const int r = mdp.state_regime[s];
    for (int r2 = 1; r2 <= mdp.regimes; ++r2)
      add((r2 - 1) * L + l2, chain.prob(t + 1, r, r2));
  });
  mdp.validate();
  return mdp;
}

struct ReservoirParams {
  double min_outflow = 500.0;   // MW, run-of-river release
  double capacity = 500.0;      // MW, storage
  double load = 1400.0;         // MW, fixed demand
  double fuel_cost = 50.0;      // cost per MWh of thermal dispatch
  double penalty_cost = 1000.0; // cost per MWh of lost load
  int level_count = 11;         // storage grid over [0, capacity]
  int action_count = 10;        // outflow steps above min_outflow
  double action_unit = 1.0;     // MW per action step

  void validate() const {
    if (!(load >= min_outflow && min_outflow >= 0.0)) throw Error("need load >= min_outflow >= 0");
    if (!(capacity > 0.0)) throw Error("capacity must be positive");
    if (level_count < 2 || action_count < 1) throw Error("empty level/action grid");
  }
};

/// Reservoir process per the release rule
///   released = min(level + inflow, min_outflow + a)
/// with landing-regime inflow: the next regime is drawn first and the inflow
/// from that regime's conditional histogram. Stage cost and curtailment are
/// the inflow expectation of the per-atom cost.
inline CyclicMdp build_reservoir_mdp(const ReservoirParams& params, const RegimeChain& chain,
                                     const ConditionalHistogram& hist) {
  params.validate();
  if (chain.period != hist.bucketing.period) throw ModelMismatch("component periods disagree");
  if (chain.regimes != hist.regimes) throw ModelMismatch("component regime counts disagree");

  CyclicMdp mdp;
  mdp.period = chain.period;
  mdp.regimes = chain.regimes;
  const int L = params.level_count;
  for (int i = 0; i < L; ++i)
    mdp.level_values.push_back(params.capacity * i / (L - 1));
  for (int a = 0; a < params.action_count; ++a) mdp.action_values.push_back(a * params.action_unit);

  const int S = L * mdp.regimes;
  mdp.state_level.resize(S);
  mdp.state_regime.resize(S);
  mdp.state_aug.assign(S, 0);
  mdp.admissible.resize(S);
  for (int r = 0; r < mdp.regimes; ++r)
    for (int l = 0; l < L; ++l) {
      const int s = r * L + l;
      mdp.state_level[s] = l;
      mdp.state_regime[s] = r + 1;
      for (int a = 0; a < mdp.num_actions(); ++a) mdp.admissible[s].push_back(a);
    }

  auto snap = [&](double level) {
    const double idx = level / params.capacity * (L - 1);
    return std::clamp(static_cast<int>(std::lround(idx)), 0, L - 1);
  };

  mdp.curtail.assign(static_cast<size_t>(mdp.period) * S, 0.0);
  mdp.cost.assign(static_cast<size_t>(mdp.period) * S * mdp.num_actions(), 0.0);

  detail::KernelBuilder kb(mdp.period, S, mdp.num_actions());
  kb.build(mdp, [&](int t, int s, int a, auto&& add) {
    const double lv = mdp.level_values[mdp.state_level[s]];
    const double av = mdp.action_values[a];
    const int r = mdp.state_regime[s];
    double cost_acc = 0.0, lost_acc = 0.0;
    for (int r2 = 1; r2 <= mdp.regimes; ++r2) {
      const double pr = chain.prob(t + 1, r, r2);
      const auto& atoms = hist.cell_atoms(r2, t + 1);
      const auto& probs = hist.cell_probs(r2, t + 1);
      for (size_t k = 0; k < atoms.size(); ++k) {
        const double w = atoms[k];
        const double p = pr * probs[k];
        if (p == 0.0) continue;
        const double released = std::min(lv + w, params.min_outflow + av);
        const double lost = std::max(params.min_outflow - released, 0.0);
        const double hydro = std::max(released, params.min_outflow);
        const double thermal = params.load - hydro;
        cost_acc += p * (thermal * params.fuel_cost + lost * params.penalty_cost);
        lost_acc += p * lost;
        const double l2 = std::clamp(lv + w - released, 0.0, params.capacity);
        add((r2 - 1) * L + snap(l2), p);
      }
    }
    mdp.curtail[mdp.ts_index(t, s)] = lost_acc;  // action-independent: lost load
                                                 // only occurs when level+inflow
                                                 // < min_outflow
    mdp.cost[mdp.tsa_index(t, s, a)] = cost_acc;
  });
  mdp.validate();
  return mdp;
}

namespace detail {

// Drop states that cannot receive probability mass at any time: iteratively
// remove (t, s) pairs with no admissible incoming transition from a kept pair.
inline std::vector<uint8_t> flow_supportable(const CyclicMdp& mdp) {
  const int S = mdp.num_states();
  std::vector<uint8_t> keep(static_cast<size_t>(mdp.period) * S, 1);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<uint8_t> incoming(static_cast<size_t>(mdp.period) * S, 0);
    for (int t = 0; t < mdp.period; ++t) {
      const int t2 = mdp.next_time(t);
      for (int s = 0; s < S; ++s) {
        if (!keep[mdp.ts_index(t, s)]) continue;
        for (int a : mdp.admissible[s])
          for (const auto& o : mdp.outcomes(t, s, a))
            if (o.prob > 0.0) incoming[mdp.ts_index(t2, o.next_state)] = 1;
      }
    }
    for (size_t k = 0; k < keep.size(); ++k) {
      if (keep[k] && !incoming[k]) {
        keep[k] = 0;
        changed = true;
      }
    }
  }
  return keep;
}

}  // namespace detail

/// Shared implementation of the two state augmentations: the new component
/// value at the landing state is new_aug(z, curtails_at_landing).
template <typename NextAug>
inline CyclicMdp augment_with(const CyclicMdp& base, Augmentation tag, int cap, NextAug&& next_aug) {
  if (base.augmentation != Augmentation::None) throw Error("mdp is already augmented");
  const int S0 = base.num_states();
  const int copies = cap + 1;

  CyclicMdp full;
  full.period = base.period;
  full.regimes = base.regimes;
  full.augmentation = tag;
  full.counter_cap = cap;
  full.level_values = base.level_values;
  full.action_values = base.action_values;
  for (int z = 0; z < copies; ++z)
    for (int s = 0; s < S0; ++s) {
      full.state_level.push_back(base.state_level[s]);
      full.state_regime.push_back(base.state_regime[s]);
      full.state_aug.push_back(z);
      full.admissible.push_back(base.admissible[s]);
    }
  full.curtail.resize(static_cast<size_t>(full.period) * S0 * copies);
  full.cost.assign(static_cast<size_t>(full.period) * S0 * copies * full.num_actions(), 0.0);
  for (int t = 0; t < full.period; ++t)
    for (int z = 0; z < copies; ++z)
      for (int s = 0; s < S0; ++s) {
        full.curtail[full.ts_index(t, z * S0 + s)] = base.curtail[base.ts_index(t, s)];
        for (int a : base.admissible[s])
          full.cost[full.tsa_index(t, z * S0 + s, a)] = base.cost[base.tsa_index(t, s, a)];
      }
  detail::KernelBuilder kb(full.period, S0 * copies, full.num_actions());
  kb.build(full, [&](int t, int saug, int a, auto&& add) {
    const int s = saug % S0;
    const int z = saug / S0;
    const int t2 = base.next_time(t);
    for (const auto& o : base.outcomes(t, s, a)) {
      const bool curtails = base.curtail[base.ts_index(t2, o.next_state)] > 0.0;
      add(next_aug(z, curtails) * S0 + o.next_state, o.prob);
    }
  });

  // prune augmented copies that can never carry mass
  const std::vector<uint8_t> keep_ts = detail::flow_supportable(full);
  std::vector<uint8_t> keep_state(full.num_states(), 0);
  for (int t = 0; t < full.period; ++t)
    for (int s = 0; s < full.num_states(); ++s)
      if (keep_ts[full.ts_index(t, s)]) keep_state[s] = 1;
  // base copies must survive somewhere; all-zero would signal a builder bug
  std::vector<int> remap(full.num_states(), -1);
  int kept = 0;
  for (int s = 0; s < full.num_states(); ++s)
    if (keep_state[s]) remap[s] = kept++;
  if (kept == 0) throw Error("augmentation pruned every state");

  CyclicMdp out;
  out.period = full.period;
  out.regimes = full.regimes;
  out.augmentation = tag;
  out.counter_cap = cap;
  out.level_values = full.level_values;
  out.action_values = full.action_values;
  for (int s = 0; s < full.num_states(); ++s) {
    if (!keep_state[s]) continue;
    out.state_level.push_back(full.state_level[s]);
    out.state_regime.push_back(full.state_regime[s]);
    out.state_aug.push_back(full.state_aug[s]);
    out.admissible.push_back(full.admissible[s]);
  }
  out.curtail.resize(static_cast<size_t>(out.period) * kept);
  out.cost.assign(static_cast<size_t>(out.period) * kept * out.num_actions(), 0.0);
  for (int t = 0; t < out.period; ++t)
    for (int s = 0; s < full.num_states(); ++s) {
      if (remap[s] < 0) continue;
      out.curtail[out.ts_index(t, remap[s])] = full.curtail[full.ts_index(t, s)];
      for (int a : full.admissible[s])
        out.cost[out.tsa_index(t, remap[s], a)] = full.cost[full.tsa_index(t, s, a)];
    }
  std::vector<int> unmap(kept);
  for (int s = 0; s < full.num_states(); ++s)
    if (remap[s] >= 0) unmap[remap[s]] = s;
  detail::KernelBuilder kb2(out.period, kept, out.num_actions());
  kb2.build(out, [&](int t, int snew, int a, auto&& add) {
    for (const auto& o : full.outcomes(t, unmap[snew], a)) {
      if (remap[o.next_state] < 0)
        throw Error("pruned state is still reachable");
      add(remap[o.next_state], o.prob);
    }
  });
  out.validate();
  return out;
}

/// Variation 2 state space: s = (level, regime, e) with e = 1 exactly when
/// the landing state curtails.
inline CyclicMdp augment_curtail_flag(const CyclicMdp& mdp) {
  return augment_with(mdp, Augmentation::CurtailFlag, 1,
                      [](int, bool curtails) { return curtails ? 1 : 0; });
}

/// Variation 3 state space: s = (level, regime, z) with
/// z' = min(z+1, cap) on a curtailing landing, else 0.
inline CyclicMdp augment_consecutive_counter(const CyclicMdp& mdp, int cap) {
  if (cap < 1) throw Error("counter cap must be >= 1");
  return augment_with(mdp, Augmentation::ConsecutiveCounter, cap,
                      [cap](int z, bool curtails) { return curtails ? std::min(z + 1, cap) : 0; });
}

/// Variation 4: adds the convex consecutive-curtailment penalty c3(z) to
/// every stage cost of a counter-augmented process.
inline CyclicMdp modify_costs_consecutive_penalty(const CyclicMdp& mdp,
                                                  const std::vector<double>& c3) {
  if (mdp.augmentation != Augmentation::ConsecutiveCounter)
    throw MissingAugmentation("consecutive-counter augmentation required");
  if (static_cast<int>(c3.size()) != mdp.counter_cap + 1)
    throw Error("penalty schedule must have counter_cap + 1 entries");
  if (c3[0] != 0.0) throw NonConvexSchedule("c3(0) must be 0");
  for (size_t z = 0; z + 1 < c3.size(); ++z)
    if (c3[z + 1] < c3[z] - 1e-12) throw NonConvexSchedule("c3 must be non-decreasing");
  for (size_t z = 0; z + 2 < c3.size(); ++z)
    if (c3[z + 2] - c3[z + 1] < c3[z + 1] - c3[z] - 1e-12)
      throw NonConvexSchedule("c3 must be convex");

  CyclicMdp out = mdp;
  for (int t = 0; t < out.period; ++t)
    for (int s = 0; s < out.num_states(); ++s)
      for (int a : out.admissible[s])
        out.cost[out.tsa_index(t, s, a)] += c3[out.state_aug[s]];
  return out;
}

}  // namespace cyclomdp
