#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cyclomdp/detail/basis_lu.hpp"

namespace cyclomdp::detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarState : int8_t { Basic = 0, AtLower = 1, AtUpper = 2, FreeZero = 3 };

enum class SimplexResult { Optimal, Infeasible, Unbounded, Breakdown };

struct SimplexOptions {
  double dual_tol = 1e-9;
  double pivot_tol = 1e-9;
  double degeneracy_tol = 1e-12;
  int refactor_interval = 64;
  int bland_trigger = 40;
  bool force_bland = false;
  long max_iterations = 0;  // 0 -> scale with problem size
};

struct SimplexBasis {
  std::vector<int> basic;         // column per basis position, extended indexing
  std::vector<int8_t> state;      // VarState per extended column
};

// Bounded-variable primal simplex over a fixed constraint matrix A x = b,
// lo <= x <= hi. Artificial columns are appended internally for phase 1.
// All tie-breaks are by lowest index, so a given input always replays the
// same pivot sequence.
class SimplexSolver {
 public:
  SimplexSolver(CscMatrix a, std::vector<double> b, std::vector<double> lo,
                std::vector<double> hi, SimplexOptions opt)
      : a_(std::move(a)),
        b_(std::move(b)),
        lo_(std::move(lo)),
        hi_(std::move(hi)),
        opt_(opt),
        m_(a_.rows),
        n_input_(a_.cols) {}

  SimplexResult solve(const std::vector<double>& cost) {
    init_states_();
    crash_();
    add_artificials_();
    if (!artificials_.empty()) {
      std::vector<double> phase1(a_.cols, 0.0);
      for (int j : artificials_) phase1[j] = 1.0;
      const SimplexResult r = run_(phase1, /*phase1=*/true);
      if (r != SimplexResult::Optimal) return r == SimplexResult::Unbounded ? SimplexResult::Breakdown : r;
      double infeas = 0.0;
      for (int j : artificials_) infeas += value_of_(j);
      double bscale = 1.0;
      for (double v : b_) bscale = std::max(bscale, std::fabs(v));
      if (infeas > 1e-7 * bscale) return SimplexResult::Infeasible;
      pin_artificials_();
    }
    return run_(pad_(cost), /*phase1=*/false);
  }

  // Warm start from a basis obtained on a problem with identical constraint
  // data (only costs may differ). Returns false if the basis is unusable; the
  // caller should fall back to a cold solve.
  bool solve_warm(const std::vector<double>& cost, const SimplexBasis& warm, SimplexResult& out) {
    init_states_();
    crash_();
    add_artificials_();
    if (warm.basic.size() != static_cast<size_t>(m_) ||
        warm.state.size() != static_cast<size_t>(a_.cols))
      return false;
    for (int j : warm.basic)
      if (j < 0 || j >= a_.cols) return false;
    basic_ = warm.basic;
    for (int j = 0; j < a_.cols; ++j) state_[j] = static_cast<VarState>(warm.state[j]);
    pin_artificials_();
    if (!factor_.factorize(a_, basic_)) return false;
    recompute_basics_();
    for (int i = 0; i < m_; ++i) {
      const int j = basic_[i];
      if (x_basic_[i] < lo_[j] - 1e-7 || x_basic_[i] > hi_[j] + 1e-7) return false;
    }
    factor_valid_ = true;
    out = run_(pad_(cost), /*phase1=*/false);
    return true;
  }

  int columns() const { return a_.cols; }
  int input_columns() const { return n_input_; }

  double value_of_(int j) const {
    switch (state_[j]) {
      case VarState::AtLower: return lo_[j];
      case VarState::AtUpper: return hi_[j];
      case VarState::FreeZero: return 0.0;
      case VarState::Basic:
        for (int i = 0; i < m_; ++i)
          if (basic_[i] == j) return x_basic_[i];
        return 0.0;
    }
    return 0.0;
  }

  std::vector<double> primal() const {
    std::vector<double> x(n_input_, 0.0);
    for (int j = 0; j < n_input_; ++j) {
      switch (state_[j]) {
        case VarState::AtLower: x[j] = lo_[j]; break;
        case VarState::AtUpper: x[j] = hi_[j]; break;
        default: break;
      }
    }
    for (int i = 0; i < m_; ++i)
      if (basic_[i] < n_input_) x[basic_[i]] = x_basic_[i];
    return x;
  }

  std::vector<double> duals(const std::vector<double>& cost) const {
    std::vector<double> y(m_, 0.0);
    const std::vector<double> c = pad_(cost);
    for (int i = 0; i < m_; ++i) y[i] = c[basic_[i]];
    factor_.btran(y);
    return y;
  }

  bool at_vertex() const {
    for (int j = 0; j < a_.cols; ++j)
      if (state_[j] == VarState::FreeZero) return false;
    return true;
  }

  SimplexBasis basis() const {
    SimplexBasis bs;
    bs.basic = basic_;
    bs.state.resize(a_.cols);
    for (int j = 0; j < a_.cols; ++j) bs.state[j] = static_cast<int8_t>(state_[j]);
    return bs;
  }

  long iterations() const { return iterations_; }

 private:
  std::vector<double> pad_(const std::vector<double>& cost) const {
    std::vector<double> c(a_.cols, 0.0);
    std::copy(cost.begin(), cost.end(), c.begin());
    return c;
  }

  void init_states_() {
    state_.assign(a_.cols, VarState::FreeZero);
    for (int j = 0; j < a_.cols; ++j) {
      if (lo_[j] > -kInf)
        state_[j] = VarState::AtLower;
      else if (hi_[j] < kInf)
        state_[j] = VarState::AtUpper;
    }
    basic_.assign(m_, -1);
    covered_.assign(m_, 0);
    artificials_.clear();
    factor_valid_ = false;
    iterations_ = 0;
  }

  // Residuals with every column at its initial nonbasic value.
  std::vector<double> initial_residual_() const {
    std::vector<double> r = b_;
    for (int j = 0; j < a_.cols; ++j) {
      const double xj = state_[j] == VarState::AtLower ? lo_[j]
                        : state_[j] == VarState::AtUpper ? hi_[j]
                                                         : 0.0;
      if (xj == 0.0) continue;
      for (int p = a_.col_begin(j); p < a_.col_end(j); ++p) r[a_.row_index[p]] -= a_.value[p] * xj;
    }
    return r;
  }

  // Cover rows with singleton columns whose implied value fits the bounds.
  void crash_() {
    std::vector<double> resid = initial_residual_();
    for (int j = 0; j < a_.cols; ++j) {
      if (a_.col_end(j) - a_.col_begin(j) != 1) continue;
      const int p = a_.col_begin(j);
      const int i = a_.row_index[p];
      if (covered_[i]) continue;
      const double aij = a_.value[p];
      if (std::fabs(aij) < 1e-12) continue;
      const double x0 = state_[j] == VarState::AtLower ? lo_[j]
                        : state_[j] == VarState::AtUpper ? hi_[j]
                                                         : 0.0;
      const double v = x0 + resid[i] / aij;
      if (v >= lo_[j] - 1e-11 && v <= hi_[j] + 1e-11) {
        basic_[i] = j;
        covered_[i] = 1;
        state_[j] = VarState::Basic;
      }
    }
  }

  void add_artificials_() {
    std::vector<double> resid = initial_residual_();
    // residual already consumed by crashed singleton columns
    for (int i = 0; i < m_; ++i)
      if (covered_[i]) resid[i] = 0.0;
    for (int i = 0; i < m_; ++i) {
      if (covered_[i]) continue;
      const int j = a_.cols;
      a_.col_start.push_back(a_.nnz() + 1);
      a_.row_index.push_back(i);
      a_.value.push_back(resid[i] >= 0.0 ? 1.0 : -1.0);
      a_.cols += 1;
      lo_.push_back(0.0);
      hi_.push_back(kInf);
      state_.push_back(VarState::Basic);
      basic_[i] = j;
      covered_[i] = 1;
      artificials_.push_back(j);
    }
  }

  void pin_artificials_() {
    for (int j : artificials_) {
      lo_[j] = 0.0;
      hi_[j] = 0.0;
      if (state_[j] != VarState::Basic) state_[j] = VarState::AtLower;
    }
  }

  void recompute_basics_() {
    std::vector<double> rhs = b_;
    for (int j = 0; j < a_.cols; ++j) {
      if (state_[j] == VarState::Basic) continue;
      const double xj = state_[j] == VarState::AtLower ? lo_[j]
                        : state_[j] == VarState::AtUpper ? hi_[j]
                                                         : 0.0;
      if (xj == 0.0) continue;
      for (int p = a_.col_begin(j); p < a_.col_end(j); ++p) rhs[a_.row_index[p]] -= a_.value[p] * xj;
    }
    factor_.ftran(rhs);
    x_basic_ = rhs;
  }

  SimplexResult run_(const std::vector<double>& cost, bool phase1) {
    const long max_iter = opt_.max_iterations > 0
                              ? opt_.max_iterations
                              : 10000L + 20L * (static_cast<long>(m_) + a_.cols);
    bool use_bland = opt_.force_bland;
    int degen_streak = 0;
    factor_valid_ = factor_valid_ && factor_.size() == m_;
    std::vector<double> y(m_), d;
    std::vector<uint8_t> banned(a_.cols, 0);
    bool bans_active = false;
    bool accept_tiny = false;

    for (long iter = 0;; ++iter, ++iterations_) {
      if (iter > max_iter) return SimplexResult::Breakdown;
      if (!factor_valid_ || factor_.eta_count() >= opt_.refactor_interval ||
          factor_.eta_fill() > 2L * m_ + 64) {
        if (!factor_.factorize(a_, basic_)) return SimplexResult::Breakdown;
        recompute_basics_();
        factor_valid_ = true;
        std::fill(banned.begin(), banned.end(), 0);
      }
      // pricing
      for (int i = 0; i < m_; ++i) y[i] = cost[basic_[i]];
      factor_.btran(y);
      int enter = -1;
      int sigma = 0;
      double best = opt_.dual_tol;
      for (int j = 0; j < a_.cols; ++j) {
        if (state_[j] == VarState::Basic || banned[j]) continue;
        if (lo_[j] == hi_[j] && state_[j] != VarState::FreeZero) continue;
        double dj = cost[j];
        for (int p = a_.col_begin(j); p < a_.col_end(j); ++p) dj -= y[a_.row_index[p]] * a_.value[p];
        double viol = 0.0;
        int dir = 0;
        if (state_[j] == VarState::AtLower && dj < -opt_.dual_tol) {
          viol = -dj;
          dir = +1;
        } else if (state_[j] == VarState::AtUpper && dj > opt_.dual_tol) {
          viol = dj;
          dir = -1;
        } else if (state_[j] == VarState::FreeZero && std::fabs(dj) > opt_.dual_tol) {
          viol = std::fabs(dj);
          dir = dj < 0.0 ? +1 : -1;
        } else {
          continue;
        }
        if (use_bland) {
          enter = j;
          sigma = dir;
          break;
        }
        if (viol > best) {
          best = viol;
          enter = j;
          sigma = dir;
        }
      }
      if (enter < 0) return SimplexResult::Optimal;

      // direction through the basis
      d.assign(m_, 0.0);
      for (int p = a_.col_begin(enter); p < a_.col_end(enter); ++p)
        d[a_.row_index[p]] = a_.value[p];
      factor_.ftran(d);

      // ratio test: basic values move at rate -sigma * d[i]
      double theta = (lo_[enter] > -kInf && hi_[enter] < kInf) ? hi_[enter] - lo_[enter] : kInf;
      int leave = -1;  // basis position; -1 with finite theta = bound flip
      double leave_pivot = 0.0;
      constexpr double kTieTol = 1e-12;
      for (int i = 0; i < m_; ++i) {
        const double rate = -sigma * d[i];
        double limit;
        if (rate > opt_.pivot_tol) {
          if (hi_[basic_[i]] >= kInf) continue;
          limit = std::max(0.0, (hi_[basic_[i]] - x_basic_[i]) / rate);
        } else if (rate < -opt_.pivot_tol) {
          if (lo_[basic_[i]] <= -kInf) continue;
          limit = std::max(0.0, (lo_[basic_[i]] - x_basic_[i]) / rate);
        } else {
          continue;
        }
        bool take = false;
        if (limit < theta - kTieTol) {
          take = true;
        } else if (limit < theta + kTieTol && leave >= 0) {
          // tie: Bland wants the lowest variable index; otherwise prefer the
          // larger pivot for stability, lowest index breaking exact ties
          if (use_bland)
            take = basic_[i] < basic_[leave];
          else
            take = std::fabs(d[i]) > std::fabs(leave_pivot);
        }
        if (take) {
          theta = std::min(theta, limit);
          leave = i;
          leave_pivot = d[i];
        }
      }
      if (theta >= kInf) {
        return phase1 ? SimplexResult::Breakdown : SimplexResult::Unbounded;
      }

      if (leave >= 0) {
        // refuse pivots that are tiny relative to the direction: with a stale
        // factor, refresh and redo the iteration; with a fresh one, ban the
        // entering column until the next refactorization
        double dmax = 0.0;
        for (int i = 0; i < m_; ++i) dmax = std::max(dmax, std::fabs(d[i]));
        if (std::fabs(leave_pivot) < std::max(1e-11, 1e-8 * dmax)) {
          if (factor_.eta_count() > 0) {
            factor_valid_ = false;
          } else {
            banned[enter] = 1;
          }
          continue;
        }
      }

      if (leave < 0) {
        // bound-to-bound flip
        for (int i = 0; i < m_; ++i) x_basic_[i] -= sigma * theta * d[i];
        state_[enter] = state_[enter] == VarState::AtLower ? VarState::AtUpper : VarState::AtLower;
        degen_streak = 0;
        if (!opt_.force_bland) use_bland = false;
        continue;
      }

      // pivot
      const int leaving_var = basic_[leave];
      const double enter_start = state_[enter] == VarState::AtLower ? lo_[enter]
                                 : state_[enter] == VarState::AtUpper ? hi_[enter]
                                                                      : 0.0;
      for (int i = 0; i < m_; ++i) x_basic_[i] -= sigma * theta * d[i];
      x_basic_[leave] = enter_start + sigma * theta;
      basic_[leave] = enter;
      state_[enter] = VarState::Basic;
      const double rate = -sigma * leave_pivot;
      if (rate > 0.0)
        state_[leaving_var] = VarState::AtUpper;
      else
        state_[leaving_var] = lo_[leaving_var] > -kInf ? VarState::AtLower : VarState::FreeZero;

      if (!factor_.update(leave, d)) factor_valid_ = false;

      if (theta <= opt_.degeneracy_tol) {
        if (++degen_streak >= opt_.bland_trigger) use_bland = true;
      } else {
        degen_streak = 0;
        if (!opt_.force_bland) use_bland = false;
      }
    }
  }

  CscMatrix a_;
  std::vector<double> b_, lo_, hi_;
  SimplexOptions opt_;
  int m_;
  int n_input_;

  std::vector<VarState> state_;
  std::vector<int> basic_;
  std::vector<uint8_t> covered_;
  std::vector<int> artificials_;
  std::vector<double> x_basic_;
  BasisLu factor_;
  bool factor_valid_ = false;
  long iterations_ = 0;
};

}  // namespace cyclomdp::detail
