#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "cyclomdp/detail/simplex.hpp"
#include "cyclomdp/errors.hpp"

namespace cyclomdp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class LpStatus { Optimal, Infeasible, Unbounded, NumericalBreakdown };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::NumericalBreakdown: return "numerical_breakdown";
  }
  return "?";
}

/// Linear program in the canonical form
///   min c'x  s.t.  A x = b,  G x <= h,  lower <= x <= upper.
/// Duplicate (row, col) entries are summed. Default bounds are [0, +inf);
/// mark a variable free via set_free().
struct LpProblem {
  struct Entry {
    int row;
    int col;
    double value;
  };

  int cols = 0;
  std::vector<double> objective;
  std::vector<Entry> eq;
  std::vector<double> eq_rhs;
  std::vector<Entry> le;
  std::vector<double> le_rhs;
  std::vector<double> lower;
  std::vector<double> upper;

  static LpProblem with_cols(int n) {
    LpProblem p;
    p.cols = n;
    p.objective.assign(n, 0.0);
    p.lower.assign(n, 0.0);
    p.upper.assign(n, kInfinity);
    return p;
  }

  int eq_rows() const { return static_cast<int>(eq_rhs.size()); }
  int le_rows() const { return static_cast<int>(le_rhs.size()); }

  void add_eq_entry(int row, int col, double v) { eq.push_back({row, col, v}); }
  void add_le_entry(int row, int col, double v) { le.push_back({row, col, v}); }
  void set_free(int j) { lower[j] = -kInfinity; }

  void validate() const {
    if (static_cast<int>(objective.size()) != cols ||
        static_cast<int>(lower.size()) != cols || static_cast<int>(upper.size()) != cols)
      throw InvalidProblem("column count inconsistent across objective/bounds");
    for (double v : objective)
      if (!std::isfinite(v)) throw InvalidProblem("non-finite objective coefficient");
    for (double v : eq_rhs)
      if (!std::isfinite(v)) throw InvalidProblem("non-finite equality rhs");
    for (double v : le_rhs)
      if (!std::isfinite(v)) throw InvalidProblem("non-finite inequality rhs");
    for (int j = 0; j < cols; ++j) {
      if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j])
        throw InvalidProblem("invalid bounds on column " + std::to_string(j));
    }
    auto check = [&](const std::vector<Entry>& entries, int rows, const char* what) {
      for (const Entry& e : entries) {
        if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
          throw InvalidProblem(std::string(what) + " entry out of range");
        if (!std::isfinite(e.value))
          throw InvalidProblem(std::string(what) + " entry non-finite");
      }
    };
    check(eq, eq_rows(), "equality");
    check(le, le_rows(), "inequality");
  }
};

struct LpBasis {
  std::vector<int> basic;
  std::vector<int8_t> state;
  bool empty() const { return basic.empty(); }
};

struct LpOptions {
  double feas_tol = 1e-8;  // per-row, scaled by max(1, |rhs|)
  double bound_tol = 1e-9;
  double gap_tol = 1e-7;  // relative duality gap
  bool scale = true;
  long max_iterations = 0;
  const LpBasis* warm_start = nullptr;
};

struct LpSolution {
  LpStatus status = LpStatus::NumericalBreakdown;
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> eq_duals;
  bool vertex = false;
  long iterations = 0;
  double max_residual = 0.0;
  double duality_gap = 0.0;
  LpBasis basis;
  std::string message;
};

namespace detail {

inline CscMatrix build_csc(const LpProblem& p, int slack_cols) {
  const int m = p.eq_rows() + p.le_rows();
  const int n = p.cols + slack_cols;
  std::vector<LpProblem::Entry> entries;
  entries.reserve(p.eq.size() + p.le.size() + slack_cols);
  for (const auto& e : p.eq) entries.push_back(e);
  for (const auto& e : p.le) entries.push_back({e.row + p.eq_rows(), e.col, e.value});
  for (int k = 0; k < slack_cols; ++k)
    entries.push_back({p.eq_rows() + k, p.cols + k, 1.0});
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  CscMatrix a;
  a.rows = m;
  a.cols = n;
  a.col_start.assign(n + 1, 0);
  for (size_t k = 0; k < entries.size();) {
    size_t k2 = k;
    double sum = 0.0;
    while (k2 < entries.size() && entries[k2].col == entries[k].col &&
           entries[k2].row == entries[k].row) {
      sum += entries[k2].value;
      ++k2;
    }
    if (sum != 0.0) {
      a.row_index.push_back(entries[k].row);
      a.value.push_back(sum);
      a.col_start[entries[k].col + 1] += 1;
    }
    k = k2;
  }
  for (int j = 0; j < n; ++j) a.col_start[j + 1] += a.col_start[j];
  return a;
}

// Geometric-mean row equilibration, factors rounded to powers of two so that
// scaling and unscaling are exact. Columns are left alone: rescaling the
// variables distorts the bound geometry and that has proved far more harmful
// to the pivot path than uneven column norms.
inline void equilibrate(const CscMatrix& a, std::vector<double>& row_scale,
                        std::vector<double>& col_scale) {
  row_scale.assign(a.rows, 1.0);
  col_scale.assign(a.cols, 1.0);
  auto pow2_near = [](double g) {
    if (g <= 0.0 || !std::isfinite(g)) return 1.0;
    return std::exp2(static_cast<double>(-std::lround(std::log2(g))));
  };
  std::vector<double> rmin(a.rows, kInfinity), rmax(a.rows, 0.0);
  for (int j = 0; j < a.cols; ++j)
    for (int p = a.col_begin(j); p < a.col_end(j); ++p) {
      const double v = std::fabs(a.value[p]);
      rmin[a.row_index[p]] = std::min(rmin[a.row_index[p]], v);
      rmax[a.row_index[p]] = std::max(rmax[a.row_index[p]], v);
    }
  for (int i = 0; i < a.rows; ++i)
    if (rmax[i] > 0.0) row_scale[i] = pow2_near(std::sqrt(rmin[i] * rmax[i]));
}

}  // namespace detail

/// Solves an LP with a bounded-variable revised primal simplex (sparse LU
/// basis, product-form updates). The same problem bytes always reproduce the
/// same pivot sequence and hence bit-identical solutions. Optimal solutions
/// are vertices whenever every variable ends on a bound or in the basis.
inline LpSolution solve_lp(const LpProblem& problem, const LpOptions& options = {}) {
  problem.validate();
  const int n = problem.cols;
  const int m_eq = problem.eq_rows();
  const int m_le = problem.le_rows();
  const int m = m_eq + m_le;

  const detail::CscMatrix a0 = detail::build_csc(problem, m_le);
  std::vector<double> b(m);
  for (int i = 0; i < m_eq; ++i) b[i] = problem.eq_rhs[i];
  for (int i = 0; i < m_le; ++i) b[m_eq + i] = problem.le_rhs[i];
  std::vector<double> lo(problem.lower), hi(problem.upper);
  lo.resize(n + m_le, 0.0);
  hi.resize(n + m_le, kInfinity);
  std::vector<double> c(problem.objective);
  c.resize(n + m_le, 0.0);

  auto attempt = [&](bool scale, bool force_bland, LpSolution& sol) -> bool {
    detail::CscMatrix a = a0;
    std::vector<double> row_scale(m, 1.0), col_scale(a.cols, 1.0);
    if (scale) detail::equilibrate(a, row_scale, col_scale);
    for (int j = 0; j < a.cols; ++j)
      for (int p = a.col_begin(j); p < a.col_end(j); ++p)
        a.value[p] *= row_scale[a.row_index[p]] * col_scale[j];
    std::vector<double> bs(m), los(a.cols), his(a.cols), cs(a.cols);
    for (int i = 0; i < m; ++i) bs[i] = b[i] * row_scale[i];
    for (int j = 0; j < a.cols; ++j) {
      los[j] = lo[j] / col_scale[j];
      his[j] = hi[j] / col_scale[j];
      cs[j] = c[j] * col_scale[j];
    }

    detail::SimplexOptions sopt;
    sopt.force_bland = force_bland;
    sopt.max_iterations = options.max_iterations;
    detail::SimplexSolver solver(std::move(a), std::move(bs), std::move(los), std::move(his), sopt);

    detail::SimplexResult res;
    bool warm_used = false;
    if (options.warm_start && !options.warm_start->empty() && !force_bland) {
      detail::SimplexBasis wb;
      wb.basic = options.warm_start->basic;
      wb.state.assign(options.warm_start->state.begin(), options.warm_start->state.end());
      warm_used = solver.solve_warm(cs, wb, res);
    }
    if (!warm_used) res = solver.solve(cs);

    sol.iterations = solver.iterations();
    switch (res) {
      case detail::SimplexResult::Infeasible:
        sol.status = LpStatus::Infeasible;
        return true;
      case detail::SimplexResult::Unbounded:
        sol.status = LpStatus::Unbounded;
        return true;
      case detail::SimplexResult::Breakdown:
        sol.status = LpStatus::NumericalBreakdown;
        sol.message = "simplex breakdown";
        return false;
      case detail::SimplexResult::Optimal:
        break;
    }

    std::vector<double> xs = solver.primal();
    sol.x.assign(n, 0.0);
    for (int j = 0; j < n; ++j) sol.x[j] = xs[j] * col_scale[j];
    std::vector<double> ys = solver.duals(cs);
    sol.eq_duals.assign(m_eq, 0.0);
    for (int i = 0; i < m_eq; ++i) sol.eq_duals[i] = ys[i] * row_scale[i];

    sol.objective = 0.0;
    for (int j = 0; j < n; ++j) sol.objective += problem.objective[j] * sol.x[j];
    sol.vertex = solver.at_vertex();

    // certificates in original units
    std::vector<double> resid(m, 0.0);
    for (const auto& e : problem.eq) resid[e.row] += e.value * sol.x[e.col];
    for (const auto& e : problem.le) resid[m_eq + e.row] += e.value * sol.x[e.col];
    double worst = 0.0;
    bool feasible = true;
    for (int i = 0; i < m_eq; ++i) {
      const double r = std::fabs(resid[i] - problem.eq_rhs[i]) / std::max(1.0, std::fabs(problem.eq_rhs[i]));
      worst = std::max(worst, r);
      if (r > options.feas_tol) feasible = false;
    }
    for (int i = 0; i < m_le; ++i) {
      const double r = (resid[m_eq + i] - problem.le_rhs[i]) / std::max(1.0, std::fabs(problem.le_rhs[i]));
      worst = std::max(worst, std::max(0.0, r));
      if (r > options.feas_tol) feasible = false;
    }
    for (int j = 0; j < n; ++j) {
      if (sol.x[j] < problem.lower[j] - options.bound_tol ||
          sol.x[j] > problem.upper[j] + options.bound_tol)
        feasible = false;
    }
    sol.max_residual = worst;

    // c'x = y'b + sum of reduced costs at nonbasic bound values (exact identity
    // for a basic solution; residual measures roundoff)
    std::vector<double> yfull(m, 0.0);
    for (int i = 0; i < m; ++i) yfull[i] = ys[i] * row_scale[i];
    double dual_side = 0.0;
    for (int i = 0; i < m; ++i) dual_side += yfull[i] * b[i];
    {
      std::vector<double> ata(n + m_le, 0.0);
      for (const auto& e : problem.eq) ata[e.col] += yfull[e.row] * e.value;
      for (const auto& e : problem.le) ata[e.col] += yfull[m_eq + e.row] * e.value;
      for (int k = 0; k < m_le; ++k) ata[n + k] += yfull[m_eq + k];
      detail::SimplexBasis bs2 = solver.basis();
      for (int j = 0; j < n + m_le; ++j) {
        const auto st = static_cast<detail::VarState>(bs2.state[j]);
        double xj;
        if (st == detail::VarState::AtLower)
          xj = lo[j];
        else if (st == detail::VarState::AtUpper)
          xj = hi[j];
        else
          continue;
        if (xj != 0.0) dual_side += (c[j] - ata[j]) * xj;
      }
    }
    sol.duality_gap = std::fabs(sol.objective - dual_side) / std::max(1.0, std::fabs(sol.objective));

    if (!feasible || sol.duality_gap > options.gap_tol) {
      sol.status = LpStatus::NumericalBreakdown;
      sol.message = "certificates out of tolerance";
      return false;
    }

    detail::SimplexBasis fb = solver.basis();
    sol.basis.basic = fb.basic;
    sol.basis.state.assign(fb.state.begin(), fb.state.end());
    sol.status = LpStatus::Optimal;
    return true;
  };

  LpSolution sol;
  if (attempt(options.scale, false, sol)) return sol;
  LpSolution retry;
  if (options.scale && attempt(false, false, retry)) return retry;
  if (attempt(false, true, retry)) return retry;
  retry.status = LpStatus::NumericalBreakdown;
  if (retry.message.empty()) retry.message = "simplex breakdown";
  return retry;
}

/// Writes the problem in the conventional LP text format for inspection with
/// external tools.
inline void write_lp_file(const LpProblem& p, std::ostream& os, const std::string& name = "cyclomdp") {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto term = [&](double v, int j, bool first) {
    std::string s;
    if (v >= 0.0 && !first) s += "+ ";
    if (v < 0.0) s += "- ";
    s += num(std::fabs(v)) + " x" + std::to_string(j) + " ";
    return s;
  };
  os << "\\ " << name << "\n";
  os << "Minimize\n obj: ";
  bool first = true;
  for (int j = 0; j < p.cols; ++j) {
    if (p.objective[j] == 0.0) continue;
    os << term(p.objective[j], j, first);
    first = false;
  }
  if (first) os << "0 x0";
  os << "\nSubject To\n";
  auto rows = [&](const std::vector<LpProblem::Entry>& entries, const std::vector<double>& rhs,
                  const char* tag, const char* rel) {
    std::vector<std::vector<std::pair<int, double>>> by_row(rhs.size());
    for (const auto& e : entries) by_row[e.row].push_back({e.col, e.value});
    for (size_t i = 0; i < rhs.size(); ++i) {
      os << " " << tag << i << ": ";
      bool f2 = true;
      for (auto& [j, v] : by_row[i]) {
        if (v == 0.0) continue;
        os << term(v, j, f2);
        f2 = false;
      }
      if (f2) os << "0 x0 ";
      os << rel << " " << num(rhs[i]) << "\n";
    }
  };
  rows(p.eq, p.eq_rhs, "e", "=");
  rows(p.le, p.le_rhs, "i", "<=");
  os << "Bounds\n";
  for (int j = 0; j < p.cols; ++j) {
    const bool lf = p.lower[j] <= -kInfinity, uf = p.upper[j] >= kInfinity;
    if (lf && uf)
      os << " x" << j << " free\n";
    else if (lf)
      os << " -inf <= x" << j << " <= " << num(p.upper[j]) << "\n";
    else if (uf) {
      if (p.lower[j] != 0.0) os << " x" << j << " >= " << num(p.lower[j]) << "\n";
    } else
      os << " " << num(p.lower[j]) << " <= x" << j << " <= " << num(p.upper[j]) << "\n";
  }
  os << "End\n";
}

}  // namespace cyclomdp
