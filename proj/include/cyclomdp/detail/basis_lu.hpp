#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace cyclomdp::detail {

// Column-compressed sparse matrix. Rows within a column are kept in the
// order they were inserted; duplicates are not allowed.
struct CscMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> col_start;  // size cols + 1
  std::vector<int> row_index;
  std::vector<double> value;

  int nnz() const { return static_cast<int>(row_index.size()); }
  int col_begin(int j) const { return col_start[j]; }
  int col_end(int j) const { return col_start[j + 1]; }
};

// Sparse LU factors of a square basis matrix (Gilbert-Peierls left-looking
// elimination with partial pivoting) plus a product-form eta file for cheap
// basis exchanges between refactorizations.
//
// Position space: index k in [0, m) refers to the k-th basis column as passed
// to factorize(); ftran maps row space -> position space, btran the reverse.
class BasisLu {
 public:
  bool factorize(const CscMatrix& a, const std::vector<int>& basis) {
    m_ = static_cast<int>(basis.size());
    l_start_.assign(1, 0);
    l_row_.clear();
    l_val_.clear();
    u_start_.assign(1, 0);
    u_pos_.clear();
    u_val_.clear();
    u_diag_.assign(m_, 0.0);
    pivot_row_.assign(m_, -1);
    row_pivot_.assign(m_, -1);
    etas_.clear();
    eta_entries_.clear();

    // Eliminate sparse columns first; a dense column processed early would
    // smear fill across every later column.
    perm_.resize(m_);
    for (int k = 0; k < m_; ++k) perm_[k] = k;
    std::stable_sort(perm_.begin(), perm_.end(), [&](int x, int y) {
      return a.col_end(basis[x]) - a.col_begin(basis[x]) <
             a.col_end(basis[y]) - a.col_begin(basis[y]);
    });

    std::vector<double> work(m_, 0.0);
    std::vector<int> pattern;
    std::vector<int> topo;
    std::vector<int> stack;
    std::vector<int> stack_ptr;
    std::vector<uint8_t> mark(m_, 0);
    pattern.reserve(m_);
    topo.reserve(m_);

    for (int j = 0; j < m_; ++j) {
      pattern.clear();
      topo.clear();
      const int col = basis[perm_[j]];
      for (int p = a.col_begin(col); p < a.col_end(col); ++p) {
        const int r = a.row_index[p];
        work[r] = a.value[p];
        pattern.push_back(r);
      }
      // Symbolic: depth-first search over previously eliminated columns whose
      // pivot rows appear in this column's fill pattern. Reverse post-order
      // gives a valid elimination order.
      for (int start : pattern) dfs_(start, mark, stack, stack_ptr, topo);
      for (int idx = static_cast<int>(topo.size()) - 1; idx >= 0; --idx) {
        const int k = topo[idx];
        mark[k] = 0;
        const double alpha = work[pivot_row_[k]];
        if (alpha == 0.0) continue;
        for (int p = l_start_[k]; p < l_start_[k + 1]; ++p) {
          const int r = l_row_[p];
          if (work[r] == 0.0) pattern.push_back(r);
          work[r] -= l_val_[p] * alpha;
        }
      }
      // Pivot: largest magnitude among not-yet-pivotal rows, lowest row on ties.
      int piv = -1;
      double piv_abs = 0.0;
      for (int r : pattern) {
        if (row_pivot_[r] >= 0) continue;
        const double v = std::fabs(work[r]);
        if (v > piv_abs || (v == piv_abs && v > 0.0 && (piv < 0 || r < piv))) {
          piv_abs = v;
          piv = r;
        }
      }
      if (piv < 0 || piv_abs < kSingularTol) {
        for (int r : pattern) work[r] = 0.0;
        // leave factors empty; caller must treat the basis as singular
        return false;
      }
      const double d = work[piv];
      u_diag_[j] = d;
      pivot_row_[j] = piv;
      row_pivot_[piv] = j;
      // U entries in topological order (deterministic).
      for (int idx = static_cast<int>(topo.size()) - 1; idx >= 0; --idx) {
        const int k = topo[idx];
        const double u = work[pivot_row_[k]];
        if (u != 0.0) {
          u_pos_.push_back(k);
          u_val_.push_back(u);
        }
      }
      u_start_.push_back(static_cast<int>(u_pos_.size()));
      for (int r : pattern) {
        if (row_pivot_[r] < 0 && work[r] != 0.0) {
          l_row_.push_back(r);
          l_val_.push_back(work[r] / d);
        }
        work[r] = 0.0;
      }
      work[piv] = 0.0;
      l_start_.push_back(static_cast<int>(l_row_.size()));
    }
    return true;
  }

  int size() const { return m_; }
  int eta_count() const { return static_cast<int>(etas_.size()); }
  long eta_fill() const { return static_cast<long>(eta_entries_.size()); }

  // Solve B x = b. Input indexed by row, output indexed by basis position.
  void ftran(std::vector<double>& x) const {
    // L pass (row space)
    for (int k = 0; k < m_; ++k) {
      const double alpha = x[pivot_row_[k]];
      if (alpha == 0.0) continue;
      for (int p = l_start_[k]; p < l_start_[k + 1]; ++p) x[l_row_[p]] -= l_val_[p] * alpha;
    }
    // U backward pass (internal elimination order)
    for (int j = m_ - 1; j >= 0; --j) {
      const double xj = x[pivot_row_[j]] / u_diag_[j];
      x[pivot_row_[j]] = xj;
      if (xj == 0.0) continue;
      for (int p = u_start_[j]; p < u_start_[j + 1]; ++p) x[pivot_row_[u_pos_[p]]] -= u_val_[p] * xj;
    }
    scratch_.assign(m_, 0.0);
    for (int j = 0; j < m_; ++j) scratch_[perm_[j]] = x[pivot_row_[j]];
    x.swap(scratch_);
    // eta file, oldest first
    for (const Eta& e : etas_) apply_eta_(e, x);
  }

  // Solve B^T y = c. Input indexed by basis position, output indexed by row.
  void btran(std::vector<double>& y) const {
    for (int e = static_cast<int>(etas_.size()) - 1; e >= 0; --e) apply_eta_transpose_(etas_[e], y);
    // gather into internal elimination order
    scratch_.assign(m_, 0.0);
    for (int k = 0; k < m_; ++k) scratch_[k] = y[perm_[k]];
    // U^T forward
    for (int j = 0; j < m_; ++j) {
      double acc = scratch_[j];
      for (int p = u_start_[j]; p < u_start_[j + 1]; ++p) acc -= u_val_[p] * scratch_[u_pos_[p]];
      scratch_[j] = acc / u_diag_[j];
    }
    // L^T backward, scatter to row space
    y.assign(m_, 0.0);
    for (int k = 0; k < m_; ++k) y[pivot_row_[k]] = scratch_[k];
    for (int k = m_ - 1; k >= 0; --k) {
      double acc = y[pivot_row_[k]];
      for (int p = l_start_[k]; p < l_start_[k + 1]; ++p) acc -= l_val_[p] * y[l_row_[p]];
      y[pivot_row_[k]] = acc;
    }
  }

  // Record the exchange of basis position `pos` for a column whose ftran'd
  // representation is `d` (position space). Fails on a tiny pivot.
  bool update(int pos, const std::vector<double>& d) {
    if (std::fabs(d[pos]) < kSingularTol) return false;
    Eta e;
    e.pos = pos;
    e.first = static_cast<int>(eta_entries_.size());
    for (int i = 0; i < m_; ++i) {
      if (d[i] != 0.0) eta_entries_.push_back({i, d[i]});
    }
    e.last = static_cast<int>(eta_entries_.size());
    etas_.push_back(e);
    return true;
  }

 private:
  static constexpr double kSingularTol = 1e-11;

  struct Eta {
    int pos;
    int first, last;  // range into eta_entries_
  };
  struct EtaEntry {
    int pos;
    double value;
  };

  void dfs_(int start_row, std::vector<uint8_t>& mark, std::vector<int>& stack,
            std::vector<int>& stack_ptr, std::vector<int>& topo) const {
    if (row_pivot_[start_row] < 0 || mark[row_pivot_[start_row]]) return;
    stack.clear();
    stack_ptr.clear();
    stack.push_back(row_pivot_[start_row]);
    stack_ptr.push_back(l_start_[row_pivot_[start_row]]);
    mark[row_pivot_[start_row]] = 1;
    while (!stack.empty()) {
      const int k = stack.back();
      int& p = stack_ptr.back();
      bool descended = false;
      while (p < l_start_[k + 1]) {
        const int r = l_row_[p];
        ++p;
        const int k2 = row_pivot_[r];
        if (k2 >= 0 && !mark[k2]) {
          mark[k2] = 1;
          stack.push_back(k2);
          stack_ptr.push_back(l_start_[k2]);
          descended = true;
          break;
        }
      }
      if (!descended && !stack.empty() && stack.back() == k && p >= l_start_[k + 1]) {
        topo.push_back(k);
        stack.pop_back();
        stack_ptr.pop_back();
      }
    }
  }

  void apply_eta_(const Eta& e, std::vector<double>& x) const {
    double dp = 0.0;
    for (int p = e.first; p < e.last; ++p) {
      if (eta_entries_[p].pos == e.pos) {
        dp = eta_entries_[p].value;
        break;
      }
    }
    const double xp = x[e.pos] / dp;
    for (int p = e.first; p < e.last; ++p) {
      const EtaEntry& en = eta_entries_[p];
      if (en.pos != e.pos) x[en.pos] -= en.value * xp;
    }
    x[e.pos] = xp;
  }

  void apply_eta_transpose_(const Eta& e, std::vector<double>& y) const {
    double dp = 0.0;
    double acc = y[e.pos];
    for (int p = e.first; p < e.last; ++p) {
      const EtaEntry& en = eta_entries_[p];
      if (en.pos == e.pos)
        dp = en.value;
      else
        acc -= en.value * y[en.pos];
    }
    y[e.pos] = acc / dp;
  }

  int m_ = 0;
  std::vector<int> perm_;  // elimination order -> basis position
  std::vector<int> l_start_, l_row_;
  std::vector<double> l_val_;
  std::vector<int> u_start_, u_pos_;
  std::vector<double> u_val_;
  std::vector<double> u_diag_;
  std::vector<int> pivot_row_;  // position -> row
  std::vector<int> row_pivot_;  // row -> position, -1 if none
  std::vector<Eta> etas_;
  std::vector<EtaEntry> eta_entries_;
  mutable std::vector<double> scratch_;
};

}  // namespace cyclomdp::detail
