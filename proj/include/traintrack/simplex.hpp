#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "traintrack/rational.hpp"

namespace traintrack {

// Exact-rational LP over nonnegative variables:
//   maximize c.x  subject to  Aeq x = beq, Ale x <= ble, x >= 0.
// Two-phase dense simplex with Bland's rule: deterministic pivoting, no
// cycling, witnesses reproducible run-to-run (spec requirement).
class LinearProgram {
 public:
  explicit LinearProgram(std::size_t num_vars) : n_(num_vars), c_(num_vars, Rat(0)) {}

  void set_objective(std::size_t var, const Rat& coeff) { c_.at(var) = coeff; }

  void add_eq(const std::vector<std::pair<std::size_t, Rat>>& terms, const Rat& rhs) {
    rows_.push_back(Row{expand(terms), rhs, RowKind::Eq});
  }
  void add_le(const std::vector<std::pair<std::size_t, Rat>>& terms, const Rat& rhs) {
    rows_.push_back(Row{expand(terms), rhs, RowKind::Le});
  }
  void add_ge(const std::vector<std::pair<std::size_t, Rat>>& terms, const Rat& rhs) {
    std::vector<Rat> a = expand(terms);
    for (auto& v : a) v = -v;
    rows_.push_back(Row{std::move(a), -rhs, RowKind::Le});
  }

  enum class Status { Optimal, Infeasible, Unbounded };

  struct Result {
    Status status = Status::Infeasible;
    Rat objective;
    std::vector<Rat> x;
  };

  Result solve() const {
    const std::size_t m = rows_.size();
    // Column layout: [original n][one slack per Le row][one artificial per row
    // needing it][rhs].
    std::size_t num_slack = 0;
    for (const auto& r : rows_) num_slack += r.kind == RowKind::Le ? 1 : 0;

    std::vector<std::vector<Rat>> t(m, std::vector<Rat>());
    std::vector<Rat> rhs(m);
    std::vector<std::size_t> slack_col(m, SIZE_MAX);
    std::size_t next_slack = n_;
    for (std::size_t i = 0; i < m; ++i) {
      t[i].assign(n_ + num_slack, Rat(0));
      for (std::size_t j = 0; j < n_; ++j) t[i][j] = rows_[i].a[j];
      rhs[i] = rows_[i].b;
      if (rows_[i].kind == RowKind::Le) {
        slack_col[i] = next_slack;
        t[i][next_slack] = 1;
        ++next_slack;
      }
    }
    // Normalize rhs >= 0.
    for (std::size_t i = 0; i < m; ++i) {
      if (rhs[i] < 0) {
        for (auto& v : t[i]) v = -v;
        rhs[i] = -rhs[i];
      }
    }
    // Basis: slack where it has coefficient +1 and rhs row untouched,
    // otherwise an artificial.
    std::size_t total = n_ + num_slack;
    std::vector<std::size_t> basis(m, SIZE_MAX);
    std::vector<std::size_t> artificial;
    for (std::size_t i = 0; i < m; ++i) {
      if (slack_col[i] != SIZE_MAX && t[i][slack_col[i]] == 1) {
        basis[i] = slack_col[i];
      } else {
        artificial.push_back(i);
      }
    }
    const std::size_t num_art = artificial.size();
    for (auto& row : t) row.resize(total + num_art, Rat(0));
    for (std::size_t k = 0; k < num_art; ++k) {
      t[artificial[k]][total + k] = 1;
      basis[artificial[k]] = total + k;
    }
    const std::size_t all_cols = total + num_art;

    // Phase 1 objective: maximize -(sum of artificials).
    if (num_art > 0) {
      std::vector<Rat> obj(all_cols, Rat(0));
      Rat obj_val(0);
      for (std::size_t k = 0; k < num_art; ++k) obj[total + k] = Rat(-1);
      // Price out basic artificials.
      for (std::size_t i = 0; i < m; ++i) {
        if (basis[i] >= total) {
          for (std::size_t j = 0; j < all_cols; ++j) obj[j] += t[i][j];
          obj_val += rhs[i];
        }
      }
      // obj row now holds reduced costs of  max sum(-artificial); value = -obj_val.
      if (!run_simplex(t, rhs, basis, obj, all_cols)) {
        return Result{Status::Infeasible, Rat(0), {}};  // unbounded phase 1 cannot happen
      }
      Rat art_sum(0);
      for (std::size_t i = 0; i < m; ++i)
        if (basis[i] >= total) art_sum += rhs[i];
      if (art_sum != 0) return Result{Status::Infeasible, Rat(0), {}};
      // Pivot remaining degenerate artificials out of the basis when possible.
      for (std::size_t i = 0; i < m; ++i) {
        if (basis[i] < total) continue;
        std::size_t enter = SIZE_MAX;
        for (std::size_t j = 0; j < total; ++j)
          if (t[i][j] != 0) {
            enter = j;
            break;
          }
        if (enter == SIZE_MAX) continue;  // redundant row
        pivot(t, rhs, basis, i, enter, all_cols);
      }
    }

    // Phase 2.
    std::vector<Rat> obj(all_cols, Rat(0));
    for (std::size_t j = 0; j < n_; ++j) obj[j] = c_[j];
    // Forbid artificials from re-entering.
    std::vector<bool> allowed(all_cols, true);
    for (std::size_t j = total; j < all_cols; ++j) allowed[j] = false;
    // Price out basics.
    for (std::size_t i = 0; i < m; ++i) {
      if (obj[basis[i]] != 0) {
        const Rat f = obj[basis[i]];
        for (std::size_t j = 0; j < all_cols; ++j) obj[j] -= f * t[i][j];
      }
    }
    if (!run_simplex(t, rhs, basis, obj, all_cols, &allowed)) {
      return Result{Status::Unbounded, Rat(0), {}};
    }

    Result res;
    res.status = Status::Optimal;
    res.x.assign(n_, Rat(0));
    for (std::size_t i = 0; i < m; ++i)
      if (basis[i] < n_) res.x[basis[i]] = rhs[i];
    res.objective = 0;
    for (std::size_t j = 0; j < n_; ++j) res.objective += c_[j] * res.x[j];
    return res;
  }

 private:
  enum class RowKind { Eq, Le };
  struct Row {
    std::vector<Rat> a;
    Rat b;
    RowKind kind;
  };

  std::vector<Rat> expand(const std::vector<std::pair<std::size_t, Rat>>& terms) const {
    std::vector<Rat> a(n_, Rat(0));
    for (const auto& [idx, v] : terms) a.at(idx) += v;
    return a;
  }

  static void pivot(std::vector<std::vector<Rat>>& t, std::vector<Rat>& rhs,
                    std::vector<std::size_t>& basis, std::size_t row, std::size_t col,
                    std::size_t all_cols) {
    const Rat inv = Rat(1) / t[row][col];
    for (std::size_t j = 0; j < all_cols; ++j) t[row][j] *= inv;
    rhs[row] *= inv;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i == row || t[i][col] == 0) continue;
      const Rat f = t[i][col];
      for (std::size_t j = 0; j < all_cols; ++j) t[i][j] -= f * t[row][j];
      rhs[i] -= f * rhs[row];
    }
    basis[row] = col;
  }

  // Bland's rule simplex on (t, rhs, basis) maximizing via reduced-cost row
  // `obj` (updated in place). Returns false on unboundedness.
  static bool run_simplex(std::vector<std::vector<Rat>>& t, std::vector<Rat>& rhs,
                          std::vector<std::size_t>& basis, std::vector<Rat>& obj,
                          std::size_t all_cols, const std::vector<bool>* allowed = nullptr) {
    const std::size_t m = t.size();
    for (;;) {
      std::size_t enter = SIZE_MAX;
      for (std::size_t j = 0; j < all_cols; ++j) {
        if (allowed && !(*allowed)[j]) continue;
        if (obj[j] > 0) {
          enter = j;
          break;
        }
      }
      if (enter == SIZE_MAX) return true;
      std::size_t leave = SIZE_MAX;
      Rat best_ratio(0);
      for (std::size_t i = 0; i < m; ++i) {
        if (t[i][enter] <= 0) continue;
        const Rat ratio = rhs[i] / t[i][enter];
        if (leave == SIZE_MAX || ratio < best_ratio ||
            (ratio == best_ratio && basis[i] < basis[leave])) {
          leave = i;
          best_ratio = ratio;
        }
      }
      if (leave == SIZE_MAX) return false;
      pivot(t, rhs, basis, leave, enter, all_cols);
      const Rat f = obj[enter];
      if (f != 0) {
        for (std::size_t j = 0; j < all_cols; ++j) obj[j] -= f * t[leave][j];
      }
    }
  }

  std::size_t n_;
  std::vector<Rat> c_;
  std::vector<Row> rows_;
};

}  // namespace traintrack
