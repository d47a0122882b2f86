#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "traintrack/cycles.hpp"
#include "traintrack/linalg.hpp"
#include "traintrack/simplex.hpp"
#include "traintrack/track.hpp"

namespace traintrack {

// All cone computations are exact rational; the branch coordinate order is
// the track's branch list (sorted by id).

struct TransverseMeasure {
  std::map<int, Rat> weights;

  Rat weight(int branch_id) const {
    auto it = weights.find(branch_id);
    return it == weights.end() ? Rat(0) : it->second;
  }
  Rat total_mass() const {
    Rat s(0);
    for (const auto& [id, w] : weights) s += w;
    return s;
  }
};

using TangentialMeasure = TransverseMeasure;

inline std::vector<Rat> measure_vector(const TrainTrack& t, const TransverseMeasure& m) {
  std::vector<Rat> v(t.num_branches(), Rat(0));
  for (std::size_t i = 0; i < t.branches.size(); ++i) v[i] = m.weight(t.branches[i].id);
  return v;
}

inline TransverseMeasure measure_from_vector(const TrainTrack& t, const std::vector<Rat>& v) {
  TransverseMeasure m;
  for (std::size_t i = 0; i < t.branches.size(); ++i) m.weights[t.branches[i].id] = v[i];
  return m;
}

// Switch-condition matrix: one row per switch, entry +1 per large end, -1 per
// small end (a branch hitting the same switch twice accumulates).
inline QMat switch_matrix(const TrainTrack& t) {
  QMat a(t.num_switches(), t.num_branches());
  std::map<int, std::size_t> row;
  for (std::size_t i = 0; i < t.switches.size(); ++i) row[t.switches[i]] = i;
  for (std::size_t bi = 0; bi < t.branches.size(); ++bi)
    for (int e = 0; e < 2; ++e) {
      const BranchEnd& end = t.branches[bi].ends[e];
      a(row.at(end.sw), bi) += end.slot == Slot::Large ? Rat(1) : Rat(-1);
    }
  return a;
}

inline bool satisfies_switch_conditions(const TrainTrack& t, const TransverseMeasure& m) {
  const QMat a = switch_matrix(t);
  const auto v = measure_vector(t, m);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    Rat s(0);
    for (std::size_t c = 0; c < a.cols(); ++c) s += a(r, c) * v[c];
    if (s != 0) return false;
  }
  return true;
}

namespace detail {

// max x_target subject to switch conditions, sum = 1, x >= 0.
inline std::optional<Rat> max_branch_weight(const QMat& a, std::size_t n, std::size_t target) {
  LinearProgram lp(n);
  lp.set_objective(target, Rat(1));
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::vector<std::pair<std::size_t, Rat>> terms;
    for (std::size_t c = 0; c < n; ++c)
      if (a(r, c) != 0) terms.push_back({c, a(r, c)});
    lp.add_eq(terms, Rat(0));
  }
  std::vector<std::pair<std::size_t, Rat>> mass;
  for (std::size_t c = 0; c < n; ++c) mass.push_back({c, Rat(1)});
  lp.add_eq(mass, Rat(1));
  const auto res = lp.solve();
  if (res.status != LinearProgram::Status::Optimal) return std::nullopt;
  return res.objective;
}

}  // namespace detail

// Branches that can carry positive weight in some transverse measure (the
// support of the relative interior of V(tau)). Empty when the cone is {0}.
inline std::vector<bool> positive_support(const TrainTrack& t) {
  const QMat a = switch_matrix(t);
  const std::size_t n = t.num_branches();
  std::vector<bool> support(n, false);
  for (std::size_t b = 0; b < n; ++b) {
    const auto v = detail::max_branch_weight(a, n, b);
    support[b] = v.has_value() && *v > 0;
  }
  return support;
}

// Exact dimension of the linear span of V(tau): nullity of the switch system
// restricted to the face spanned by the positive support. For recurrent
// tracks this is Corollary-style 2g-2+l+p1+p2 / 2g-1+l+p2.
inline int cone_dimension(const TrainTrack& t) {
  const auto support = positive_support(t);
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < support.size(); ++i)
    if (support[i]) cols.push_back(i);
  if (cols.empty()) return 0;
  const QMat a = switch_matrix(t);
  QMat restricted(a.rows(), cols.size());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t j = 0; j < cols.size(); ++j) restricted(r, j) = a(r, cols[j]);
  return static_cast<int>(cols.size() - rank(restricted));
}

struct RecurrenceResult {
  bool recurrent = false;
  TransverseMeasure witness;      // strictly positive when recurrent
  std::optional<int> zero_branch; // a branch forced to zero otherwise
};

// LP: maximize the minimum branch weight subject to switch conditions and
// unit mass. Positive optimum certifies recurrence.
inline RecurrenceResult is_recurrent(const TrainTrack& t) {
  RecurrenceResult out;
  const QMat a = switch_matrix(t);
  const std::size_t n = t.num_branches();
  LinearProgram lp(n + 1);
  const std::size_t tvar = n;
  lp.set_objective(tvar, Rat(1));
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::vector<std::pair<std::size_t, Rat>> terms;
    for (std::size_t c = 0; c < n; ++c)
      if (a(r, c) != 0) terms.push_back({c, a(r, c)});
    lp.add_eq(terms, Rat(0));
  }
  std::vector<std::pair<std::size_t, Rat>> mass;
  for (std::size_t c = 0; c < n; ++c) mass.push_back({c, Rat(1)});
  lp.add_eq(mass, Rat(1));
  for (std::size_t c = 0; c < n; ++c) lp.add_le({{tvar, Rat(1)}, {c, Rat(-1)}}, Rat(0));
  const auto res = lp.solve();
  if (res.status == LinearProgram::Status::Optimal && res.objective > 0) {
    out.recurrent = true;
    std::vector<Rat> w(res.x.begin(), res.x.begin() + static_cast<long>(n));
    out.witness = measure_from_vector(t, w);
    return out;
  }
  for (std::size_t b = 0; b < n; ++b) {
    const auto v = detail::max_branch_weight(a, n, b);
    if (!v.has_value() || *v == 0) {
      out.zero_branch = t.branches[b].id;
      break;
    }
  }
  if (!out.zero_branch && n > 0) out.zero_branch = t.branches[0].id;
  return out;
}

// Extreme rays of {x >= 0 : x in span(K)} for an integer kernel basis K
// (columns), as primitive integer vectors. Subset enumeration over tight
// coordinate sets with exact big-integer elimination.
inline std::vector<std::vector<Int>> extreme_rays_of_kernel(const std::vector<std::vector<Int>>& kcols,
                                                            std::size_t m) {
  std::vector<std::vector<Int>> rays;
  const std::size_t d = kcols.size();
  if (d == 0) return rays;
  std::set<std::vector<Int>> seen;
  std::vector<std::size_t> idx(d > 1 ? d - 1 : 0);
  // iterate over all (d-1)-subsets of the m coordinate rows
  std::vector<Int> work((d > 0 ? d - 1 : 0) * d);
  std::vector<Int> y(d), x(m);
  auto attempt = [&]() {
    const std::size_t rows = d - 1;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < d; ++j) work[i * d + j] = kcols[j][idx[i]];
    // Fraction-free elimination to row echelon; track pivot columns.
    std::vector<int> pivot_col(rows, -1);
    std::size_t r = 0;
    for (std::size_t c = 0; c < d && r < rows; ++c) {
      std::size_t piv = r;
      while (piv < rows && work[piv * d + c] == 0) ++piv;
      if (piv == rows) continue;
      if (piv != r)
        for (std::size_t j = 0; j < d; ++j) std::swap(work[r * d + j], work[piv * d + j]);
      for (std::size_t i = r + 1; i < rows; ++i) {
        if (work[i * d + c] == 0) continue;
        const Int f1 = work[r * d + c], f2 = work[i * d + c];
        for (std::size_t j = c; j < d; ++j) work[i * d + j] = work[i * d + j] * f1 - work[r * d + j] * f2;
      }
      pivot_col[r] = static_cast<int>(c);
      ++r;
    }
    if (r != rows) return;  // rank < d-1: no unique ray from this subset
    // Back-substitute: free column = the one not among pivots.
    std::vector<char> is_pivot(d, 0);
    for (std::size_t i = 0; i < rows; ++i) is_pivot[pivot_col[i]] = 1;
    std::size_t free_c = 0;
    while (free_c < d && is_pivot[free_c]) ++free_c;
    for (auto& v : y) v = 0;
    y[free_c] = 1;
    for (std::size_t i = rows; i-- > 0;) {
      const int pc = pivot_col[i];
      Int s(0);
      for (std::size_t j = pc + 1; j < d; ++j)
        if (y[j] != 0) s += work[i * d + j] * y[j];
      // work[i*d+pc] * y[pc] + s = 0 -> y[pc] = -s / work[i*d+pc]; keep integral
      const Int den = work[i * d + pc];
      if (s % den != 0) {
        // scale everything by den/gcd to stay integral
        const Int g = boost::multiprecision::gcd(s, den);
        const Int scale = den / g;
        for (auto& v : y) v *= scale;
        s *= scale;
      }
      y[pc] = -s / den;
    }
    for (std::size_t row2 = 0; row2 < m; ++row2) {
      Int s(0);
      for (std::size_t j = 0; j < d; ++j)
        if (y[j] != 0) s += kcols[j][row2] * y[j];
      x[row2] = s;
    }
    bool nonneg = true, nonpos = true, zero = true;
    for (const auto& v : x) {
      if (v > 0) { nonpos = false; zero = false; }
      if (v < 0) { nonneg = false; zero = false; }
    }
    if (zero || (!nonneg && !nonpos)) return;
    Int g(0);
    for (const auto& v : x) g = boost::multiprecision::gcd(g, v);
    std::vector<Int> prim(m);
    for (std::size_t j = 0; j < m; ++j) prim[j] = (nonpos ? -x[j] : x[j]) / g;
    if (seen.insert(prim).second) rays.push_back(prim);
  };
  if (d == 1) {
    idx.clear();
    attempt();
    return rays;
  }
  // iterative combinations
  std::vector<std::size_t> comb(d - 1);
  for (std::size_t i = 0; i < d - 1; ++i) comb[i] = i;
  for (;;) {
    idx = comb;
    attempt();
    std::size_t k = d - 1;
    while (k > 0 && comb[k - 1] == m - (d - 1) + (k - 1)) --k;
    if (k == 0) break;
    ++comb[k - 1];
    for (std::size_t j = k; j < d - 1; ++j) comb[j] = comb[j - 1] + 1;
  }
  return rays;
}

// Integer kernel basis (primitive columns) of the switch system.
inline std::vector<std::vector<Int>> integer_switch_kernel(const TrainTrack& t) {
  const auto kernel = null_space(switch_matrix(t));
  std::vector<std::vector<Int>> kcols;
  for (const auto& col : kernel) kcols.push_back(primitive_integer(col));
  return kcols;
}

// Extreme rays of {w >= 0 : Aw = 0}, normalized to primitive integral
// vectors: exact polyhedral computation over a kernel parameterization. By
// Lemma-polyhedron these are, up to scale, the vertex-cycle counting measures.
inline std::vector<TransverseMeasure> vertex_cycle_measures(const TrainTrack& t) {
  const auto rays = extreme_rays_of_kernel(integer_switch_kernel(t), t.num_branches());
  std::vector<TransverseMeasure> out;
  for (const auto& r : rays) {
    TransverseMeasure meas;
    for (std::size_t i = 0; i < t.branches.size(); ++i) meas.weights[t.branches[i].id] = Rat(r[i]);
    out.push_back(std::move(meas));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tangential measures: per-region side-mass constraints (triangle inequality
// and alternating sums) for unpunctured disks and once-punctured bigons;
// once-punctured monogons are unconstrained.

struct TangentialSystem {
  // Each constraint: sum of coeff * mu(branch) >= 0.
  std::vector<std::map<int, Rat>> constraints;
};

inline TangentialSystem tangential_system(const TrainTrack& t) {
  TangentialSystem sys;
  const auto regions = t.compute_regions();
  for (const auto& reg : regions) {
    const int k = reg.cusp_count;
    const bool constrained = (!reg.punctured && k >= 3) || (reg.punctured && k == 2);
    if (!constrained) continue;
    const auto sides = TrainTrack::region_sides(reg);
    // side mass c_i as branch-coefficient map
    std::vector<std::map<int, Rat>> side_mass(sides.size());
    for (std::size_t i = 0; i < sides.size(); ++i)
      for (int stepi : sides[i]) side_mass[i][reg.walk[stepi].branch] += 1;
    const std::size_t kk = sides.size();
    for (std::size_t i = 0; i < kk; ++i) {
      // c_{i-1} + c_{i+1} - c_i >= 0
      std::map<int, Rat> c;
      for (const auto& [b, v] : side_mass[(i + kk - 1) % kk]) c[b] += v;
      for (const auto& [b, v] : side_mass[(i + 1) % kk]) c[b] += v;
      for (const auto& [b, v] : side_mass[i]) c[b] -= v;
      sys.constraints.push_back(std::move(c));
    }
    for (std::size_t j = 0; j < kk; ++j) {
      // sum_{i=0}^{k-1} (-1)^i c_{(j+i) mod k} >= 0
      std::map<int, Rat> c;
      for (std::size_t i = 0; i < kk; ++i) {
        const Rat sign = (i % 2 == 0) ? Rat(1) : Rat(-1);
        for (const auto& [b, v] : side_mass[(j + i) % kk]) c[b] += sign * v;
      }
      sys.constraints.push_back(std::move(c));
    }
  }
  return sys;
}

inline bool satisfies_tangential_constraints(const TrainTrack& t, const TangentialMeasure& m) {
  for (const auto& c : tangential_system(t).constraints) {
    Rat s(0);
    for (const auto& [b, v] : c) s += v * m.weight(b);
    if (s < 0) return false;
  }
  return true;
}

struct TransverseRecurrenceResult {
  bool transversely_recurrent = false;
  TangentialMeasure witness;
  std::optional<int> zero_branch;
};

inline TransverseRecurrenceResult is_transversely_recurrent(const TrainTrack& t) {
  TransverseRecurrenceResult out;
  const std::size_t n = t.num_branches();
  std::map<int, std::size_t> col;
  for (std::size_t i = 0; i < t.branches.size(); ++i) col[t.branches[i].id] = i;
  const TangentialSystem sys = tangential_system(t);
  auto build = [&](std::optional<std::size_t> maximize_branch) {
    LinearProgram lp(n + 1);
    const std::size_t tvar = n;
    if (maximize_branch)
      lp.set_objective(*maximize_branch, Rat(1));
    else
      lp.set_objective(tvar, Rat(1));
    for (const auto& c : sys.constraints) {
      std::vector<std::pair<std::size_t, Rat>> terms;
      for (const auto& [b, v] : c) terms.push_back({col.at(b), v});
      lp.add_ge(terms, Rat(0));
    }
    std::vector<std::pair<std::size_t, Rat>> mass;
    for (std::size_t c2 = 0; c2 < n; ++c2) mass.push_back({c2, Rat(1)});
    lp.add_eq(mass, Rat(1));
    if (!maximize_branch)
      for (std::size_t c2 = 0; c2 < n; ++c2) lp.add_le({{tvar, Rat(1)}, {c2, Rat(-1)}}, Rat(0));
    return lp.solve();
  };
  const auto res = build(std::nullopt);
  if (res.status == LinearProgram::Status::Optimal && res.objective > 0) {
    out.transversely_recurrent = true;
    std::vector<Rat> w(res.x.begin(), res.x.begin() + static_cast<long>(n));
    out.witness = measure_from_vector(t, w);
    return out;
  }
  for (std::size_t b = 0; b < n; ++b) {
    const auto r = build(b);
    if (r.status != LinearProgram::Status::Optimal || r.objective == 0) {
      out.zero_branch = t.branches[b].id;
      break;
    }
  }
  if (!out.zero_branch && n > 0) out.zero_branch = t.branches[0].id;
  return out;
}

// Bilinear intersection pairing sum_b nu(b) mu(b); both measures must live on
// the same track.
inline Rat intersection_pairing(const TrainTrack& t, const TransverseMeasure& nu,
                                const TangentialMeasure& mu) {
  Rat s(0);
  for (const auto& b : t.branches) s += nu.weight(b.id) * mu.weight(b.id);
  return s;
}

inline Rat restrict_measure(const TransverseMeasure& m, const std::set<int>& branch_subset) {
  Rat s(0);
  for (int id : branch_subset) s += m.weight(id);
  return s;
}

// ---------------------------------------------------------------------------
// General exact vertex enumeration for {x : Aeq x = beq, ineq_i . x >= rhs_i}
// (nonnegativity supplied by the caller as inequality rows). Used for the
// C_i(tau, eps) polytopes.

struct Polytope {
  std::size_t n = 0;
  std::vector<std::vector<Rat>> eq_lhs;
  std::vector<Rat> eq_rhs;
  std::vector<std::vector<Rat>> ineq_lhs;  // lhs . x >= rhs
  std::vector<Rat> ineq_rhs;
};

inline std::vector<std::vector<Rat>> polytope_vertices(const Polytope& p) {
  // Solve the equality system: particular solution + kernel.
  const std::size_t n = p.n;
  QMat aug(p.eq_lhs.size(), n + 1);
  for (std::size_t r = 0; r < p.eq_lhs.size(); ++r) {
    for (std::size_t c = 0; c < n; ++c) aug(r, c) = p.eq_lhs[r][c];
    aug(r, n) = p.eq_rhs[r];
  }
  // Row-reduce to find particular solution.
  std::size_t rr = 0;
  std::vector<std::size_t> pivots;
  for (std::size_t c = 0; c < n && rr < aug.rows(); ++c) {
    std::size_t piv = rr;
    while (piv < aug.rows() && aug(piv, c) == 0) ++piv;
    if (piv == aug.rows()) continue;
    for (std::size_t j = 0; j <= n; ++j) std::swap(aug(rr, j), aug(piv, j));
    const Rat inv = Rat(1) / aug(rr, c);
    for (std::size_t j = c; j <= n; ++j) aug(rr, j) *= inv;
    for (std::size_t i = 0; i < aug.rows(); ++i) {
      if (i == rr || aug(i, c) == 0) continue;
      const Rat f = aug(i, c);
      for (std::size_t j = c; j <= n; ++j) aug(i, j) -= f * aug(rr, j);
    }
    pivots.push_back(c);
    ++rr;
  }
  for (std::size_t i = rr; i < aug.rows(); ++i)
    if (aug(i, n) != 0) return {};  // inconsistent equalities
  std::vector<Rat> x0(n, Rat(0));
  for (std::size_t i = 0; i < pivots.size(); ++i) x0[pivots[i]] = aug(i, n);
  QMat eq(p.eq_lhs.size(), n);
  for (std::size_t r = 0; r < p.eq_lhs.size(); ++r)
    for (std::size_t c = 0; c < n; ++c) eq(r, c) = p.eq_lhs[r][c];
  const auto kernel = null_space(eq);
  const std::size_t d = kernel.size();

  std::vector<std::vector<Rat>> vertices;
  std::set<std::vector<Rat>> seen;
  const std::size_t q = p.ineq_lhs.size();
  // g_i(y) = ineq_i . (x0 + K y) - rhs_i
  auto dot_row = [&](std::size_t i, const std::vector<Rat>& x) {
    Rat s(0);
    for (std::size_t c = 0; c < n; ++c) s += p.ineq_lhs[i][c] * x[c];
    return s;
  };
  std::vector<std::vector<Rat>> g_lin(q, std::vector<Rat>(d, Rat(0)));
  std::vector<Rat> g_const(q);
  for (std::size_t i = 0; i < q; ++i) {
    g_const[i] = dot_row(i, x0) - p.ineq_rhs[i];
    for (std::size_t j = 0; j < d; ++j) {
      Rat s(0);
      for (std::size_t c = 0; c < n; ++c) s += p.ineq_lhs[i][c] * kernel[j][c];
      g_lin[i][j] = s;
    }
  }
  std::vector<std::size_t> idx;
  std::function<void(std::size_t, std::size_t)> choose = [&](std::size_t start, std::size_t need) {
    if (need == 0) {
      QMat sys(idx.size(), d + 1);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) sys(i, j) = g_lin[idx[i]][j];
        sys(i, d) = -g_const[idx[i]];
      }
      // Solve sys * y = rhs uniquely.
      std::size_t r2 = 0;
      std::vector<std::size_t> piv2;
      for (std::size_t c = 0; c < d && r2 < sys.rows(); ++c) {
        std::size_t piv = r2;
        while (piv < sys.rows() && sys(piv, c) == 0) ++piv;
        if (piv == sys.rows()) continue;
        for (std::size_t j = 0; j <= d; ++j) std::swap(sys(r2, j), sys(piv, j));
        const Rat inv = Rat(1) / sys(r2, c);
        for (std::size_t j = c; j <= d; ++j) sys(r2, j) *= inv;
        for (std::size_t i2 = 0; i2 < sys.rows(); ++i2) {
          if (i2 == r2 || sys(i2, c) == 0) continue;
          const Rat f = sys(i2, c);
          for (std::size_t j = c; j <= d; ++j) sys(i2, j) -= f * sys(r2, j);
        }
        piv2.push_back(c);
        ++r2;
      }
      if (piv2.size() != d) return;  // not a unique intersection point
      for (std::size_t i2 = r2; i2 < sys.rows(); ++i2)
        if (sys(i2, d) != 0) return;
      std::vector<Rat> y(d, Rat(0));
      for (std::size_t i2 = 0; i2 < d; ++i2) y[piv2[i2]] = sys(i2, d);
      std::vector<Rat> x = x0;
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t c = 0; c < n; ++c) x[c] += kernel[j][c] * y[j];
      for (std::size_t i2 = 0; i2 < q; ++i2)
        if (dot_row(i2, x) < p.ineq_rhs[i2]) return;
      if (seen.insert(x).second) vertices.push_back(std::move(x));
      return;
    }
    for (std::size_t i2 = start; i2 + need <= q; ++i2) {
      idx.push_back(i2);
      choose(i2 + 1, need - 1);
      idx.pop_back();
    }
  };
  if (d == 0) {
    bool feas = true;
    for (std::size_t i = 0; i < q; ++i) feas = feas && dot_row(i, x0) >= p.ineq_rhs[i];
    if (feas) vertices.push_back(x0);
    return vertices;
  }
  choose(0, d);
  return vertices;
}

}  // namespace traintrack
