#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "traintrack/pa.hpp"

namespace traintrack {

// ---------------------------------------------------------------------------
// The zeta(k) construction: phi_0, phi_1, phi_2 supported on sigma_0, sigma_1,
// sigma_2 with block-form transition matrices;
//   zeta(k) = (phi0^k o phi2 o phi0^k) o (phi0^k o phi1 o phi0^k)
// is pseudo-Anosov as soon as (A2 A1)^2 is entrywise positive, where
// A_i = A(phi0^k o phi_i o phi0^k, tau).

struct BlockFormViolation : std::runtime_error {
  std::string which;
  int row, col;
  BlockFormViolation(std::string w, int r, int c)
      : std::runtime_error("block form violation in " + w + " at (" + std::to_string(r) + "," +
                           std::to_string(c) + ")"),
        which(std::move(w)),
        row(r),
        col(c) {}
};

struct ZetaFamily {
  TrainTrack tau;
  SelfCarrying phi0, phi1, phi2;
  std::set<int> sigma0, sigma1, sigma2;  // branch-id subsets of tau
  int k = 1;
  std::optional<int> twist_power;
};

namespace zetadetail {

inline std::vector<std::size_t> cols_of(const TrainTrack& t, const std::set<int>& ids) {
  const auto col = movedetail::branch_columns(t);
  std::vector<std::size_t> out;
  for (int id : ids) out.push_back(col.at(id));
  return out;
}

// Check: positive square block on `active`, identity elsewhere, no coupling.
inline void check_block_form(const IMat& a, const TrainTrack& t, const std::set<int>& active,
                             const std::string& name) {
  const auto col = movedetail::branch_columns(t);
  for (const auto& [idr, r] : col)
    for (const auto& [idc, c] : col) {
      const bool in_r = active.count(idr) > 0, in_c = active.count(idc) > 0;
      const Int& v = a(r, c);
      if (in_r && in_c) {
        if (v <= 0) throw BlockFormViolation(name + " (positive block)", idr, idc);
      } else if (!in_r && !in_c) {
        if (v != (idr == idc ? 1 : 0)) throw BlockFormViolation(name + " (identity block)", idr, idc);
      } else {
        if (v != 0) throw BlockFormViolation(name + " (coupling)", idr, idc);
      }
    }
}

}  // namespace zetadetail

// Family invariants: sigma0 = sigma1 cap sigma2; l1 = tau - sigma2;
// l2 = tau - sigma1; A(phi0) block-diagonal positive on sigma0; A(phi_i)
// positive on sigma_i, identity on the complementary l-block.
inline void validate_zeta_family(const ZetaFamily& fam) {
  std::set<int> all;
  for (const auto& b : fam.tau.branches) all.insert(b.id);
  std::set<int> inter;
  for (int id : fam.sigma1)
    if (fam.sigma2.count(id)) inter.insert(id);
  if (inter != fam.sigma0)
    throw std::invalid_argument("zeta family: sigma0 != sigma1 cap sigma2");
  for (int id : fam.sigma0)
    if (!all.count(id)) throw std::invalid_argument("zeta family: sigma0 not a branch subset");
  std::set<int> union12;
  union12.insert(fam.sigma1.begin(), fam.sigma1.end());
  union12.insert(fam.sigma2.begin(), fam.sigma2.end());
  if (union12 != all)
    throw std::invalid_argument("zeta family: sigma1 and sigma2 must cover tau (l1 = tau - sigma2, l2 = tau - sigma1)");
  if (fam.k < 1) throw std::invalid_argument("zeta family: k must be positive");
  zetadetail::check_block_form(fam.phi0.matrix, fam.tau, fam.sigma0, "A(phi0)");
  zetadetail::check_block_form(fam.phi1.matrix, fam.tau, fam.sigma1, "A(phi1)");
  zetadetail::check_block_form(fam.phi2.matrix, fam.tau, fam.sigma2, "A(phi2)");
}

struct ZetaBuild {
  SelfCarrying zeta;
  IMat a1_tilde, a2_tilde;  // A(phi0^k o phi_i o phi0^k, tau)
  bool square_positive = false;
};

// Matrix-level core of the Lemma-pA2 reduction: entrywise positivity of
// (A2 A1)^2. Exposed separately so synthetic block matrices can be checked.
inline bool zeta_square_positive(const IMat& a1_tilde, const IMat& a2_tilde) {
  const IMat prod = a2_tilde * a1_tilde;
  return (prod * prod).positive();
}

inline ZetaBuild build_zeta(const ZetaFamily& fam) {
  validate_zeta_family(fam);
  ZetaBuild out;
  const SelfCarrying p0k = self_power(fam.phi0, fam.k);
  const SelfCarrying w1 = compose(p0k, compose(fam.phi1, p0k));
  const SelfCarrying w2 = compose(p0k, compose(fam.phi2, p0k));
  out.a1_tilde = w1.matrix;
  out.a2_tilde = w2.matrix;
  out.square_positive = zeta_square_positive(out.a1_tilde, out.a2_tilde);
  if (!out.square_positive) {
    // locate a vanishing entry of (A2 A1)^2 for the report
    const IMat prod = out.a2_tilde * out.a1_tilde;
    const IMat sq = prod * prod;
    for (std::size_t r = 0; r < sq.rows(); ++r)
      for (std::size_t c = 0; c < sq.cols(); ++c)
        if (sq(r, c) <= 0)
          throw BlockFormViolation("(A2 A1)^2 not positive", static_cast<int>(r), static_cast<int>(c));
  }
  out.zeta = compose(w2, w1);
  const IMat expect = out.a2_tilde * out.a1_tilde;
  if (!(out.zeta.matrix == expect))
    throw std::logic_error("zeta: A(zeta) != A2~ * A1~");
  return out;
}

// ---------------------------------------------------------------------------
// Cone constant and the thin-part threshold.

struct ConeConstantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline IMat extract_block(const IMat& a, const std::vector<std::size_t>& cols) {
  IMat b(cols.size(), cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) b(i, j) = a(cols[i], cols[j]);
  return b;
}

// a = (1/2) min over rows of (min entry / row sum); requires a positive block.
// This is the artifact's conservative instantiation of the paper's constant.
inline Rat cone_constant(const IMat& sigma_block) {
  if (sigma_block.rows() == 0) throw ConeConstantError("empty block");
  Rat best;
  bool first = true;
  for (std::size_t i = 0; i < sigma_block.rows(); ++i) {
    Int row_min = sigma_block(i, 0), row_sum(0);
    for (std::size_t j = 0; j < sigma_block.cols(); ++j) {
      const Int& v = sigma_block(i, j);
      if (v <= 0) throw ConeConstantError("block not positive at row " + std::to_string(i));
      row_min = std::min(row_min, v);
      row_sum += v;
    }
    const Rat r = Rat(row_min) / Rat(row_sum);
    if (first || r < best) best = r;
    first = false;
  }
  return best / 2;
}

inline Rat cone_constant_of(const ZetaFamily& fam, int which) {
  const auto& phi = which == 1 ? fam.phi1 : fam.phi2;
  const auto& sigma = which == 1 ? fam.sigma1 : fam.sigma2;
  return cone_constant(extract_block(phi.matrix, zetadetail::cols_of(fam.tau, sigma)));
}

// k_hat(eps) = log2(2(1-a)/(a eps)); the gate k >= k_hat is decided exactly:
// smallest integer k with 2^k * a * eps >= 2(1-a).
inline int khat_threshold(const Rat& a, const Rat& eps) {
  if (!(eps > 0 && eps < Rat(1, 2))) throw std::invalid_argument("thin part needs eps in (0, 1/2)");
  if (!(a > 0 && a < 1)) throw std::invalid_argument("cone constant must lie in (0,1)");
  const Rat rhs = Rat(2) * (Rat(1) - a) / (a * eps);
  Rat pow(1);
  int k = 0;
  while (pow < rhs) {
    pow *= 2;
    ++k;
  }
  return k;  // smallest k with 2^k >= 2(1-a)/(a eps)
}

struct ThresholdNotMet : std::runtime_error {
  int k_required;
  ThresholdNotMet(int need, int got)
      : std::runtime_error("k = " + std::to_string(got) + " below threshold k_hat requiring k >= " +
                           std::to_string(need)),
        k_required(need) {}
};

struct PrecisionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ThinPartCertificate {
  Rat eps;
  Rat a;
  int k = 0;
  int k_required = 0;
  Rat mass_outside_sigma0;   // certified upper bound for mu(tau - sigma0)
  Rat min_sigma0_weight;     // certified lower bound over branches of sigma0
  std::vector<std::pair<std::string, Rat>> intersection_bounds;  // per cycle
  int enclosure_power = 0;
  std::string note;
};

// End-to-end thin-part certificate: the certified PF eigenvector enclosure of
// zeta(k) witnesses membership in C_0(tau, eps). The q-length conclusion is
// reported (interval [x/sqrt(2), x] with x = sum of intersection bounds), not
// re-derived.
inline ThinPartCertificate thin_certificate(const ZetaFamily& fam, const SelfCarrying& zeta,
                                            const Rat& eps, const CertifyOptions& opt = {}) {
  ThinPartCertificate cert;
  cert.eps = eps;
  cert.a = std::min(cone_constant_of(fam, 1), cone_constant_of(fam, 2));
  cert.k = fam.k;
  cert.k_required = khat_threshold(cert.a, eps);
  if (fam.k < cert.k_required) throw ThresholdNotMet(cert.k_required, fam.k);

  const auto col = movedetail::branch_columns(fam.tau);
  IMat apow = zeta.matrix;
  int power = 1;
  for (;;) {
    std::vector<Rat> lo, hi;
    column_hull_enclosure(apow, lo, hi);
    Rat outside_hi(0), inside_lo(0);
    Rat min_lo;
    bool first = true;
    for (const auto& [id, c] : col) {
      if (fam.sigma0.count(id)) {
        inside_lo += lo[c];
        if (first || lo[c] < min_lo) min_lo = lo[c];
        first = false;
      } else {
        outside_hi += hi[c];
      }
    }
    const Rat outside_bound = std::min(outside_hi, Rat(1) - inside_lo);
    if (outside_bound <= eps && min_lo >= cert.a) {
      cert.mass_outside_sigma0 = outside_bound;
      cert.min_sigma0_weight = min_lo;
      cert.enclosure_power = power;
      break;
    }
    if (power >= opt.max_enclosure_power)
      throw PrecisionError(
          "eigenvector enclosure too wide for C_0 membership; refine by raising the enclosure "
          "power beyond " +
          std::to_string(power));
    apow = apow * zeta.matrix;
    ++power;
  }
  // Intersection bounds iota(mu, c_i) <= mu(tau - sigma_i).
  for (int which : {1, 2}) {
    const auto& sigma = which == 1 ? fam.sigma1 : fam.sigma2;
    std::vector<Rat> lo, hi;
    column_hull_enclosure(apow, lo, hi);
    Rat outside(0);
    for (const auto& [id, c] : col)
      if (!sigma.count(id)) outside += hi[c];
    cert.intersection_bounds.push_back({which == 1 ? "c1" : "c2", outside});
  }
  cert.note =
      "q-length of c_i lies in [x/sqrt(2), x] with x = iota(mu,c_i)+iota(nu,c_i); the bound on "
      "iota(mu,c_i) is certified above, the geometric conclusion is consumed from the source "
      "estimates";
  return cert;
}

// ---------------------------------------------------------------------------
// Exact cone invariance: every vertex of C_i(tau,eps) maps into C_0(tau,eps)
// under the normalized action of A(phi0)^k.

struct EmptyConeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConeInvarianceResult {
  bool invariant = true;
  std::vector<Rat> counterexample;  // vertex of C_i violating C_0 after mapping
  std::size_t vertices_checked = 0;
};

inline Polytope thin_polytope(const TrainTrack& t, const std::set<int>& sigma, const Rat& eps,
                              const Rat& a) {
  const QMat sw = switch_matrix(t);
  const auto col = movedetail::branch_columns(t);
  Polytope p;
  p.n = t.num_branches();
  for (std::size_t r = 0; r < sw.rows(); ++r) {
    std::vector<Rat> row(p.n, Rat(0));
    for (std::size_t c = 0; c < p.n; ++c) row[c] = sw(r, c);
    p.eq_lhs.push_back(std::move(row));
    p.eq_rhs.push_back(Rat(0));
  }
  p.eq_lhs.push_back(std::vector<Rat>(p.n, Rat(1)));
  p.eq_rhs.push_back(Rat(1));
  for (std::size_t c = 0; c < p.n; ++c) {
    std::vector<Rat> row(p.n, Rat(0));
    row[c] = 1;
    p.ineq_lhs.push_back(std::move(row));
    p.ineq_rhs.push_back(Rat(0));
  }
  for (const auto& [id, c] : col)
    if (sigma.count(id)) {
      std::vector<Rat> row(p.n, Rat(0));
      row[c] = 1;
      p.ineq_lhs.push_back(std::move(row));
      p.ineq_rhs.push_back(a);
    }
  {
    std::vector<Rat> row(p.n, Rat(0));
    for (const auto& [id, c] : col)
      if (!sigma.count(id)) row[c] = -1;
    p.ineq_lhs.push_back(std::move(row));
    p.ineq_rhs.push_back(-eps);
  }
  return p;
}

inline ConeInvarianceResult cone_invariance_check(const TrainTrack& tau, const IMat& a_phi0, int k,
                                                  const Rat& eps, const Rat& a,
                                                  const std::set<int>& sigma_i,
                                                  const std::set<int>& sigma_0) {
  const auto vertices = polytope_vertices(thin_polytope(tau, sigma_i, eps, a));
  if (vertices.empty()) throw EmptyConeError("C_i(tau,eps) is empty");
  const IMat ak = a_phi0.pow(static_cast<unsigned long long>(k));
  const auto col = movedetail::branch_columns(tau);
  ConeInvarianceResult res;
  res.vertices_checked = vertices.size();
  const QMat akq = to_rational(ak);
  for (const auto& v : vertices) {
    std::vector<Rat> u(v.size(), Rat(0));
    for (std::size_t i = 0; i < akq.rows(); ++i)
      for (std::size_t j = 0; j < akq.cols(); ++j)
        if (akq(i, j) != 0 && v[j] != 0) u[i] += akq(i, j) * v[j];
    Rat mass(0);
    for (const auto& x : u) mass += x;
    bool ok = mass > 0;
    if (ok) {
      Rat outside(0);
      for (const auto& [id, c] : col) {
        if (sigma_0.count(id)) {
          if (u[c] < a * mass) ok = false;
        } else {
          outside += u[c];
        }
      }
      if (outside > eps * mass) ok = false;
    }
    if (!ok) {
      res.invariant = false;
      res.counterexample = v;
      return res;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Translation length bound: log lambda <= log||A1|| + log||A2|| + 4k log||B||
// with the column-sum operator norm; compared exactly as lambda_hi <= product.

struct TranslationBound {
  Int norm_a1, norm_a2, norm_b;
  Int product;  // ||A1|| ||A2|| ||B||^{4k}
  bool holds = false;
  bool degenerate = false;  // product == 1 (identity family)
};

inline TranslationBound translation_length_bound(const ZetaFamily& fam, const PACertificate& cert) {
  TranslationBound out;
  out.norm_a1 = fam.phi1.matrix.column_sum_norm();
  out.norm_a2 = fam.phi2.matrix.column_sum_norm();
  out.norm_b = fam.phi0.matrix.column_sum_norm();
  Int pow(1);
  for (int i = 0; i < 4 * fam.k; ++i) pow *= out.norm_b;
  out.product = out.norm_a1 * out.norm_a2 * pow;
  out.degenerate = out.product == 1;
  out.holds = cert.lambda_hi <= Rat(out.product);
  return out;
}

// ---------------------------------------------------------------------------
// Twist family member: phi0^k o phi2 o phi0^{2k} o D^p o phi1 o phi0^k.

struct TwistMember {
  SelfCarrying member;
  bool budget_exceeded = false;
  Int budget;
};

inline TwistMember twist_member(const ZetaFamily& fam, const SelfCarrying& dehn, int p,
                                const PACertificate& phi1_cert) {
  TwistMember out;
  // p <= u * e^{T(phi1)} with u = 1: budget = ceil(lambda_hi(phi1)).
  const Int num = boost::multiprecision::numerator(phi1_cert.lambda_hi);
  const Int den = boost::multiprecision::denominator(phi1_cert.lambda_hi);
  out.budget = num / den + (num % den == 0 ? 0 : 1);
  out.budget_exceeded = Int(p) > out.budget;
  const SelfCarrying p0k = self_power(fam.phi0, fam.k);
  SelfCarrying chain = compose(fam.phi1, p0k);
  if (p > 0) chain = compose(self_power(dehn, p), chain);
  chain = compose(p0k, compose(p0k, chain));
  chain = compose(fam.phi2, chain);
  out.member = compose(p0k, chain);
  return out;
}

// ---------------------------------------------------------------------------
// Dehn twist about a clean primitive vertex cycle, realized as a short
// splitting/shifting loop near the cycle and verified against the linear
// growth law on a spanning set of the cone.

struct DehnTwistError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline SelfCarrying dehn_twist(const TrainTrack& tau, const VertexCycle& cycle, int max_depth = 8) {
  if (!is_primitive(tau, cycle)) throw DehnTwistError("cycle not primitive");
  if (!check_clean(tau, cycle).clean) throw DehnTwistError("cycle not clean");
  std::set<int> star = cycle.branches;
  for (const auto& b : tau.branches)
    if (cycle.switches.count(b.ends[0].sw) || cycle.switches.count(b.ends[1].sw))
      star.insert(b.id);
  std::map<int, int> pin;
  for (const auto& b : tau.branches)
    if (!star.count(b.id)) pin[b.id] = b.id;
  const std::string goal = canonical_form(tau, pin).encoding;
  const auto col = movedetail::branch_columns(tau);
  const auto kernel = integer_switch_kernel(tau);

  auto accept = [&](const MoveSequence& seq) -> std::optional<SelfCarrying> {
    if (canonical_form(seq.end, pin).encoding != goal) return std::nullopt;
    const auto iso = find_isomorphism(seq.end, tau, pin, pin);
    if (!iso) return std::nullopt;
    SelfCarrying sc = make_self_carrying(tau, seq, *iso);
    if (sc.matrix == IMat::identity(tau.num_branches())) return std::nullopt;
    // Identity rows off the cycle.
    for (const auto& [idr, r] : col) {
      if (cycle.branches.count(idr)) continue;
      for (const auto& [idc, c] : col)
        if (sc.matrix(r, c) != (idr == idc ? 1 : 0)) return std::nullopt;
    }
    // Growth law on the kernel basis: (Dv)(cycle) - v(cycle) = const * v(h).
    int h = -1;
    for (const auto& b : tau.branches)
      if (!cycle.branches.count(b.id) &&
          (cycle.switches.count(b.ends[0].sw) || cycle.switches.count(b.ends[1].sw))) {
        h = b.id;
        break;
      }
    if (h < 0) return std::nullopt;
    std::optional<Rat> growth;
    for (const auto& kc : kernel) {
      std::vector<Int> dv(kc.size(), Int(0));
      for (std::size_t i = 0; i < sc.matrix.rows(); ++i)
        for (std::size_t j = 0; j < sc.matrix.cols(); ++j)
          if (sc.matrix(i, j) != 0 && kc[j] != 0) dv[i] += sc.matrix(i, j) * kc[j];
      Int delta(0);
      for (int id : cycle.branches) delta += dv[col.at(id)] - kc[col.at(id)];
      const Int vh = kc[col.at(h)];
      if (vh == 0) {
        if (delta != 0) return std::nullopt;
        continue;
      }
      const Rat ratio = Rat(delta) / Rat(vh);
      if (ratio <= 0) return std::nullopt;
      if (!growth) growth = ratio;
      else if (*growth != ratio) return std::nullopt;
    }
    if (!growth) return std::nullopt;
    return sc;
  };

  std::vector<MoveSequence> frontier{MoveSequence::identity(tau)};
  std::set<std::string> seen{canonical_form(tau, pin).encoding};
  for (int depth = 1; depth <= max_depth; ++depth) {
    std::vector<MoveSequence> next;
    for (const auto& seq : frontier) {
      for (const auto& mv : enumerate_carrying_moves(seq.end, &star)) {
        if ((mv.kind == Move::Kind::Shift) && !star.count(mv.branch)) continue;
        TrainTrack nt;
        if (!move_keeps_track_valid(seq.end, mv, &nt)) continue;
        MoveSequence ext = extend(seq, mv);
        if (auto sc = accept(ext)) return *sc;
        const std::string enc = canonical_form(nt, pin).encoding;
        if (seen.insert(enc).second) next.push_back(std::move(ext));
      }
    }
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  throw DehnTwistError("no twist realization found within depth " + std::to_string(max_depth));
}

// ---------------------------------------------------------------------------
// Escape construction: psi_i = phi1 o phi0^{k_i} o phi2 o phi0^{k_i};
// zeta_i = psi_i o ... o psi_1. Per-stage projective diameter of the image
// cone (Hilbert-style max log cross-ratio over extreme ray pairs, reported as
// the exact rational ratio) and thinness mass outside sigma_0.

struct EscapeStage {
  int k = 0;
  bool rays_positive = false;
  std::optional<Rat> diameter_ratio;  // exp of the Hilbert diameter, exact
  Rat thinness;                       // max over rays of normalized mass outside sigma0
};

struct EscapeReport {
  std::vector<EscapeStage> stages;
  bool two_stage_positive = false;  // A(psi_{i+1}) A(psi_i) entrywise positive (all i)
};

struct ScheduleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline EscapeReport escape_sequence(const ZetaFamily& fam, const std::vector<int>& schedule) {
  long long acc = 0;
  for (int k : schedule) {
    if (k < 1 || k < 2 * acc) throw ScheduleError("schedule violates k_i >= 2 sum_{j<i} k_j");
    acc += k;
  }
  EscapeReport rep;
  const IMat a0 = fam.phi0.matrix, a1 = fam.phi1.matrix, a2 = fam.phi2.matrix;
  std::vector<IMat> psi;
  for (int k : schedule) {
    const IMat a0k = a0.pow(static_cast<unsigned long long>(k));
    psi.push_back(a1 * a0k * a2 * a0k);
  }
  rep.two_stage_positive = true;
  for (std::size_t i = 0; i + 1 < psi.size(); ++i)
    rep.two_stage_positive = rep.two_stage_positive && (psi[i + 1] * psi[i]).positive();

  const auto rays0 = vertex_cycle_measures(fam.tau);
  std::vector<std::vector<Rat>> rays;
  for (const auto& r : rays0) rays.push_back(measure_vector(fam.tau, r));
  const auto col = movedetail::branch_columns(fam.tau);

  IMat z = IMat::identity(fam.tau.num_branches());
  for (std::size_t s = 0; s < psi.size(); ++s) {
    z = psi[s] * z;
    EscapeStage stage;
    stage.k = schedule[s];
    const QMat zq = to_rational(z);
    std::vector<std::vector<Rat>> img;
    for (const auto& r : rays) {
      std::vector<Rat> u(r.size(), Rat(0));
      for (std::size_t i = 0; i < zq.rows(); ++i)
        for (std::size_t j = 0; j < zq.cols(); ++j)
          if (zq(i, j) != 0 && r[j] != 0) u[i] += zq(i, j) * r[j];
      img.push_back(std::move(u));
    }
    stage.rays_positive = true;
    for (const auto& u : img)
      for (const auto& x : u) stage.rays_positive = stage.rays_positive && x > 0;
    if (stage.rays_positive) {
      Rat best(1);
      for (std::size_t a = 0; a < img.size(); ++a)
        for (std::size_t b = a + 1; b < img.size(); ++b) {
          Rat mx(0), mn(0);
          bool first = true;
          for (std::size_t i = 0; i < img[a].size(); ++i) {
            const Rat q = img[a][i] / img[b][i];
            if (first || q > mx) mx = q;
            if (first || q < mn) mn = q;
            first = false;
          }
          const Rat ratio = mx / mn;
          if (ratio > best) best = ratio;
        }
      stage.diameter_ratio = best;
    }
    Rat worst(0);
    for (const auto& u : img) {
      Rat mass(0), outside(0);
      for (const auto& [id, c] : col) {
        mass += u[c];
        if (!fam.sigma0.count(id)) outside += u[c];
      }
      if (mass > 0 && outside / mass > worst) worst = outside / mass;
    }
    stage.thinness = worst;
    rep.stages.push_back(std::move(stage));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Desk-scale census of self-carryings up to move depth, deduplicated by the
// (characteristic polynomial, cyclic move-kind word) approximation of
// conjugacy; filtered by positivity, entry-ratio bound, and dilatation cap.

struct CensusEntry {
  std::string word_key;
  std::string charpoly_key;
  int depth = 0;
  Rat lambda_lo, lambda_hi;
  int distinct_matrices = 1;  // collision flag when > 1
};

struct CensusResult {
  std::vector<CensusEntry> classes;
  std::map<std::string, long> histogram;  // dilatation bucket -> count
  long sequences_found = 0;
  bool depth_exhausted = true;
};

inline std::string census_bucket(const Rat& lo, const Rat& hi) {
  const double mid = rat_double((lo + hi) / 2);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", mid);
  return buf;
}

inline CensusResult census(const TrainTrack& tau, int depth, const Rat& ratio_bound,
                           const Rat& dilatation_cap, const Rat& precision = Rat(1, 1000000)) {
  CensusResult res;
  std::map<std::pair<std::string, std::string>, std::map<std::string, int>> classes;
  std::vector<MoveSequence> frontier{MoveSequence::identity(tau)};
  std::set<std::string> seen{canonical_form(tau).encoding};
  const std::string goal = canonical_form(tau).encoding;
  for (int d = 1; d <= depth; ++d) {
    std::vector<MoveSequence> next;
    for (const auto& seq : frontier) {
      for (const auto& mv : enumerate_carrying_moves(seq.end)) {
        TrainTrack nt;
        if (!move_keeps_track_valid(seq.end, mv, &nt)) continue;
        MoveSequence ext = extend(seq, mv);
        if (canonical_form(ext.end).encoding == goal) {
          const auto iso = find_isomorphism(ext.end, tau);
          if (iso) {
            SelfCarrying sc = make_self_carrying(tau, ext, *iso);
            ++res.sequences_found;
            // filters: positive matrix, entry ratio <= d, lambda <= cap
            if (sc.matrix.positive()) {
              Int mx = sc.matrix(0, 0), mn = sc.matrix(0, 0);
              for (std::size_t i = 0; i < sc.matrix.rows(); ++i)
                for (std::size_t j = 0; j < sc.matrix.cols(); ++j) {
                  mx = std::max(mx, sc.matrix(i, j));
                  mn = std::min(mn, sc.matrix(i, j));
                }
              if (Rat(mx) / Rat(mn) <= ratio_bound) {
                const auto cert = certify_pa_matrix(sc.matrix, precision);
                if (cert && cert->lambda_hi <= dilatation_cap && cert->lambda_lo > 1) {
                  // cyclic word of move kinds, minimal rotation
                  std::string word;
                  for (const auto& m : ext.moves) word.push_back("SLRC??"[static_cast<int>(m.kind)]);
                  std::string best = word;
                  for (std::size_t rot = 1; rot < word.size(); ++rot) {
                    std::string w2 = word.substr(rot) + word.substr(0, rot);
                    if (w2 < best) best = w2;
                  }
                  std::ostringstream cp;
                  for (const auto& cc : characteristic_polynomial(sc.matrix)) cp << rat_str(cc) << ",";
                  std::ostringstream mstr;
                  for (std::size_t i = 0; i < sc.matrix.rows(); ++i)
                    for (std::size_t j = 0; j < sc.matrix.cols(); ++j) mstr << sc.matrix(i, j).str() << ",";
                  auto& bucket = classes[{best, cp.str()}];
                  if (!bucket.count(mstr.str())) {
                    bucket[mstr.str()] = d;
                    if (bucket.size() == 1) {
                      CensusEntry e;
                      e.word_key = best;
                      e.charpoly_key = cp.str();
                      e.depth = d;
                      e.lambda_lo = cert->lambda_lo;
                      e.lambda_hi = cert->lambda_hi;
                      res.classes.push_back(e);
                      res.histogram[census_bucket(cert->lambda_lo, cert->lambda_hi)] += 1;
                    }
                  }
                }
              }
            }
          }
        }
        const std::string enc = canonical_form(nt).encoding;
        if (seen.insert(enc).second) next.push_back(std::move(ext));
      }
    }
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  // collision flags
  for (auto& e : res.classes) {
    const auto it = classes.find({e.word_key, e.charpoly_key});
    if (it != classes.end()) e.distinct_matrices = static_cast<int>(it->second.size());
  }
  return res;
}

}  // namespace traintrack
