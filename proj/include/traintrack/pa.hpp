#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "traintrack/cone.hpp"
#include "traintrack/cycles.hpp"
#include "traintrack/linalg.hpp"
#include "traintrack/moves.hpp"
#include "traintrack/track.hpp"

namespace traintrack {

// ---------------------------------------------------------------------------
// Self-carryings: a splitting/shifting sequence from tau to a track that is
// isomorphic to tau by a marked, puncture-respecting isomorphism. This is the
// artifact's representation of a mapping class phi with phi(tau) carried by
// tau; the transition matrix acts on the measure cone of tau.

struct SelfCarrying {
  TrainTrack base;
  std::vector<Move> moves;
  TrainTrack end;
  Relabeling end_to_base;  // marked isomorphism end -> base
  IMat matrix;             // A(phi, tau): V(tau) -> V(tau)
  // The isomorphism fixes every region and region side of the marked track,
  // which is this artifact's combinatorial surrogate for "preserves the
  // combinatorics"; recorded on every certificate.
  std::string combinatorics_note =
      "marked isomorphism respects puncture marks and region structure";

  std::size_t dim() const { return base.num_branches(); }
};

// Permutation matrix of the marking isomorphism: sends a tau-measure to the
// corresponding measure on the end track (weight of end branch b is the
// weight of its image in tau).
inline IMat iso_permutation(const TrainTrack& base, const TrainTrack& end, const Relabeling& iso) {
  const auto col_base = movedetail::branch_columns(base);
  const auto col_end = movedetail::branch_columns(end);
  IMat p(end.num_branches(), base.num_branches());
  for (const auto& [end_id, base_id] : iso.branch_map)
    p(col_end.at(end_id), col_base.at(base_id)) = 1;
  return p;
}

inline SelfCarrying make_self_carrying(const TrainTrack& base, const MoveSequence& seq,
                                       const Relabeling& end_to_base) {
  SelfCarrying sc;
  sc.base = base;
  sc.moves = seq.moves;
  sc.end = seq.end;
  sc.end_to_base = end_to_base;
  sc.matrix = seq.matrix * iso_permutation(base, seq.end, end_to_base);
  return sc;
}

// Replay a serialized self-carrying: re-applies the moves, re-checks the
// isomorphism and the matrix. Throws on any mismatch.
inline void verify_self_carrying(const SelfCarrying& sc) {
  MoveSequence seq = MoveSequence::identity(sc.base);
  for (const auto& mv : sc.moves) seq = extend(seq, mv);
  if (!(canonical_form(seq.end).encoding == canonical_form(sc.end).encoding))
    throw std::runtime_error("self-carrying replay: end track mismatch");
  const TrainTrack mapped = relabel(seq.end, sc.end_to_base);
  if (canonical_form(mapped, {}).encoding != canonical_form(sc.base, {}).encoding ||
      !(mapped.surface == sc.base.surface))
    throw std::runtime_error("self-carrying replay: isomorphism is not marked-track-preserving");
  // The isomorphism must be an exact relabeling onto base, not merely
  // isomorphic: compare slot structures.
  TrainTrack base_norm = sc.base;
  base_norm.normalize();
  TrainTrack mapped_norm = mapped;
  mapped_norm.normalize();
  if (!(base_norm.switches == mapped_norm.switches) || !(base_norm.branches == mapped_norm.branches))
    throw std::runtime_error("self-carrying replay: relabeled end differs from base");
  const IMat a = seq.matrix * iso_permutation(sc.base, seq.end, sc.end_to_base);
  if (!(a == sc.matrix)) throw std::runtime_error("self-carrying replay: matrix mismatch");
}

// Composition phi o psi (psi applied first): psi's sequence, then phi's moves
// transported through psi's marking isomorphism. Matrices compose as
// A(phi o psi) = A(phi) * A(psi).
inline SelfCarrying compose(const SelfCarrying& phi, const SelfCarrying& psi) {
  if (canonical_form(phi.base).encoding != canonical_form(psi.base).encoding)
    throw std::invalid_argument("compose: self-carryings live on different tracks");
  std::map<int, int> inv;  // base id -> psi.end id
  for (const auto& [end_id, base_id] : psi.end_to_base.branch_map) inv[base_id] = end_id;
  MoveSequence seq;
  seq.start = psi.base;
  seq.moves = psi.moves;
  seq.end = psi.end;
  seq.matrix = [&] {
    MoveSequence s = MoveSequence::identity(psi.base);
    for (const auto& mv : psi.moves) s = extend(s, mv);
    return s.matrix;
  }();
  for (const auto& mv : phi.moves) {
    Move m2 = mv;
    if (m2.branch >= 0) m2.branch = inv.at(m2.branch);
    seq = extend(seq, m2);
  }
  SelfCarrying out;
  out.base = phi.base;
  out.moves = seq.moves;
  out.end = seq.end;
  // iso: composite end -> base: first psi's id map (end ids live in psi.end's
  // id set), then phi's iso.
  for (const auto& [end_id, base_id] : phi.end_to_base.branch_map)
    out.end_to_base.branch_map[inv.at(end_id)] = base_id;
  // switch map: transported likewise
  std::map<int, int> inv_sw;
  for (const auto& [end_sw, base_sw] : psi.end_to_base.switch_map) inv_sw[base_sw] = end_sw;
  for (const auto& [end_sw, base_sw] : phi.end_to_base.switch_map)
    out.end_to_base.switch_map[inv_sw.at(end_sw)] = base_sw;
  out.matrix = seq.matrix * iso_permutation(out.base, out.end, out.end_to_base);
  const IMat check = phi.matrix * psi.matrix;
  if (!(check == out.matrix))
    throw std::logic_error("compose: functoriality A(phi o psi) = A(phi)A(psi) failed");
  return out;
}

inline SelfCarrying self_power(const SelfCarrying& phi, int k) {
  if (k <= 0) throw std::invalid_argument("self_power needs k >= 1");
  SelfCarrying out = phi;
  for (int i = 1; i < k; ++i) out = compose(phi, out);
  return out;
}

// ---------------------------------------------------------------------------
// Perron-Frobenius certification: positivity power, Collatz-Wielandt
// dilatation bracket, and a rigorous eigenvector enclosure from the convex
// hull of normalized matrix-power columns.

struct PACertificate {
  unsigned positivity_power = 0;
  int cw_iterations = 0;
  Rat lambda_lo, lambda_hi;
  int enclosure_power = 0;
  std::vector<Rat> evec_lo, evec_hi;  // componentwise bounds on the unit-mass PF ray
  std::string combinatorics_note;
};

struct NotPositiveResult {
  unsigned max_power_checked = 0;
};

struct DegenerateMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Collatz-Wielandt bracket from iterate v = A^K * ones.
inline std::pair<Rat, Rat> cw_bracket(const IMat& a, const std::vector<Int>& v) {
  const auto av = a.apply(v);
  Rat lo, hi;
  bool first = true;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 0) continue;
    const Rat q = Rat(av[i]) / Rat(v[i]);
    if (first || q < lo) lo = q;
    if (first || q > hi) hi = q;
    first = false;
  }
  return {lo, hi};
}

// Componentwise enclosure of the unit-mass PF eigenvector: the normalized
// columns of A^s span a shrinking hull containing it; refinement never
// revokes a closed-condition certificate.
inline void column_hull_enclosure(const IMat& apow, std::vector<Rat>& lo, std::vector<Rat>& hi) {
  const std::size_t n = apow.rows();
  lo.assign(n, Rat(0));
  hi.assign(n, Rat(0));
  for (std::size_t j = 0; j < n; ++j) {
    Int colsum(0);
    for (std::size_t i = 0; i < n; ++i) colsum += apow(i, j);
    for (std::size_t i = 0; i < n; ++i) {
      const Rat q = Rat(apow(i, j)) / Rat(colsum);
      if (j == 0 || q < lo[i]) lo[i] = q;
      if (j == 0 || q > hi[i]) hi[i] = q;
    }
  }
}

struct CertifyOptions {
  int max_iterations = 4000;
  int max_enclosure_power = 64;
  Rat enclosure_width;  // 0: same as precision
};

inline std::optional<PACertificate> certify_pa_matrix(const IMat& a, const Rat& precision,
                                                      NotPositiveResult* np = nullptr,
                                                      const CertifyOptions& opt = {}) {
  const std::size_t n = a.rows();
  if (n == 0) throw DegenerateMatrixError("empty matrix");
  for (std::size_t i = 0; i < n; ++i) {
    bool row_zero = true, col_zero = true;
    for (std::size_t j = 0; j < n; ++j) {
      row_zero = row_zero && a(i, j) == 0;
      col_zero = col_zero && a(j, i) == 0;
    }
    if (row_zero || col_zero) throw DegenerateMatrixError("zero row or column");
  }
  const auto r = positivity_power(a, static_cast<unsigned>(n));
  if (!r) {
    if (np) np->max_power_checked = static_cast<unsigned>(n);
    return std::nullopt;
  }
  PACertificate cert;
  cert.positivity_power = *r;
  std::vector<Int> v(n, Int(1));
  // warm up past the positivity power so all CW quotients are meaningful
  for (unsigned i = 0; i < *r; ++i) v = a.apply(v);
  int iters = static_cast<int>(*r);
  auto [lo, hi] = cw_bracket(a, v);
  while (hi - lo > precision && iters < opt.max_iterations) {
    v = a.apply(v);
    ++iters;
    std::tie(lo, hi) = cw_bracket(a, v);
  }
  cert.cw_iterations = iters;
  cert.lambda_lo = lo;
  cert.lambda_hi = hi;
  const Rat target = opt.enclosure_width == 0 ? precision : opt.enclosure_width;
  IMat apow = a;
  int power = 1;
  for (;;) {
    column_hull_enclosure(apow, cert.evec_lo, cert.evec_hi);
    Rat width(0);
    for (std::size_t i = 0; i < n; ++i)
      if (cert.evec_hi[i] - cert.evec_lo[i] > width) width = cert.evec_hi[i] - cert.evec_lo[i];
    if (width <= target || power >= opt.max_enclosure_power) break;
    apow = apow * a;
    ++power;
  }
  cert.enclosure_power = power;
  return cert;
}

inline std::optional<PACertificate> certify_pa(const SelfCarrying& sc, const Rat& precision,
                                               NotPositiveResult* np = nullptr,
                                               const CertifyOptions& opt = {}) {
  auto cert = certify_pa_matrix(sc.matrix, precision, np, opt);
  if (cert) cert->combinatorics_note = sc.combinatorics_note;
  return cert;
}

// ---------------------------------------------------------------------------
// Guided construction of self-carryings supported on a subtrack: follow a
// positive measure on sigma through measure-preserving splits (plus clearing
// shifts when a hanging branch blocks a large branch) until the track returns
// to the base up to an isomorphism fixing the complement pointwise.

struct SupportedWalkOptions {
  int max_steps = 4000;
  int max_returns = 24;   // returns examined for block positivity
  bool require_positive_block = true;
};

// Positive integral measure spanning the sigma-supported face of V(tau).
inline std::optional<std::vector<Int>> sigma_positive_measure(const TrainTrack& t,
                                                              const std::set<int>& sigma) {
  const QMat a = switch_matrix(t);
  const auto col = movedetail::branch_columns(t);
  // kernel of the system [switch conditions; w_b = 0 for b outside sigma]
  QMat sys(a.rows() + (t.num_branches() - sigma.size()), t.num_branches());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) sys(r, c) = a(r, c);
  std::size_t extra = a.rows();
  for (const auto& [id, c] : col)
    if (!sigma.count(id)) sys(extra++, c) = 1;
  std::vector<std::vector<Int>> kcols;
  for (const auto& kc : null_space(sys)) kcols.push_back(primitive_integer(kc));
  const auto rays = extreme_rays_of_kernel(kcols, t.num_branches());
  if (rays.empty()) return std::nullopt;
  std::vector<Int> mu(t.num_branches(), Int(0));
  Int coef(1);
  for (const auto& ray : rays) {
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += coef * ray[i];
    coef *= 3;
  }
  for (const auto& [id, c] : col)
    if (sigma.count(id) && mu[c] == 0) return std::nullopt;  // not a spanning face
  return mu;
}

struct SupportedWalkResult {
  bool found = false;
  SelfCarrying phi;
  int steps_used = 0;
  std::string failure;
};

// One mu-guided step: returns the move applied and updates mu by the exact
// preimage. Splits only at sigma branches; shifts clear hanging attachments.
inline SupportedWalkResult build_supported_self_carrying(const TrainTrack& tau,
                                                         const std::set<int>& sigma,
                                                         const SupportedWalkOptions& opt = {}) {
  SupportedWalkResult out;
  auto mu0 = sigma_positive_measure(tau, sigma);
  if (!mu0) {
    out.failure = "sigma carries no positive measure";
    return out;
  }
  std::map<int, int> pin;  // complement branches pinned by unique colors
  for (const auto& b : tau.branches)
    if (!sigma.count(b.id)) pin[b.id] = b.id;
  const std::string goal = canonical_form(tau, pin).encoding;
  const auto col0 = movedetail::branch_columns(tau);

  MoveSequence seq = MoveSequence::identity(tau);
  std::vector<Int> mu = *mu0;
  int returns_seen = 0;
  std::vector<std::pair<SelfCarrying, IMat>> candidates;

  for (int step = 0; step < opt.max_steps; ++step) {
    // Return check.
    if (step > 0 && canonical_form(seq.end, pin).encoding == goal) {
      const auto iso = find_isomorphism(seq.end, tau, pin, pin);
      if (iso) {
        SelfCarrying sc = make_self_carrying(tau, seq, *iso);
        // sigma block of A
        bool block_positive = true;
        for (int br : sigma)
          for (int bc : sigma)
            if (sc.matrix(col0.at(br), col0.at(bc)) <= 0) block_positive = false;
        if (!opt.require_positive_block || block_positive) {
          out.found = true;
          out.phi = std::move(sc);
          out.steps_used = step;
          return out;
        }
        candidates.push_back({std::move(sc), IMat()});
        if (++returns_seen >= opt.max_returns) break;
      }
    }
    const TrainTrack& cur = seq.end;
    const auto col = movedetail::branch_columns(cur);
    // Candidate split: least-id sigma branch, large in the current track,
    // with positive measure.
    int split_branch = -1;
    for (const auto& b : cur.branches) {
      if (!sigma.count(b.id)) continue;
      if (cur.branch_kind(b) != BranchKind::Large) continue;
      if (mu[col.at(b.id)] <= 0) continue;
      split_branch = b.id;
      break;
    }
    if (split_branch >= 0) {
      // Direction follows the measure: diagonal weight must stay nonnegative.
      const Branch* e = cur.branch_by_id(split_branch);
      movedetail::Surgeon sg(cur);
      const auto alpha = sg.occupant(e->ends[0].sw, Slot::SmallLeft);
      const auto beta = sg.occupant(e->ends[0].sw, Slot::SmallRight);
      const auto gamma = sg.occupant(e->ends[1].sw, Slot::SmallLeft);
      const auto delta = sg.occupant(e->ends[1].sw, Slot::SmallRight);
      const Int we = mu[col.at(split_branch)];
      const Int wa = mu[col.at(alpha.branch_id)];
      const Int wc = mu[col.at(gamma.branch_id)];
      const Int wb = mu[col.at(beta.branch_id)];
      const Int wd = mu[col.at(delta.branch_id)];
      // SplitRight: diagonal = we - wa - wc; SplitLeft: we - wb - wd.
      Move mv;
      mv.branch = split_branch;
      Int diag_r = we - wa - wc;
      Int diag_l = we - wb - wd;
      TrainTrack probe;
      bool placed = false;
      for (int attempt = 0; attempt < 2 && !placed; ++attempt) {
        const bool right = (attempt == 0) ? (diag_r >= diag_l) : (diag_r < diag_l);
        const Int diag = right ? diag_r : diag_l;
        if (diag < 0) continue;
        mv.kind = right ? Move::Kind::SplitRight : Move::Kind::SplitLeft;
        if (!move_keeps_track_valid(seq.end, mv, &probe)) continue;
        seq = extend(seq, mv);
        mu[col.at(split_branch)] = diag;
        placed = true;
      }
      if (placed) continue;
      // fall through to shifts when both split directions are invalid
    }
    // Clearing shift: a mixed sigma branch whose small end sits at a switch
    // hosting a non-sigma hanger opposite it.
    bool shifted = false;
    for (const auto& b : cur.branches) {
      if (!sigma.count(b.id)) continue;
      if (cur.branch_kind(b) != BranchKind::Mixed) continue;
      if (b.ends[0].sw == b.ends[1].sw) continue;
      Move mv;
      mv.kind = Move::Kind::Shift;
      mv.branch = b.id;
      TrainTrack probe;
      IMat mat;
      if (!move_keeps_track_valid(seq.end, mv, &probe, &mat)) continue;
      // mu preimage: mu'_b = mu_p + mu_{r_opp}
      const int small_end = b.ends[0].slot == Slot::Large ? 1 : 0;
      const BranchEnd se = b.ends[small_end];
      const BranchEnd le = b.ends[1 - small_end];
      const Slot sbar = se.slot == Slot::SmallLeft ? Slot::SmallRight : Slot::SmallLeft;
      movedetail::Surgeon sg(cur);
      const auto p = sg.occupant(se.sw, sbar);
      const auto r_opp = sg.occupant(le.sw, sbar);
      if (!sigma.count(p.branch_id)) {  // clearing a genuine hanger
        seq = extend(seq, mv);
        mu[col.at(b.id)] = mu[col.at(p.branch_id)] + mu[col.at(r_opp.branch_id)];
        shifted = true;
        break;
      }
    }
    if (shifted) continue;
    if (split_branch < 0) {
      out.failure = "no sigma-supported move available at step " + std::to_string(step);
      return out;
    }
    out.failure = "both split directions invalid at branch " + std::to_string(split_branch);
    return out;
  }

  // No single return had a positive block: try powers of the first return.
  for (auto& [cand, unused] : candidates) {
    (void)unused;
    std::vector<std::size_t> block_cols;
    const auto colb = movedetail::branch_columns(tau);
    for (int id : sigma) block_cols.push_back(colb.at(id));
    IMat block(block_cols.size(), block_cols.size());
    for (std::size_t i = 0; i < block_cols.size(); ++i)
      for (std::size_t j = 0; j < block_cols.size(); ++j)
        block(i, j) = cand.matrix(block_cols[i], block_cols[j]);
    const auto r = positivity_power(block, static_cast<unsigned>(block_cols.size()));
    if (r && *r > 1) {
      SelfCarrying powered = self_power(cand, static_cast<int>(*r));
      out.found = true;
      out.phi = std::move(powered);
      return out;
    }
    if (r && *r == 1) {
      out.found = true;
      out.phi = std::move(cand);
      return out;
    }
  }
  if (out.failure.empty())
    out.failure = "walk budget exhausted without a positive-block return (" +
                  std::to_string(returns_seen) + " returns seen)";
  return out;
}

}  // namespace traintrack
