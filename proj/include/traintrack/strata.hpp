#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "traintrack/cone.hpp"
#include "traintrack/cycles.hpp"
#include "traintrack/moves.hpp"
#include "traintrack/track.hpp"

namespace traintrack {

// ---------------------------------------------------------------------------
// Stratum labels and the track -> stratum classification contract.

struct StratumLabel {
  enum class Kind { Quadratic, Abelian };
  Kind kind = Kind::Quadratic;
  int genus = 0;
  std::vector<int> zero_orders;  // sorted ascending
  int poles = 0;                 // p1 (quadratic only)
  int marked_points = 0;         // p2 / n

  int dimension() const {
    const int l = static_cast<int>(zero_orders.size());
    if (kind == Kind::Abelian) return 2 * genus - 1 + l + marked_points;
    return 2 * genus - 2 + l + poles + marked_points;
  }

  bool operator==(const StratumLabel&) const = default;
  bool operator<(const StratumLabel& o) const {
    return std::tie(kind, genus, zero_orders, poles, marked_points) <
           std::tie(o.kind, o.genus, o.zero_orders, o.poles, o.marked_points);
  }

  std::string str() const {
    std::ostringstream os;
    os << (kind == Kind::Abelian ? "H(" : "Q(");
    for (std::size_t i = 0; i < zero_orders.size(); ++i) os << (i ? "," : "") << zero_orders[i];
    if (kind == Kind::Quadratic) {
      os << ";-" << poles;
      if (marked_points) os << "," << marked_points;
    } else {
      if (marked_points) os << ";" << marked_points;
    }
    os << ")[g=" << genus << ",h=" << dimension() << "]";
    return os.str();
  }
};

struct StratumError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyStratumError : StratumError {
  using StratumError::StratumError;
};

// Verbatim classification facts (Kontsevich-Zorich / Lanneau) consumed as
// data: component counts where known, names where the paper distinguishes
// them, and the one empty stratum.
struct ComponentInfo {
  bool known = false;
  bool empty = false;
  int count = 0;
  std::vector<std::string> names;
};

inline ComponentInfo component_table(const StratumLabel& s) {
  ComponentInfo info;
  const int l = static_cast<int>(s.zero_orders.size());
  if (s.kind == StratumLabel::Kind::Abelian) {
    if (l == 1 && s.zero_orders[0] == 2 * s.genus - 2) {
      info.known = true;
      if (s.genus >= 4) {
        info.count = 3;
        info.names = {"hyperelliptic", "even spin", "odd spin"};
      } else if (s.genus == 3) {
        info.count = 2;
        info.names = {"hyperelliptic", "odd spin"};
      } else if (s.genus == 2) {
        info.count = 1;
        info.names = {"even spin"};
      } else {
        info.known = false;
      }
    }
    return info;
  }
  // Quadratic. Counts ignore marked regular points: components of
  // Q(m;-p1,p2) equal those of Q(m;-p1,0).
  if (l == 1 && s.zero_orders[0] == 4 && s.genus == 2 && s.poles == 0) {
    info.known = true;
    info.empty = true;
    info.count = 0;
    return info;
  }
  if (l == 1 && s.zero_orders[0] == 12 && s.poles == 0 && s.genus == 4) {
    info.known = true;
    info.count = 2;
    info.names = {"regular", "sporadic"};
    return info;
  }
  if (l == 1 && s.zero_orders[0] == 9 && s.poles == 1 && s.genus == 3) {
    info.known = true;
    info.count = 2;
    info.names = {"regular", "sporadic"};
    return info;
  }
  if (s.poles >= 3) {
    info.known = true;
    info.count = 1;
    info.names = {"connected"};
    return info;
  }
  if (l == 1 && s.zero_orders[0] == 4 * s.genus - 4 + s.poles && s.genus != 3 && s.genus != 4) {
    info.known = true;
    info.count = 1;
    info.names = {"connected"};
    return info;
  }
  return info;
}

// Stratum of a filling recurrent track: label from topological type and
// orientability, dimension by the h-formulas. Empty strata are refused.
inline StratumLabel stratum_of(const TrainTrack& t) {
  const TopologicalType ty = topological_type(t);  // throws NotFillingError
  if (!is_recurrent(t).recurrent)
    throw StratumError("stratum_of: track is not recurrent");
  StratumLabel s;
  s.genus = t.surface.genus;
  const auto orient = is_orientable(t);
  if (orient.orientable) {
    s.kind = StratumLabel::Kind::Abelian;
    for (int m : ty.m) {
      if (m % 2 != 0) throw StratumError("orientable track with odd region order");
      s.zero_orders.push_back(m / 2);
    }
    s.poles = 0;
    s.marked_points = t.surface.punctures;  // p1 = 0 for orientable tracks
  } else {
    s.kind = StratumLabel::Kind::Quadratic;
    s.zero_orders = ty.m;
    s.poles = ty.p1;
    s.marked_points = ty.p2;
  }
  std::sort(s.zero_orders.begin(), s.zero_orders.end());
  const ComponentInfo info = component_table(s);
  if (info.known && info.empty) throw EmptyStratumError("stratum is empty: " + s.str());
  return s;
}

// ---------------------------------------------------------------------------
// Clean-cycle removal: shared machinery for the principal boundary
// (Type I / II restriction) and the special form condition (*).

enum class DegenerationKind { ShrinkingHalfPillowcase, ShrinkingCylinder };

struct CycleRemoval {
  TrainTrack residual;
  // one entry per capped boundary circle of the main component:
  //   gamma cusp count; <=2 means the new point stays marked.
  std::vector<int> gamma_cusps;
  std::vector<DegenerationKind> kinds;  // per removed cycle
  std::set<int> kept_branches;          // residual branch ids (post-merge)
  std::map<int, int> branch_rename;     // original kept id -> residual id
  std::string failure;                  // nonempty when the removal degenerates

  bool ok() const { return failure.empty(); }
};

namespace stratadetail {

// Smooth every bivalent switch of a partially stripped track; merges branch
// chains (min id survives). Fails when a stripped switch has a cusp (two
// small germs) or fewer than two germs.
inline bool smooth_stripped(TrainTrack& t, std::map<int, int>& rename, std::string& why) {
  for (;;) {
    std::map<int, std::vector<std::pair<int, int>>> at_switch;  // sw -> (branch id, end)
    for (const auto& b : t.branches)
      for (int e = 0; e < 2; ++e) at_switch[b.ends[e].sw].push_back({b.id, e});
    int target = -1;
    for (int sw : t.switches) {
      const auto it = at_switch.find(sw);
      const std::size_t deg = it == at_switch.end() ? 0 : it->second.size();
      if (deg == 3) continue;
      if (deg == 2) {
        target = sw;
        break;
      }
      if (deg == 0) {
        t.switches.erase(std::remove(t.switches.begin(), t.switches.end(), sw), t.switches.end());
        target = -2;
        break;
      }
      why = "stripped switch of valence " + std::to_string(deg);
      return false;
    }
    if (target == -2) continue;
    if (target < 0) return true;
    auto ends = at_switch[target];
    // Smooth passage requires one large and one small germ.
    const Branch* b0 = t.branch_by_id(ends[0].first);
    const Branch* b1 = t.branch_by_id(ends[1].first);
    const bool l0 = b0->ends[ends[0].second].slot == Slot::Large;
    const bool l1 = b1->ends[ends[1].second].slot == Slot::Large;
    if (l0 == l1) {
      why = "stripped switch is a stop (no smooth passage)";
      return false;
    }
    if (ends[0].first == ends[1].first) {
      why = "stripped switch closes a circle component";
      return false;
    }
    const BranchEnd far0 = b0->ends[1 - ends[0].second];
    const BranchEnd far1 = b1->ends[1 - ends[1].second];
    const int keep = std::min(ends[0].first, ends[1].first);
    const int drop = std::max(ends[0].first, ends[1].first);
    for (auto& b : t.branches)
      if (b.id == keep) {
        b.ends[0] = far0;
        b.ends[1] = far1;
      }
    t.branches.erase(std::remove_if(t.branches.begin(), t.branches.end(),
                                    [&](const Branch& b) { return b.id == drop; }),
                     t.branches.end());
    t.switches.erase(std::remove(t.switches.begin(), t.switches.end(), target), t.switches.end());
    for (auto& [from, to] : rename)
      if (to == drop) to = keep;
    rename[drop] = keep;
  }
}

}  // namespace stratadetail

// Remove one clean vertex cycle (with its incident branches and all branches
// in three-holed-sphere components of the complement); cap the boundaries.
// Marks: surviving punctures ride along; a capped boundary whose scar region
// has <= 2 cusps becomes a marked point (1 cusp: pole, 2: regular), >= 3
// cusps: the marked point is removed and the scar is a zero.
inline CycleRemoval remove_one_clean_cycle(const TrainTrack& t, const VertexCycle& cycle) {
  CycleRemoval out;
  const std::vector<VertexCycle> cycles{cycle};
  std::vector<std::set<int>> curve_sets;
  for (const auto& c : cycles) curve_sets.push_back(c.branches);
  const auto an = analyze_complement(t, curve_sets);
  int main_comp = -1;
  for (std::size_t i = 0; i < an.components.size(); ++i) {
    if (an.components[i].is_three_holed_sphere()) continue;
    if (main_comp >= 0) {
      out.failure = "complement has two non-three-holed components";
      return out;
    }
    main_comp = static_cast<int>(i);
  }
  if (main_comp < 0) {
    out.failure = "complement consists of three-holed spheres only";
    return out;
  }
  const ComplementComponent& M = an.components[main_comp];

  std::set<int> removed;
  std::set<int> cycle_switches;
  for (const auto& c : cycles) {
    removed.insert(c.branches.begin(), c.branches.end());
    cycle_switches.insert(c.switches.begin(), c.switches.end());
    out.kinds.push_back(is_separating(t, c.branches) ? DegenerationKind::ShrinkingHalfPillowcase
                                                     : DegenerationKind::ShrinkingCylinder);
  }
  for (const auto& b : t.branches) {
    if (removed.count(b.id)) continue;
    const bool incident = cycle_switches.count(b.ends[0].sw) || cycle_switches.count(b.ends[1].sw);
    const bool in_main = M.branches.count(b.id) > 0;
    if (incident || !in_main) removed.insert(b.id);
  }

  // Scar anchors: for every (cycle, side) facing the main component, one kept
  // branch side on the same region identifies the scar region later.
  const auto regions = t.compute_regions();
  std::vector<std::pair<int, int>> scar_anchors;
  for (std::size_t ci = 0; ci < cycles.size(); ++ci) {
    const int rep = *curve_sets[ci].begin();
    for (int dir = 0; dir < 2; ++dir) {
      const int comp = an.side_component.at({static_cast<int>(ci), rep, dir});
      if (comp != main_comp) continue;
      // find the region holding this side, then a kept step in it
      bool anchored = false;
      for (const auto& reg : regions) {
        bool holds = false;
        for (const auto& st : reg.walk) holds = holds || (st.branch == rep && st.dir == dir);
        if (!holds) continue;
        for (const auto& st : reg.walk)
          if (!removed.count(st.branch)) {
            scar_anchors.push_back({st.branch, st.dir});
            anchored = true;
            break;
          }
        break;
      }
      if (!anchored) {
        out.failure = "boundary scar region has no surviving branch";
        return out;
      }
    }
  }
  // Old puncture anchors on surviving branches of the main component.
  std::vector<std::pair<int, int>> mark_anchors;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (i >= t.region_marks.size() || !t.region_marks[i]) continue;
    if (!M.regions.count(static_cast<int>(i))) continue;  // puncture lost with a disk component
    bool found = false;
    for (const auto& st : regions[i].walk)
      if (!removed.count(st.branch)) {
        mark_anchors.push_back({st.branch, st.dir});
        found = true;
        break;
      }
    if (!found) {
      out.failure = "surviving puncture has no stable anchor";
      return out;
    }
  }

  TrainTrack res;
  res.surface = Surface{M.genus, 0};
  std::set<int> kept_sw;
  for (const auto& b : t.branches)
    if (!removed.count(b.id)) {
      res.branches.push_back(b);
      kept_sw.insert(b.ends[0].sw);
      kept_sw.insert(b.ends[1].sw);
    }
  res.switches.assign(kept_sw.begin(), kept_sw.end());
  std::map<int, int> rename;
  std::string why;
  if (!stratadetail::smooth_stripped(res, rename, why)) {
    out.failure = "residual does not smooth to a train track: " + why;
    return out;
  }
  res.normalize();
  if (res.branches.empty() || !res.is_connected()) {
    out.failure = "residual is empty or disconnected";
    return out;
  }

  auto renamed = [&](std::pair<int, int> anchor) {
    auto it = rename.find(anchor.first);
    return it == rename.end() ? anchor : std::pair<int, int>{it->second, anchor.second};
  };

  // Re-attach marks, then classify each scar.
  std::vector<Region> res_regions;
  try {
    res_regions = res.compute_regions();
  } catch (const std::exception& e) {
    out.failure = std::string("residual regions: ") + e.what();
    return out;
  }
  res.region_marks.assign(res_regions.size(), false);
  auto region_of_anchor = [&](std::pair<int, int> a) -> int {
    for (std::size_t i = 0; i < res_regions.size(); ++i)
      for (const auto& st : res_regions[i].walk)
        if (st.branch == a.first && st.dir == a.second) return static_cast<int>(i);
    return -1;
  };
  for (auto a : mark_anchors) {
    const int ri = region_of_anchor(renamed(a));
    if (ri < 0 || res.region_marks[ri]) {
      out.failure = "puncture mark lost or duplicated in the residual";
      return out;
    }
    res.region_marks[ri] = true;
  }
  for (auto a : scar_anchors) {
    const int ri = region_of_anchor(renamed(a));
    if (ri < 0) {
      out.failure = "scar region lost in the residual";
      return out;
    }
    const int cusps = res_regions[ri].cusp_count;
    out.gamma_cusps.push_back(cusps);
    if (cusps <= 2) {
      if (res.region_marks[ri]) {
        out.failure = "scar region already carries a puncture";
        return out;
      }
      res.region_marks[ri] = true;
    }
  }
  res.surface.punctures = static_cast<int>(std::count(res.region_marks.begin(), res.region_marks.end(), true));
  out.residual = std::move(res);
  for (const auto& b : out.residual.branches) out.kept_branches.insert(b.id);
  out.branch_rename = rename;

  const auto rep = out.residual.validate(ValidationScope::Subsurface);
  if (!rep.ok()) {
    out.failure = "residual track invalid: " + rep.violations.front();
    return out;
  }
  return out;
}

// Sequential removal of an ordered list of clean cycles: cycle k+1 is mapped
// through the renames of step k and removed from the intermediate residual.
// This realizes the composition law for the principal boundary (each step
// classifies its own scar), and instantiates condition (*) for pairs.
inline CycleRemoval remove_clean_cycles(const TrainTrack& t, const std::vector<VertexCycle>& cycles) {
  if (cycles.empty()) {
    CycleRemoval out;
    out.failure = "no cycles to remove";
    return out;
  }
  CycleRemoval acc = remove_one_clean_cycle(t, cycles[0]);
  for (std::size_t k = 1; k < cycles.size() && acc.ok(); ++k) {
    VertexCycle image;
    image.kind = cycles[k].kind;
    for (int id : cycles[k].branches) {
      auto it = acc.branch_rename.find(id);
      const int nid = it == acc.branch_rename.end() ? id : it->second;
      if (!acc.kept_branches.count(nid)) {
        acc.failure = "cycle " + std::to_string(k) + " did not survive the previous removal";
        return acc;
      }
      image.branches.insert(nid);
      image.measure[nid] = cycles[k].measure.at(id);
    }
    for (const auto& b : acc.residual.branches)
      if (image.branches.count(b.id)) {
        image.switches.insert(b.ends[0].sw);
        image.switches.insert(b.ends[1].sw);
      }
    CycleRemoval step = remove_one_clean_cycle(acc.residual, image);
    if (!step.ok()) {
      acc.failure = step.failure;
      return acc;
    }
    // Compose bookkeeping.
    acc.residual = std::move(step.residual);
    acc.kinds.push_back(step.kinds.at(0));
    for (int g : step.gamma_cusps) acc.gamma_cusps.push_back(g);
    std::map<int, int> composed;
    for (auto [from, to] : acc.branch_rename) {
      auto it = step.branch_rename.find(to);
      composed[from] = it == step.branch_rename.end() ? to : it->second;
    }
    for (auto [from, to] : step.branch_rename)
      if (!composed.count(from)) composed[from] = to;
    acc.branch_rename = std::move(composed);
    acc.kept_branches = step.kept_branches;
  }
  return acc;
}

// The sigma subtrack as a subset of the ambient track's branches: branches
// not on the cycles, not incident on their switches, and not inside
// three-holed-sphere complement components. (The capped residual track of
// remove_clean_cycles is this subset with bivalent switches smoothed.)
inline std::set<int> sigma_branch_set(const TrainTrack& t, const std::vector<VertexCycle>& cycles) {
  std::vector<std::set<int>> curves;
  for (const auto& c : cycles) curves.push_back(c.branches);
  const auto an = analyze_complement(t, curves);
  std::set<int> removed, cyc_sw;
  for (const auto& c : cycles) {
    removed.insert(c.branches.begin(), c.branches.end());
    cyc_sw.insert(c.switches.begin(), c.switches.end());
  }
  int main_comp = -1;
  for (std::size_t i = 0; i < an.components.size(); ++i)
    if (!an.components[i].is_three_holed_sphere()) main_comp = static_cast<int>(i);
  std::set<int> out;
  for (const auto& b : t.branches) {
    if (removed.count(b.id)) continue;
    if (cyc_sw.count(b.ends[0].sw) || cyc_sw.count(b.ends[1].sw)) continue;
    if (main_comp >= 0 && !an.components[main_comp].branches.count(b.id)) continue;
    out.insert(b.id);
  }
  return out;
}

struct BoundaryRestriction {
  TrainTrack residual;
  StratumLabel residual_stratum;
  DegenerationKind kind = DegenerationKind::ShrinkingCylinder;
  std::vector<int> gamma_cusps;
};

struct NotCleanError : StratumError {
  using StratumError::StratumError;
};

// Type I / II principal-boundary restriction at a single clean cycle.
inline BoundaryRestriction boundary_restriction(const TrainTrack& t, const VertexCycle& c) {
  const CleanCheck cc = check_clean(t, c);
  if (!cc.clean) throw NotCleanError("cycle not clean: " + cc.reason);
  CycleRemoval rem = remove_clean_cycles(t, {c});
  if (!rem.ok()) throw StratumError("boundary restriction failed: " + rem.failure);
  BoundaryRestriction out;
  out.kind = rem.kinds.at(0);
  out.gamma_cusps = rem.gamma_cusps;
  out.residual = rem.residual;
  out.residual_stratum = stratum_of(out.residual);
  return out;
}

// ---------------------------------------------------------------------------
// Special form: an elementary pair of clean cycles whose removal leaves a
// large track on a subsurface (condition (*)).

struct SpecialFormWitness {
  TrainTrack track;
  VertexCycle c1, c2;
  TrainTrack residual_track;
  StratumLabel residual_stratum;
  std::string largeness;  // "recurrent+transversely_recurrent"
};

struct SpecialFormFailure {
  std::string reason;
};

inline std::optional<SpecialFormWitness> check_special_form(const TrainTrack& t,
                                                            const VertexCycle& c1,
                                                            const VertexCycle& c2,
                                                            SpecialFormFailure* fail = nullptr) {
  auto reject = [&](const std::string& r) -> std::optional<SpecialFormWitness> {
    if (fail) fail->reason = r;
    return std::nullopt;
  };
  if (c1.branches == c2.branches) return reject("NotElementaryPair: cycles coincide");
  for (int b : c1.branches)
    if (c2.branches.count(b)) return reject("NotElementaryPair: cycles share a branch");
  for (int s : c1.switches)
    if (c2.switches.count(s)) return reject("NotElementaryPair: cycles share a switch");
  const CleanCheck cl1 = check_clean(t, c1);
  if (!cl1.clean) return reject("NotClean(c1): " + cl1.reason);
  const CleanCheck cl2 = check_clean(t, c2);
  if (!cl2.clean) return reject("NotClean(c2): " + cl2.reason);
  const bool sep1 = is_separating(t, c1.branches);
  const bool sep2 = is_separating(t, c2.branches);
  if (!sep1 && !sep2) {
    const auto an = analyze_complement(t, {c1.branches, c2.branches});
    if (an.components.size() != 1)
      return reject("NotElementaryPair: complement of a non-separating pair is disconnected");
  }
  CycleRemoval rem = remove_clean_cycles(t, {c1, c2});
  if (!rem.ok()) return reject("ResidualNotLarge: " + rem.failure);
  const auto rec = is_recurrent(rem.residual);
  if (!rec.recurrent)
    return reject("ResidualNotLarge: residual not recurrent (branch " +
                  std::to_string(rec.zero_branch.value_or(-1)) + " forced to zero)");
  const auto trec = is_transversely_recurrent(rem.residual);
  if (!trec.transversely_recurrent)
    return reject("ResidualNotLarge: residual not transversely recurrent");
  SpecialFormWitness w;
  w.track = t;
  w.c1 = c1;
  w.c2 = c2;
  w.residual_track = rem.residual;
  try {
    w.residual_stratum = stratum_of(rem.residual);
  } catch (const std::exception& e) {
    return reject(std::string("ResidualNotLarge: ") + e.what());
  }
  w.largeness = "recurrent+transversely_recurrent";
  return w;
}

// ---------------------------------------------------------------------------
// Spin parity for orientable single-region tracks.

struct SymplecticCurveSystem {
  // Each curve: the branches it crosses transversally (with multiplicity).
  std::vector<std::vector<int>> alpha;
  std::vector<std::vector<int>> beta;
};

// Side indices (position in the single region's cusp-to-cusp side list) of
// the two band sides of each branch.
inline std::map<int, std::pair<int, int>> branch_side_indices(const TrainTrack& t) {
  const auto regions = t.compute_regions();
  if (regions.size() != 1) throw StratumError("spin parity needs a single complementary region");
  const Region& reg = regions[0];
  const auto sides = TrainTrack::region_sides(reg);
  std::map<std::pair<int, int>, int> side_of;  // (branch, dir) -> side index
  for (std::size_t si = 0; si < sides.size(); ++si)
    for (int step : sides[si])
      side_of[{reg.walk[step].branch, reg.walk[step].dir}] = static_cast<int>(si);
  std::map<int, std::pair<int, int>> out;
  for (const auto& b : t.branches)
    out[b.id] = {side_of.at({b.id, 0}), side_of.at({b.id, 1})};
  return out;
}

inline int r_index(const TrainTrack& t, const std::vector<int>& crossings) {
  const auto sides = branch_side_indices(t);
  int r = 0;
  for (int b : crossings) {
    const auto [s1, s2] = sides.at(b);
    r += (s2 - s1 + 1) % 2;
  }
  return ((r % 2) + 2) % 2;
}

// Arf-style parity phi(tau) = sum (r(alpha_i)+1)(r(beta_i)+1) mod 2.
inline int spin_parity(const TrainTrack& t, const SymplecticCurveSystem& basis) {
  if (!is_orientable(t).orientable) throw StratumError("spin parity needs an orientable track");
  if (basis.alpha.size() != basis.beta.size())
    throw StratumError("spin parity: basis curve counts differ");
  int phi = 0;
  for (std::size_t i = 0; i < basis.alpha.size(); ++i) {
    const int ra = r_index(t, basis.alpha[i]);
    const int rb = r_index(t, basis.beta[i]);
    phi += (ra + 1) * (rb + 1);
  }
  return phi % 2;
}

}  // namespace traintrack
