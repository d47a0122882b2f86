#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "traintrack/cone.hpp"
#include "traintrack/cycles.hpp"
#include "traintrack/linalg.hpp"
#include "traintrack/track.hpp"

namespace traintrack {

// Local move schemas (fixed relabeling conventions; ids must stay stable for
// the block decompositions downstream):
//  - SplitLeft/SplitRight at a large branch e with switches s1, s2: the
//    diagonal keeps id e and sits in the two small_left (resp. small_right)
//    slots; the four outer ends are rewired end-wise, so coinciding outer
//    branches are handled uniformly.
//  - Collision at e: split, then the diagonal is removed and the two bivalent
//    switches are smoothed; each merged branch keeps the smallest id of its
//    chain.
//  - Shift along a mixed branch b (small end at (v,s), large end at (u,L)):
//    b's small end moves to the opposite small slot of v, the hanging branch
//    at (v, s-bar) moves to (u, s-bar) after the far smalls of u rotate; q
//    stays large at v, b becomes large at u.
//  - SimpleExtension / HandleAttachment grow the track inside a region;
//    subdivided host pieces keep the host id on the ends[0] side.

struct Move {
  enum class Kind { Shift, SplitLeft, SplitRight, Collision, SimpleExtension, HandleAttachment };
  Kind kind = Kind::Shift;
  int branch = -1;  // Shift/Split/Collision target
  // SimpleExtension / HandleAttachment parameters:
  int region = -1;        // canonical region index
  int step_a = -1;        // step index in the region walk
  int step_b = -1;
  int sign_a = 1;         // tangency of the new arc end: +1 toward host ends[1]
  int sign_b = 1;
  int variant = 0;        // handle wiring variant (0..3)
};

inline const char* move_kind_name(Move::Kind k) {
  switch (k) {
    case Move::Kind::Shift: return "shift";
    case Move::Kind::SplitLeft: return "split_left";
    case Move::Kind::SplitRight: return "split_right";
    case Move::Kind::Collision: return "collision";
    case Move::Kind::SimpleExtension: return "simple_extension";
    case Move::Kind::HandleAttachment: return "handle_attachment";
  }
  return "?";
}

struct MovePreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MoveResult {
  TrainTrack track;
  IMat matrix;          // carrying type: V(new)->V(old); inclusion type: V(old)->V(new)
  bool carrying = true; // false for SimpleExtension / HandleAttachment
};

namespace movedetail {

struct EndRef {
  int branch_id;
  int end_index;
};

class Surgeon {
 public:
  explicit Surgeon(const TrainTrack& t) : track_(t) {
    for (auto& b : track_.branches) by_id_[b.id] = &b;
  }

  EndRef occupant(int sw, Slot slot) const {
    for (const auto& b : track_.branches)
      for (int e = 0; e < 2; ++e)
        if (b.ends[e].sw == sw && b.ends[e].slot == slot) return {b.id, e};
    throw MovePreconditionError("vacant slot during surgery");
  }

  void place(const EndRef& ref, int sw, Slot slot) {
    Branch* b = by_id_.at(ref.branch_id);
    b->ends[ref.end_index] = BranchEnd{sw, slot};
  }

  Branch& branch(int id) { return *by_id_.at(id); }

  int fresh_branch_id() { return ++max_branch_; }
  int fresh_switch_id() {
    const int s = ++max_switch_;
    track_.switches.push_back(s);
    return s;
  }

  void init_fresh() {
    max_branch_ = track_.max_branch_id();
    max_switch_ = track_.max_switch_id();
  }

  int add_branch(BranchEnd a, BranchEnd b) {
    const int id = fresh_branch_id();
    track_.branches.push_back(Branch{id, {a, b}});
    rebuild_index();
    return id;
  }

  void remove_branch(int id) {
    track_.branches.erase(
        std::remove_if(track_.branches.begin(), track_.branches.end(),
                       [&](const Branch& b) { return b.id == id; }),
        track_.branches.end());
    rebuild_index();
  }

  void remove_switch(int sw) {
    track_.switches.erase(std::remove(track_.switches.begin(), track_.switches.end(), sw),
                          track_.switches.end());
  }

  void rebuild_index() {
    by_id_.clear();
    for (auto& b : track_.branches) by_id_[b.id] = &b;
  }

  TrainTrack take() {
    track_.normalize();
    return std::move(track_);
  }

  TrainTrack& raw() { return track_; }

 private:
  TrainTrack track_;
  std::map<int, Branch*> by_id_;
  int max_branch_ = -1;
  int max_switch_ = -1;
};

// Puncture marks ride on anchor sides (branch id, dir) chosen away from the
// surgery site, and are re-attached to the regions of the result.
inline std::vector<std::pair<int, int>> collect_mark_anchors(const TrainTrack& t,
                                                             const std::set<int>& affected) {
  std::vector<std::pair<int, int>> anchors;
  const auto regions = t.compute_regions();
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (i >= t.region_marks.size() || !t.region_marks[i]) continue;
    bool found = false;
    for (const auto& st : regions[i].walk) {
      if (affected.count(st.branch)) continue;
      anchors.push_back({st.branch, st.dir});
      found = true;
      break;
    }
    if (!found)
      throw MovePreconditionError("puncture mark has no stable anchor away from the surgery site");
  }
  return anchors;
}

inline void apply_mark_anchors(TrainTrack& t, const std::vector<std::pair<int, int>>& anchors) {
  const auto regions = t.compute_regions();
  t.region_marks.assign(regions.size(), false);
  for (const auto& [bid, dir] : anchors) {
    bool placed = false;
    for (std::size_t i = 0; i < regions.size() && !placed; ++i)
      for (const auto& st : regions[i].walk)
        if (st.branch == bid && st.dir == dir) {
          if (t.region_marks[i])
            throw MovePreconditionError("two puncture marks landed in one region");
          t.region_marks[i] = true;
          placed = true;
          break;
        }
    if (!placed) throw MovePreconditionError("puncture anchor lost by surgery");
  }
}

// dir of a step is relative to the branch's normalized end order; record
// anchors as (branch id, end-at-side) pairs that survive normalize().
inline std::map<int, std::size_t> branch_columns(const TrainTrack& t) {
  std::map<int, std::size_t> col;
  for (std::size_t i = 0; i < t.branches.size(); ++i) col[t.branches[i].id] = i;
  return col;
}

}  // namespace movedetail

inline MoveResult apply_split(const TrainTrack& t, int branch_id, bool right) {
  const Branch* e = t.branch_by_id(branch_id);
  if (!e) throw MovePreconditionError("split: no branch " + std::to_string(branch_id));
  if (t.branch_kind(*e) != BranchKind::Large)
    throw MovePreconditionError("split: branch " + std::to_string(branch_id) + " is not large");
  const int s1 = e->ends[0].sw, s2 = e->ends[1].sw;

  movedetail::Surgeon sg(t);
  sg.init_fresh();
  const auto alpha = sg.occupant(s1, Slot::SmallLeft);
  const auto beta = sg.occupant(s1, Slot::SmallRight);
  const auto gamma = sg.occupant(s2, Slot::SmallLeft);
  const auto delta = sg.occupant(s2, Slot::SmallRight);
  const movedetail::EndRef e0{branch_id, 0}, e1{branch_id, 1};

  const std::set<int> affected{branch_id};
  const auto anchors = movedetail::collect_mark_anchors(t, affected);

  if (right) {
    sg.place(beta, s1, Slot::Large);
    sg.place(gamma, s1, Slot::SmallLeft);
    sg.place(e0, s1, Slot::SmallRight);
    sg.place(delta, s2, Slot::Large);
    sg.place(alpha, s2, Slot::SmallLeft);
    sg.place(e1, s2, Slot::SmallRight);
  } else {
    sg.place(alpha, s1, Slot::Large);
    sg.place(e0, s1, Slot::SmallLeft);
    sg.place(delta, s1, Slot::SmallRight);
    sg.place(gamma, s2, Slot::Large);
    sg.place(e1, s2, Slot::SmallLeft);
    sg.place(beta, s2, Slot::SmallRight);
  }

  MoveResult res;
  res.track = sg.take();
  movedetail::apply_mark_anchors(res.track, anchors);
  const auto col = movedetail::branch_columns(t);
  const std::size_t m = t.num_branches();
  res.matrix = IMat::identity(m);
  const std::size_t erow = col.at(branch_id);
  if (right) {
    res.matrix(erow, col.at(alpha.branch_id)) += 1;
    res.matrix(erow, col.at(gamma.branch_id)) += 1;
  } else {
    res.matrix(erow, col.at(beta.branch_id)) += 1;
    res.matrix(erow, col.at(delta.branch_id)) += 1;
  }
  res.carrying = true;
  return res;
}

inline MoveResult apply_collision(const TrainTrack& t, int branch_id) {
  const Branch* e = t.branch_by_id(branch_id);
  if (!e) throw MovePreconditionError("collision: no branch " + std::to_string(branch_id));
  if (t.branch_kind(*e) != BranchKind::Large)
    throw MovePreconditionError("collision: branch is not large");
  const int s1 = e->ends[0].sw, s2 = e->ends[1].sw;
  movedetail::Surgeon sg0(t);
  const auto alpha = sg0.occupant(s1, Slot::SmallLeft);
  const auto beta = sg0.occupant(s1, Slot::SmallRight);
  const auto gamma = sg0.occupant(s2, Slot::SmallLeft);
  const auto delta = sg0.occupant(s2, Slot::SmallRight);
  if (beta.branch_id == gamma.branch_id || alpha.branch_id == delta.branch_id)
    throw MovePreconditionError("collision would create a closed circle component");
  const std::set<int> affected{branch_id, alpha.branch_id, beta.branch_id, gamma.branch_id,
                               delta.branch_id};
  const auto anchors = movedetail::collect_mark_anchors(t, affected);

  // Fused ends: after removing e the through strands identify (beta,gamma) and
  // (alpha,delta) end-to-end. Merged branches are the maximal fusion chains; a
  // chain may pass through a branch occupying two of the outer slots.
  std::map<std::pair<int, int>, std::pair<int, int>> fuse;
  auto key = [](const movedetail::EndRef& r) { return std::make_pair(r.branch_id, r.end_index); };
  fuse[key(beta)] = key(gamma);
  fuse[key(gamma)] = key(beta);
  fuse[key(alpha)] = key(delta);
  fuse[key(delta)] = key(alpha);
  std::set<int> involved{alpha.branch_id, beta.branch_id, gamma.branch_id, delta.branch_id};

  struct Chain {
    std::vector<int> ids;
    BranchEnd far0, far1;
    int keep_id;
  };
  std::vector<Chain> chains;
  std::set<int> chained;
  for (int start_id : involved) {
    if (chained.count(start_id)) continue;
    const Branch& sb = *t.branch_by_id(start_id);
    int far_end = -1;
    for (int ei = 0; ei < 2; ++ei)
      if (!fuse.count({start_id, ei})) far_end = ei;
    if (far_end < 0) continue;  // interior of some chain; reached from its ends
    Chain ch;
    ch.far0 = sb.ends[far_end];
    int cur_id = start_id, cur_exit = 1 - far_end;
    for (;;) {
      ch.ids.push_back(cur_id);
      chained.insert(cur_id);
      auto it = fuse.find({cur_id, cur_exit});
      if (it == fuse.end()) {
        ch.far1 = t.branch_by_id(cur_id)->ends[cur_exit];
        break;
      }
      const auto [nb, ne] = it->second;
      cur_id = nb;
      cur_exit = 1 - ne;
    }
    ch.keep_id = *std::min_element(ch.ids.begin(), ch.ids.end());
    chains.push_back(std::move(ch));
  }
  std::size_t covered = 0;
  for (const auto& ch : chains) covered += ch.ids.size();
  if (covered != chained.size() || chained.size() != involved.size())
    throw MovePreconditionError("collision would create a closed circle component");

  movedetail::Surgeon sg(t);
  sg.init_fresh();
  sg.remove_branch(branch_id);
  std::map<int, int> rename;
  for (const auto& ch : chains) {
    for (int id : ch.ids) rename[id] = ch.keep_id;
    for (int id : ch.ids)
      if (id != ch.keep_id) sg.remove_branch(id);
    Branch& bk = sg.branch(ch.keep_id);
    bk.ends[0] = ch.far0;
    bk.ends[1] = ch.far1;
  }
  sg.remove_switch(s1);
  sg.remove_switch(s2);

  MoveResult res;
  res.track = sg.take();
  movedetail::apply_mark_anchors(res.track, anchors);
  const auto col_old = movedetail::branch_columns(t);
  const auto col_new = movedetail::branch_columns(res.track);
  res.matrix = IMat(t.num_branches(), res.track.num_branches());
  for (const auto& [id, c_old] : col_old) {
    if (id == branch_id) continue;
    const int target = rename.count(id) ? rename.at(id) : id;
    res.matrix(c_old, col_new.at(target)) += 1;
  }
  // e carried both through strands (they may live on one merged branch).
  res.matrix(col_old.at(branch_id), col_new.at(rename.at(beta.branch_id))) += 1;
  res.matrix(col_old.at(branch_id), col_new.at(rename.at(alpha.branch_id))) += 1;
  res.carrying = true;
  return res;
}

inline MoveResult apply_shift(const TrainTrack& t, int branch_id) {
  const Branch* b = t.branch_by_id(branch_id);
  if (!b) throw MovePreconditionError("shift: no branch " + std::to_string(branch_id));
  if (t.branch_kind(*b) != BranchKind::Mixed)
    throw MovePreconditionError("shift: branch " + std::to_string(branch_id) + " is not mixed");
  const int small_end = b->ends[0].slot == Slot::Large ? 1 : 0;
  const BranchEnd se = b->ends[small_end];
  const BranchEnd le = b->ends[1 - small_end];
  const int v = se.sw, u = le.sw;
  if (v == u) throw MovePreconditionError("shift: degenerate mixed loop");
  const Slot s = se.slot;
  const Slot sbar = s == Slot::SmallLeft ? Slot::SmallRight : Slot::SmallLeft;

  movedetail::Surgeon sg(t);
  sg.init_fresh();
  const auto p = sg.occupant(v, sbar);
  const auto r_same = sg.occupant(u, s);
  const auto r_opp = sg.occupant(u, sbar);
  const std::set<int> affected{branch_id, p.branch_id, r_same.branch_id, r_opp.branch_id};
  const auto anchors = movedetail::collect_mark_anchors(t, affected);

  sg.place(movedetail::EndRef{branch_id, small_end}, v, sbar);
  sg.place(r_same, v, s);
  sg.place(p, u, sbar);
  sg.place(r_opp, u, s);

  MoveResult res;
  res.track = sg.take();
  movedetail::apply_mark_anchors(res.track, anchors);
  const auto col = movedetail::branch_columns(t);
  res.matrix = IMat::identity(t.num_branches());
  const std::size_t brow = col.at(branch_id);
  res.matrix(brow, brow) = 0;
  res.matrix(brow, col.at(r_same.branch_id)) += 1;
  res.matrix(brow, col.at(r_opp.branch_id)) += 1;
  res.carrying = true;
  return res;
}

namespace movedetail {

// Subdivide branch h at a fresh switch; the piece keeping ends[0] keeps the
// id. `toward_end1` is the tangency sign of the small germ to be attached at
// the fresh switch; returns (switch id, small slot for the new arc, piece ids).
struct Subdivision {
  int sw;
  Slot arc_slot;
  int piece0;  // id kept by the ends[0]-side piece (== host id)
  int piece1;
};

inline Subdivision subdivide(Surgeon& sg, int host_id, bool toward_end1, bool region_right_of_dir0,
                             int walk_dir) {
  Branch& h = sg.branch(host_id);
  const BranchEnd old_e1 = h.ends[1];
  const int w = sg.fresh_switch_id();
  // Slot layout at w: if the arc germ points toward ends[1], the large germ is
  // the ends[0]-side piece; otherwise the ends[1]-side piece.
  // enter_dir: travel direction when entering w through the large piece.
  const int enter_dir = toward_end1 ? 0 : 1;
  const bool arc_right = walk_dir == enter_dir;
  const Slot arc_slot = arc_right ? Slot::SmallRight : Slot::SmallLeft;
  const Slot other_slot = arc_right ? Slot::SmallLeft : Slot::SmallRight;
  (void)region_right_of_dir0;
  if (toward_end1) {
    // large = piece0 (ends[0] side): piece0 = host, its ends[1] -> (w, Large).
    h.ends[1] = BranchEnd{w, Slot::Large};
    const int p1 = sg.add_branch(BranchEnd{w, other_slot}, old_e1);
    return Subdivision{w, arc_slot, host_id, p1};
  }
  // large = piece1 (ends[1] side): piece1 gets (w, Large).
  h.ends[1] = BranchEnd{w, other_slot};
  const int p1 = sg.add_branch(BranchEnd{w, Slot::Large}, old_e1);
  return Subdivision{w, arc_slot, host_id, p1};
}

}  // namespace movedetail

// Add a small branch across a region, connecting two non-adjacent sides: the
// inverse of removing a small branch (simple extension).
inline MoveResult apply_simple_extension(const TrainTrack& t, const Move& mv) {
  const auto regions = t.compute_regions();
  if (mv.region < 0 || mv.region >= static_cast<int>(regions.size()))
    throw MovePreconditionError("simple extension: bad region index");
  const Region& reg = regions[mv.region];
  if (reg.punctured) throw MovePreconditionError("simple extension: region is punctured");
  if (reg.cusp_count < 4) throw MovePreconditionError("simple extension: region has fewer than 4 cusps");
  const auto sides = TrainTrack::region_sides(reg);
  auto side_of_step = [&](int step) -> int {
    for (std::size_t i = 0; i < sides.size(); ++i)
      for (int s : sides[i])
        if (s == step) return static_cast<int>(i);
    return -1;
  };
  const int n = static_cast<int>(reg.walk.size());
  if (mv.step_a < 0 || mv.step_a >= n || mv.step_b < 0 || mv.step_b >= n)
    throw MovePreconditionError("simple extension: bad step index");
  const int sa = side_of_step(mv.step_a), sb = side_of_step(mv.step_b);
  const int k = static_cast<int>(sides.size());
  const int dist = std::min((sa - sb + k) % k, (sb - sa + k) % k);
  if (dist < 2) throw MovePreconditionError("simple extension: sides are adjacent");
  const RegionStep st_a = reg.walk[mv.step_a];
  const RegionStep st_b = reg.walk[mv.step_b];
  if (st_a.branch == st_b.branch)
    throw MovePreconditionError("simple extension: both ends on one branch not supported");

  const std::set<int> affected{st_a.branch, st_b.branch};
  const auto anchors = movedetail::collect_mark_anchors(t, affected);

  movedetail::Surgeon sg(t);
  sg.init_fresh();
  const auto sub_a = movedetail::subdivide(sg, st_a.branch, mv.sign_a > 0, true, st_a.dir);
  const auto sub_b = movedetail::subdivide(sg, st_b.branch, mv.sign_b > 0, true, st_b.dir);
  sg.add_branch(BranchEnd{sub_a.sw, sub_a.arc_slot}, BranchEnd{sub_b.sw, sub_b.arc_slot});

  MoveResult res;
  res.track = sg.take();
  movedetail::apply_mark_anchors(res.track, anchors);
  // Inclusion matrix V(old) -> V(new): piece rows copy the host, arc row 0.
  const auto col_old = movedetail::branch_columns(t);
  const auto col_new = movedetail::branch_columns(res.track);
  res.matrix = IMat(res.track.num_branches(), t.num_branches());
  for (const auto& [id, c_new] : col_new) {
    int source = -1;
    if (col_old.count(id)) source = id;
    else if (id == sub_a.piece1) source = st_a.branch;
    else if (id == sub_b.piece1) source = st_b.branch;
    if (source >= 0) res.matrix(c_new, col_old.at(source)) = 1;
  }
  res.carrying = false;
  return res;
}

// Attach a handle inside a complementary polygon: subdivide two branches on
// different sides, run arcs to a fresh primitive vertex cycle, raising the
// genus by one and the polygon's zero order by four.
inline MoveResult apply_handle_attachment(const TrainTrack& t, const Move& mv) {
  const auto regions = t.compute_regions();
  if (mv.region < 0 || mv.region >= static_cast<int>(regions.size()))
    throw MovePreconditionError("handle: bad region index");
  const Region& reg = regions[mv.region];
  if (reg.punctured) throw MovePreconditionError("handle: region is punctured");
  if (reg.cusp_count < 3) throw MovePreconditionError("handle: region too small");
  const auto sides = TrainTrack::region_sides(reg);
  auto side_of_step = [&](int step) -> int {
    for (std::size_t i = 0; i < sides.size(); ++i)
      for (int s : sides[i])
        if (s == step) return static_cast<int>(i);
    return -1;
  };
  const int n = static_cast<int>(reg.walk.size());
  if (mv.step_a < 0 || mv.step_a >= n || mv.step_b < 0 || mv.step_b >= n || mv.step_a == mv.step_b)
    throw MovePreconditionError("handle: bad step indices");
  if (side_of_step(mv.step_a) == side_of_step(mv.step_b))
    throw MovePreconditionError("handle: chosen sides coincide");
  const RegionStep st_a = reg.walk[mv.step_a];
  const RegionStep st_b = reg.walk[mv.step_b];
  if (st_a.branch == st_b.branch)
    throw MovePreconditionError("handle: both arcs on one branch not supported");

  const std::set<int> affected{st_a.branch, st_b.branch};
  const auto anchors = movedetail::collect_mark_anchors(t, affected);

  movedetail::Surgeon sg(t);
  sg.init_fresh();
  const auto sub_a = movedetail::subdivide(sg, st_a.branch, mv.sign_a > 0, true, st_a.dir);
  const auto sub_b = movedetail::subdivide(sg, st_b.branch, mv.sign_b > 0, true, st_b.dir);
  // Cycle switches x1, x2; large branch cycle_a in the Large slots, small
  // branch cycle_b opposite the connector arcs. The two wiring variants place
  // the small cycle branch on either side.
  const int x1 = sg.fresh_switch_id();
  const int x2 = sg.fresh_switch_id();
  const bool flip1 = mv.variant & 1;
  const bool flip2 = mv.variant & 2;
  const Slot b1_slot = flip1 ? Slot::SmallLeft : Slot::SmallRight;
  const Slot c1_slot = flip1 ? Slot::SmallRight : Slot::SmallLeft;
  const Slot b2_slot = flip2 ? Slot::SmallLeft : Slot::SmallRight;
  const Slot c2_slot = flip2 ? Slot::SmallRight : Slot::SmallLeft;
  sg.add_branch(BranchEnd{sub_a.sw, sub_a.arc_slot}, BranchEnd{x1, b1_slot});
  sg.add_branch(BranchEnd{sub_b.sw, sub_b.arc_slot}, BranchEnd{x2, b2_slot});
  sg.add_branch(BranchEnd{x1, Slot::Large}, BranchEnd{x2, Slot::Large});
  sg.add_branch(BranchEnd{x1, c1_slot}, BranchEnd{x2, c2_slot});

  MoveResult res;
  res.track = sg.take();
  res.track.surface.genus += 1;
  movedetail::apply_mark_anchors(res.track, anchors);
  const auto col_old = movedetail::branch_columns(t);
  const auto col_new = movedetail::branch_columns(res.track);
  res.matrix = IMat(res.track.num_branches(), t.num_branches());
  for (const auto& [id, c_new] : col_new) {
    int source = -1;
    if (col_old.count(id)) source = id;
    else if (id == sub_a.piece1) source = st_a.branch;
    else if (id == sub_b.piece1) source = st_b.branch;
    if (source >= 0) res.matrix(c_new, col_old.at(source)) = 1;
  }
  res.carrying = false;
  return res;
}

inline MoveResult apply_move(const TrainTrack& t, const Move& mv) {
  switch (mv.kind) {
    case Move::Kind::Shift: return apply_shift(t, mv.branch);
    case Move::Kind::SplitLeft: return apply_split(t, mv.branch, false);
    case Move::Kind::SplitRight: return apply_split(t, mv.branch, true);
    case Move::Kind::Collision: return apply_collision(t, mv.branch);
    case Move::Kind::SimpleExtension: return apply_simple_extension(t, mv);
    case Move::Kind::HandleAttachment: return apply_handle_attachment(t, mv);
  }
  throw MovePreconditionError("unknown move kind");
}

// ---------------------------------------------------------------------------
// Move sequences with composite carrying matrices. Composition convention:
// extending tau0 ->M1 tau1 ->M2 tau2 gives composite M1*M2 mapping V(tau2)
// into V(tau0) (the last move's matrix applies first to a measure).

struct MoveSequence {
  TrainTrack start;
  std::vector<Move> moves;
  TrainTrack end;
  IMat matrix;

  static MoveSequence identity(const TrainTrack& t) {
    MoveSequence s;
    s.start = t;
    s.end = t;
    s.matrix = IMat::identity(t.num_branches());
    return s;
  }
};

inline MoveSequence extend(const MoveSequence& seq, const Move& mv) {
  const MoveResult r = apply_move(seq.end, mv);
  if (!r.carrying)
    throw MovePreconditionError("move sequences compose carrying-type moves only");
  MoveSequence out;
  out.start = seq.start;
  out.moves = seq.moves;
  out.moves.push_back(mv);
  out.end = r.track;
  out.matrix = seq.matrix * r.matrix;
  return out;
}

inline MoveSequence concat(const MoveSequence& a, const MoveSequence& b) {
  MoveSequence out = a;
  for (const auto& mv : b.moves) out = extend(out, mv);
  return out;
}

struct UnsupportedSplit : std::runtime_error {
  int branch;
  explicit UnsupportedSplit(int b)
      : std::runtime_error("split at branch " + std::to_string(b) + " outside the supported subtrack"),
        branch(b) {}
};

// Validate a sequence against a supported subtrack: splits only at branches of
// sigma (shifts unrestricted), and the composite matrix acts as the identity
// on the complement coordinates.
inline MoveSequence supported_sequence(const TrainTrack& t, const std::set<int>& sigma,
                                       const std::vector<Move>& moves) {
  MoveSequence seq = MoveSequence::identity(t);
  for (const auto& mv : moves) {
    if (mv.kind == Move::Kind::SplitLeft || mv.kind == Move::Kind::SplitRight ||
        mv.kind == Move::Kind::Collision) {
      if (!sigma.count(mv.branch)) throw UnsupportedSplit(mv.branch);
    }
    if (mv.kind == Move::Kind::SimpleExtension || mv.kind == Move::Kind::HandleAttachment)
      throw MovePreconditionError("supported sequences are splitting/shifting sequences");
    seq = extend(seq, mv);
  }
  // Identity block on the complement.
  const auto col = movedetail::branch_columns(t);
  for (const auto& [id_r, cr] : col) {
    for (const auto& [id_c, cc] : col) {
      const bool row_out = !sigma.count(id_r);
      const bool col_out = !sigma.count(id_c);
      if (row_out || col_out) {
        const Int want = id_r == id_c && row_out && col_out ? Int(1) : Int(0);
        if (row_out && col_out && seq.matrix(cr, cc) != want)
          throw MovePreconditionError("composite matrix is not the identity on the complement block");
        if (row_out != col_out && seq.matrix(cr, cc) != 0)
          throw MovePreconditionError("composite matrix couples sigma with its complement");
      }
    }
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Bounded-depth searches over splitting/shifting sequences.

inline std::vector<Move> enumerate_carrying_moves(const TrainTrack& t,
                                                  const std::set<int>* split_whitelist = nullptr,
                                                  bool include_shifts = true) {
  std::vector<Move> out;
  for (const auto& b : t.branches) {
    const BranchKind k = t.branch_kind(b);
    if (k == BranchKind::Large) {
      if (split_whitelist && !split_whitelist->count(b.id)) continue;
      out.push_back(Move{Move::Kind::SplitLeft, b.id});
      out.push_back(Move{Move::Kind::SplitRight, b.id});
    } else if (include_shifts && k == BranchKind::Mixed &&
               b.ends[0].sw != b.ends[1].sw) {
      out.push_back(Move{Move::Kind::Shift, b.id});
    }
  }
  return out;
}

inline bool move_keeps_track_valid(const TrainTrack& t, const Move& mv, TrainTrack* out,
                                   IMat* matrix = nullptr) {
  try {
    MoveResult r = apply_move(t, mv);
    if (!r.track.validate(ValidationScope::Subsurface).ok()) return false;
    if (out) *out = std::move(r.track);
    if (matrix) *matrix = std::move(r.matrix);
    return true;
  } catch (const MovePreconditionError&) {
    return false;
  }
}

struct CarryingSearchResult {
  bool found = false;
  MoveSequence sequence;
  Relabeling end_to_candidate;  // marked isomorphism end -> candidate
  int explored_depth = 0;
};

// Breadth-first search for a splitting/shifting sequence from `target` whose
// endpoint is isomorphic to `candidate` (marked, puncture-respecting).
// Honest semi-decision: NotFound only means "not within depth_limit".
inline CarryingSearchResult find_carrying(const TrainTrack& candidate, const TrainTrack& target,
                                          int depth_limit) {
  CarryingSearchResult res;
  const std::string goal = canonical_form(candidate).encoding;
  std::vector<MoveSequence> frontier{MoveSequence::identity(target)};
  std::set<std::string> seen{canonical_form(target).encoding};
  if (canonical_form(target).encoding == goal) {
    res.found = true;
    res.sequence = frontier[0];
    res.end_to_candidate = *find_isomorphism(target, candidate);
    return res;
  }
  for (int depth = 1; depth <= depth_limit; ++depth) {
    std::vector<MoveSequence> next;
    for (const auto& seq : frontier) {
      for (const auto& mv : enumerate_carrying_moves(seq.end)) {
        TrainTrack nt;
        if (!move_keeps_track_valid(seq.end, mv, &nt)) continue;
        const std::string enc = canonical_form(nt).encoding;
        if (enc == goal) {
          res.found = true;
          res.sequence = extend(seq, mv);
          res.end_to_candidate = *find_isomorphism(res.sequence.end, candidate);
          res.explored_depth = depth;
          return res;
        }
        if (seen.insert(enc).second) next.push_back(extend(seq, mv));
      }
    }
    frontier = std::move(next);
    res.explored_depth = depth;
    if (frontier.empty()) break;
  }
  return res;
}

}  // namespace traintrack
