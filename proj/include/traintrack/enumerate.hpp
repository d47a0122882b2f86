#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "traintrack/track.hpp"

namespace traintrack {

// Bounded exhaustive generation of valid tracks with a fixed switch count:
// depth-first perfect matching of slot ends with on-the-fly region closure
// pruning, fresh-switch symmetry breaking, and canonical-form deduplication.
// Minimal puncture marking: exactly the regions with <= 2 cusps are marked.

struct EnumerationOptions {
  int max_monogons = -1;                      // budget for 1-cusp regions (-1: unlimited)
  int max_bigons = -1;                        // budget for 2-cusp regions
  std::optional<std::vector<int>> disk_cusps; // exact sorted multiset of >=3-cusp region sizes
  long node_budget = -1;                      // DFS node cap (-1: unlimited)
};

struct PresetPairing {
  int end_a = -1;  // end id = 3*switch + slot
  int end_b = -1;
};

namespace enumdetail {

struct MatchState {
  int V;
  std::vector<int> partner;      // end id -> end id or -1
  std::vector<int> pair_order;   // branch creation order: flattened (e, f)
  int monogons = 0;
  int bigons = 0;
  std::vector<int> disks;        // closed disk cusp counts so far
  long nodes = 0;
};

inline int end_switch(int e) { return e / 3; }
inline Slot end_slot(int e) { return static_cast<Slot>(e % 3); }

// Trace the region walk containing directed edge (from end `e` across its
// branch to partner, then around). Returns cusp count when the walk closes,
// nullopt when it runs into an unpaired slot. Directed edge key: the end we
// depart from.
inline std::optional<int> trace_walk(const MatchState& st, int depart_end,
                                     std::vector<int>* walk_departs = nullptr) {
  int cusps = 0;
  int cur = depart_end;
  for (;;) {
    if (walk_departs) walk_departs->push_back(cur);
    const int arrive = st.partner[cur];
    if (arrive < 0) return std::nullopt;
    const Slot aslot = end_slot(arrive);
    if (aslot == Slot::SmallRight) ++cusps;
    const Slot dslot = TrainTrack::ccw_next(aslot);
    cur = 3 * end_switch(arrive) + static_cast<int>(dslot);
    if (cur == depart_end) return cusps;
  }
}

inline bool region_budget_ok(MatchState& st, int cusps, const EnumerationOptions& opt, int delta) {
  if (cusps == 0) return false;
  if (cusps == 1) {
    st.monogons += delta;
    return opt.max_monogons < 0 || st.monogons <= opt.max_monogons;
  }
  if (cusps == 2) {
    st.bigons += delta;
    return opt.max_bigons < 0 || st.bigons <= opt.max_bigons;
  }
  if (delta > 0) st.disks.push_back(cusps);
  else st.disks.pop_back();
  if (!opt.disk_cusps) return true;
  if (st.disks.size() > opt.disk_cusps->size()) return false;
  // Every closed disk size must be available in the target multiset.
  std::vector<int> sorted = st.disks;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> target = *opt.disk_cusps;
  std::size_t ti = 0;
  for (int c : sorted) {
    while (ti < target.size() && target[ti] < c) ++ti;
    if (ti >= target.size() || target[ti] != c) return false;
    ++ti;
  }
  return true;
}

}  // namespace enumdetail

// Enumerate all valid tracks (Subsurface scope, minimal marking) on V
// switches extending the preset pairings; invokes `sink` once per isomorphism
// class until it returns false. Returns false when the node budget ran out.
inline bool enumerate_tracks(int V, const EnumerationOptions& opt,
                             const std::vector<PresetPairing>& presets,
                             const std::function<bool(const TrainTrack&)>& sink) {
  using namespace enumdetail;
  MatchState st;
  st.V = V;
  st.partner.assign(3 * V, -1);
  for (const auto& p : presets) {
    if (st.partner[p.end_a] >= 0 || st.partner[p.end_b] >= 0 || p.end_a == p.end_b)
      throw std::invalid_argument("conflicting preset pairings");
    st.partner[p.end_a] = p.end_b;
    st.partner[p.end_b] = p.end_a;
  }
  // Account for regions already closed by the presets.
  std::set<int> closed_departs;
  EnumerationOptions budget_opt = opt;
  for (int e = 0; e < 3 * V; ++e) {
    if (st.partner[e] < 0 || closed_departs.count(e)) continue;
    std::vector<int> walk;
    const auto cusps = trace_walk(st, e, &walk);
    if (cusps) {
      for (int d : walk) closed_departs.insert(d);
      if (!region_budget_ok(st, *cusps, budget_opt, +1)) return true;  // presets already illegal
    }
  }

  std::set<std::string> seen;
  bool budget_ok = true;

  std::function<void()> dfs = [&]() {
    if (!budget_ok) return;
    if (opt.node_budget >= 0 && ++st.nodes > opt.node_budget) {
      budget_ok = false;
      return;
    }
    int e = -1;
    for (int i = 0; i < 3 * st.V; ++i)
      if (st.partner[i] < 0) {
        e = i;
        break;
      }
    if (e < 0) {
      // Complete matching: build and validate the track. Preset branches get
      // the low ids so gadget prefixes keep stable labels across completions.
      std::vector<Branch> branches;
      std::set<int> in_search;
      for (int x : st.pair_order) in_search.insert(x);
      int next_id = 0;
      for (int i = 0; i < 3 * st.V; ++i) {
        if (in_search.count(i)) continue;
        const int j = st.partner[i];
        if (j < i) continue;
        branches.push_back(Branch{next_id++,
                                  {BranchEnd{end_switch(i), end_slot(i)},
                                   BranchEnd{end_switch(j), end_slot(j)}}});
      }
      for (std::size_t k = 0; k + 1 < st.pair_order.size(); k += 2) {
        const int a = st.pair_order[k], b = st.pair_order[k + 1];
        branches.push_back(Branch{next_id++,
                                  {BranchEnd{end_switch(a), end_slot(a)},
                                   BranchEnd{end_switch(b), end_slot(b)}}});
      }
      std::vector<int> switches(st.V);
      for (int i = 0; i < st.V; ++i) switches[i] = i;
      TrainTrack t(Surface{0, 0}, switches, branches);
      if (!t.is_connected()) return;
      std::vector<Region> regions;
      try {
        regions = t.compute_regions();
      } catch (...) {
        return;
      }
      int n = 0;
      t.region_marks.assign(regions.size(), false);
      for (std::size_t i = 0; i < regions.size(); ++i) {
        if (regions[i].cusp_count <= 2) {
          t.region_marks[i] = true;
          ++n;
        }
      }
      const int chi = st.V - static_cast<int>(branches.size()) + static_cast<int>(regions.size());
      if ((2 - chi) % 2 != 0) return;
      const int g = (2 - chi) / 2;
      if (g < 0) return;
      t.surface = Surface{g, n};
      if (t.surface.complexity() < 1) return;
      // Region legality and genericity hold by construction (0-cusp walks are
      // pruned, <=2-cusp regions are marked, every slot is paired).
      const std::string enc = canonical_form(t).encoding;
      if (seen.insert(enc).second && !sink(t)) budget_ok = false;
      return;
    }
    // Fresh-switch symmetry breaking: among switches with all slots unpaired,
    // only the lowest-id one may be touched.
    int first_fresh = -1;
    for (int s = 0; s < st.V; ++s) {
      bool fresh = true;
      for (int k = 0; k < 3; ++k) fresh = fresh && st.partner[3 * s + k] < 0;
      if (fresh && 3 * s > e) {
        first_fresh = s;
        break;
      }
    }
    for (int f = e + 1; f < 3 * st.V; ++f) {
      if (st.partner[f] >= 0) continue;
      const int fs = end_switch(f);
      bool fresh = true;
      for (int k = 0; k < 3; ++k) fresh = fresh && st.partner[3 * fs + k] < 0;
      if (fresh && fs != first_fresh && fs != end_switch(e)) continue;
      st.partner[e] = f;
      st.partner[f] = e;
      st.pair_order.push_back(e);
      st.pair_order.push_back(f);
      // Both directed edges of the new branch can close walks; the two walks
      // coincide when the region traverses the branch in both directions.
      bool ok = true;
      std::vector<int> walk_e;
      std::optional<int> c1 = trace_walk(st, e, &walk_e);
      if (c1) ok = region_budget_ok(st, *c1, budget_opt, +1);
      std::optional<int> c2;
      if (ok) {
        bool same = false;
        if (c1)
          for (int d : walk_e) same = same || d == f;
        if (!same) {
          c2 = trace_walk(st, f);
          if (c2) ok = region_budget_ok(st, *c2, budget_opt, +1);
        }
      }
      if (ok) dfs();
      if (c2) region_budget_ok(st, *c2, budget_opt, -1);
      if (c1) region_budget_ok(st, *c1, budget_opt, -1);
      st.pair_order.pop_back();
      st.pair_order.pop_back();
      st.partner[e] = -1;
      st.partner[f] = -1;
      if (!budget_ok) return;
    }
  };
  dfs();
  return budget_ok;
}

inline bool enumerate_tracks(int V, const EnumerationOptions& opt,
                             const std::function<bool(const TrainTrack&)>& sink) {
  return enumerate_tracks(V, opt, {}, sink);
}

}  // namespace traintrack
