#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "traintrack/track.hpp"

namespace traintrack {

enum class CycleKind { Circle, Dumbbell };

struct VertexCycle {
  CycleKind kind = CycleKind::Circle;
  std::set<int> branches;       // covered branch ids
  std::map<int, Int> measure;   // counting measure (segment of a dumbbell gets 2)
  std::set<int> switches;       // switches met by the cycle
  bool embedded = true;
};

namespace detail {

struct DirStep {
  int bi;   // branch array index
  int dir;  // 0: ends[0]->ends[1]
};

inline bool smooth_pair(Slot a, Slot b) {
  return (a == Slot::Large) != (b == Slot::Large);
}

// All embedded smooth closed curves, as branch-id sets (deduplicated over
// start point and direction reversal).
inline std::vector<std::vector<DirStep>> embedded_circles(const TrainTrack& t) {
  const auto table = t.slot_table();
  std::vector<std::vector<DirStep>> out;
  std::set<std::set<int>> seen;
  const int n = static_cast<int>(t.num_branches());
  for (int start = 0; start < n; ++start) {
    for (int sdir = 0; sdir < 2; ++sdir) {
      std::vector<DirStep> path;
      std::set<int> used_branches, used_switches;
      // DFS with explicit stack of (step, stage) is overkill; recursion depth
      // is bounded by branch count.
      std::function<void(int, int)> dfs = [&](int bi, int dir) {
        const Branch& b = t.branches[bi];
        const BranchEnd leave = b.ends[dir];
        const BranchEnd arrive = b.ends[1 - dir];
        if (used_branches.count(bi)) return;
        if (!path.empty()) {
          // switches strictly between steps must be fresh
          if (used_switches.count(leave.sw) && leave.sw != t.branches[path[0].bi].ends[path[0].dir].sw)
            return;
        }
        path.push_back({bi, dir});
        used_branches.insert(bi);
        used_switches.insert(leave.sw);
        const BranchEnd first_leave = t.branches[path[0].bi].ends[path[0].dir];
        if (arrive.sw == first_leave.sw && smooth_pair(arrive.slot, first_leave.slot) &&
            !used_branches.empty()) {
          std::set<int> ids;
          for (const auto& st : path) ids.insert(t.branches[st.bi].id);
          if (!seen.count(ids)) {
            seen.insert(ids);
            out.push_back(path);
          }
        }
        // Continue smoothly if the arrival switch is fresh.
        if (!used_switches.count(arrive.sw)) {
          for (int s = 0; s < 3; ++s) {
            if (!smooth_pair(arrive.slot, static_cast<Slot>(s))) continue;
            auto [nbi, nei] = table.get(arrive.sw, static_cast<Slot>(s));
            dfs(nbi, nei);
          }
        }
        used_switches.erase(leave.sw);
        used_branches.erase(bi);
        path.pop_back();
      };
      dfs(start, sdir);
    }
  }
  return out;
}

// Embedded smooth arcs from (s_from, Large) to (s_to, Large) avoiding a set of
// blocked switches/branches; used for dumbbell segments.
inline std::vector<std::vector<DirStep>> smooth_arcs_large_to_large(
    const TrainTrack& t, int s_from, int s_to, const std::set<int>& blocked_switches,
    const std::set<int>& blocked_branches) {
  const auto table = t.slot_table();
  std::vector<std::vector<DirStep>> out;
  std::vector<DirStep> path;
  std::set<int> used_branches, used_switches;
  std::function<void(int, int)> dfs = [&](int bi, int dir) {
    if (used_branches.count(bi) || blocked_branches.count(t.branches[bi].id)) return;
    const Branch& b = t.branches[bi];
    const BranchEnd arrive = b.ends[1 - dir];
    path.push_back({bi, dir});
    used_branches.insert(bi);
    if (arrive.sw == s_to && arrive.slot == Slot::Large) {
      out.push_back(path);
    } else if (!used_switches.count(arrive.sw) && !blocked_switches.count(arrive.sw) &&
               arrive.sw != s_to && arrive.sw != s_from) {
      used_switches.insert(arrive.sw);
      for (int s = 0; s < 3; ++s) {
        if (!smooth_pair(arrive.slot, static_cast<Slot>(s))) continue;
        auto [nbi, nei] = table.get(arrive.sw, static_cast<Slot>(s));
        dfs(nbi, nei);
      }
      used_switches.erase(arrive.sw);
    }
    used_branches.erase(bi);
    path.pop_back();
  };
  auto [bi0, ei0] = table.get(s_from, Slot::Large);
  dfs(bi0, ei0);
  return out;
}

// Embedded loops at switch s with the single cusp at s: leave via one small
// slot, return via the other, smooth in between.
inline std::vector<std::vector<DirStep>> cusped_loops(const TrainTrack& t, int s,
                                                      const std::set<int>& blocked_switches,
                                                      const std::set<int>& blocked_branches) {
  const auto table = t.slot_table();
  std::vector<std::vector<DirStep>> out;
  std::set<std::set<int>> seen;
  std::vector<DirStep> path;
  std::set<int> used_branches, used_switches;
  std::function<void(int, int)> dfs = [&](int bi, int dir) {
    if (used_branches.count(bi) || blocked_branches.count(t.branches[bi].id)) return;
    const Branch& b = t.branches[bi];
    const BranchEnd arrive = b.ends[1 - dir];
    path.push_back({bi, dir});
    used_branches.insert(bi);
    if (arrive.sw == s && arrive.slot != Slot::Large &&
        arrive.slot != t.branches[path[0].bi].ends[path[0].dir].slot) {
      std::set<int> ids;
      for (const auto& st : path) ids.insert(t.branches[st.bi].id);
      if (!seen.count(ids)) {
        seen.insert(ids);
        out.push_back(path);
      }
    } else if (!used_switches.count(arrive.sw) && !blocked_switches.count(arrive.sw) && arrive.sw != s) {
      used_switches.insert(arrive.sw);
      for (int sl = 0; sl < 3; ++sl) {
        if (!smooth_pair(arrive.slot, static_cast<Slot>(sl))) continue;
        auto [nbi, nei] = table.get(arrive.sw, static_cast<Slot>(sl));
        dfs(nbi, nei);
      }
      used_switches.erase(arrive.sw);
    }
    used_branches.erase(bi);
    path.pop_back();
  };
  for (Slot sl : {Slot::SmallLeft, Slot::SmallRight}) {
    auto [bi, ei] = table.get(s, sl);
    if (bi >= 0) dfs(bi, ei);
  }
  return out;
}

}  // namespace detail

// Embedded circles and dumbbells of a track. Counting measures satisfy the
// switch conditions (segment weight 2 on dumbbells).
inline std::vector<VertexCycle> find_vertex_cycles(const TrainTrack& t) {
  std::vector<VertexCycle> out;
  std::set<std::set<int>> seen;
  for (const auto& circ : detail::embedded_circles(t)) {
    VertexCycle vc;
    vc.kind = CycleKind::Circle;
    for (const auto& st : circ) {
      const Branch& b = t.branches[st.bi];
      vc.branches.insert(b.id);
      vc.measure[b.id] = 1;
      vc.switches.insert(b.ends[0].sw);
      vc.switches.insert(b.ends[1].sw);
    }
    if (seen.insert(vc.branches).second) out.push_back(std::move(vc));
  }
  // Dumbbells: two cusped loops joined by a smooth large-to-large segment.
  for (std::size_t i = 0; i < t.switches.size(); ++i) {
    for (std::size_t j = i + 1; j < t.switches.size(); ++j) {
      const int s1 = t.switches[i], s2 = t.switches[j];
      const auto loops1 = detail::cusped_loops(t, s1, {s2}, {});
      if (loops1.empty()) continue;
      const auto loops2 = detail::cusped_loops(t, s2, {s1}, {});
      if (loops2.empty()) continue;
      for (const auto& l1 : loops1) {
        std::set<int> l1_branches, l1_switches;
        for (const auto& st : l1) {
          const Branch& b = t.branches[st.bi];
          l1_branches.insert(b.id);
          l1_switches.insert(b.ends[0].sw);
          l1_switches.insert(b.ends[1].sw);
        }
        l1_switches.erase(s1);
        for (const auto& l2 : loops2) {
          std::set<int> l2_branches, l2_switches;
          bool disjoint = true;
          for (const auto& st : l2) {
            const Branch& b = t.branches[st.bi];
            if (l1_branches.count(b.id)) disjoint = false;
            l2_branches.insert(b.id);
            l2_switches.insert(b.ends[0].sw);
            l2_switches.insert(b.ends[1].sw);
          }
          l2_switches.erase(s2);
          if (!disjoint) continue;
          for (int sw : l2_switches)
            if (l1_switches.count(sw)) disjoint = false;
          if (!disjoint) continue;
          std::set<int> blocked_sw = l1_switches;
          blocked_sw.insert(l2_switches.begin(), l2_switches.end());
          std::set<int> blocked_br = l1_branches;
          blocked_br.insert(l2_branches.begin(), l2_branches.end());
          for (const auto& seg : detail::smooth_arcs_large_to_large(t, s1, s2, blocked_sw, blocked_br)) {
            VertexCycle vc;
            vc.kind = CycleKind::Dumbbell;
            for (int id : l1_branches) vc.measure[id] = 1;
            for (int id : l2_branches) vc.measure[id] = 1;
            bool clash = false;
            for (const auto& st : seg) {
              const int id = t.branches[st.bi].id;
              if (vc.measure.count(id)) clash = true;
              vc.measure[id] = 2;
            }
            if (clash) continue;
            for (const auto& [id, w] : vc.measure) vc.branches.insert(id);
            vc.switches = l1_switches;
            vc.switches.insert(l2_switches.begin(), l2_switches.end());
            vc.switches.insert(s1);
            vc.switches.insert(s2);
            for (const auto& st : seg) {
              vc.switches.insert(t.branches[st.bi].ends[0].sw);
              vc.switches.insert(t.branches[st.bi].ends[1].sw);
            }
            if (seen.insert(vc.branches).second) out.push_back(std::move(vc));
          }
        }
      }
    }
  }
  return out;
}

// Primitive vertex cycle: an embedded circle made of one large and one small
// branch of the ambient track.
inline bool is_primitive(const TrainTrack& t, const VertexCycle& c) {
  if (c.kind != CycleKind::Circle || c.branches.size() != 2) return false;
  int larges = 0, smalls = 0;
  for (int id : c.branches) {
    const BranchKind k = t.branch_kind(id);
    larges += k == BranchKind::Large ? 1 : 0;
    smalls += k == BranchKind::Small ? 1 : 0;
  }
  return larges == 1 && smalls == 1;
}

// ---------------------------------------------------------------------------
// Complement analysis for systems of disjoint embedded curves (as subtrack
// branch sets). Components of S - curves are recovered by gluing regions
// along branches not in the curve system.

struct ComplementComponent {
  std::set<int> regions;   // indices in compute_regions() order
  std::set<int> branches;  // non-curve branch ids
  std::set<int> switches;  // switches off the curves
  int punctures = 0;
  int boundary_circles = 0;
  int genus = 0;

  bool is_three_holed_sphere() const { return genus == 0 && punctures + boundary_circles == 3; }
  bool is_twice_punctured_disk() const {
    return genus == 0 && punctures == 2 && boundary_circles == 1;
  }
};

struct ComplementAnalysis {
  std::vector<ComplementComponent> components;
  // component index adjacent to each (curve index, branch id, dir) side
  std::map<std::tuple<int, int, int>, int> side_component;

  int component_of_region(int region_index) const {
    for (std::size_t i = 0; i < components.size(); ++i)
      if (components[i].regions.count(region_index)) return static_cast<int>(i);
    return -1;
  }
};

inline ComplementAnalysis analyze_complement(const TrainTrack& t,
                                             const std::vector<std::set<int>>& curves) {
  std::set<int> curve_branches;
  for (const auto& c : curves) curve_branches.insert(c.begin(), c.end());
  std::set<int> curve_switches;
  for (const auto& b : t.branches)
    if (curve_branches.count(b.id)) {
      curve_switches.insert(b.ends[0].sw);
      curve_switches.insert(b.ends[1].sw);
    }

  const auto regions = t.compute_regions();
  // region of each directed branch side
  std::map<std::pair<int, int>, int> region_of_side;
  for (std::size_t ri = 0; ri < regions.size(); ++ri)
    for (const auto& st : regions[ri].walk) region_of_side[{st.branch, st.dir}] = static_cast<int>(ri);

  // Union-find over regions, merged across non-curve branches.
  std::vector<int> parent(regions.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (const auto& b : t.branches) {
    if (curve_branches.count(b.id)) continue;
    const int r0 = region_of_side.at({b.id, 0});
    const int r1 = region_of_side.at({b.id, 1});
    parent[find(r0)] = find(r1);
  }

  ComplementAnalysis out;
  std::map<int, int> root_to_component;
  for (std::size_t ri = 0; ri < regions.size(); ++ri) {
    const int root = find(static_cast<int>(ri));
    if (!root_to_component.count(root)) {
      root_to_component[root] = static_cast<int>(out.components.size());
      out.components.push_back({});
    }
    ComplementComponent& comp = out.components[root_to_component[root]];
    comp.regions.insert(static_cast<int>(ri));
    if (ri < t.region_marks.size() && t.region_marks[ri]) ++comp.punctures;
  }
  for (const auto& b : t.branches) {
    if (curve_branches.count(b.id)) continue;
    const int ci = root_to_component[find(region_of_side.at({b.id, 0}))];
    out.components[ci].branches.insert(b.id);
    for (int e = 0; e < 2; ++e)
      if (!curve_switches.count(b.ends[e].sw)) out.components[ci].switches.insert(b.ends[e].sw);
  }
  // Boundary circles: one per (curve, side); the side's component is the one
  // holding the adjacent regions.
  for (std::size_t cix = 0; cix < curves.size(); ++cix) {
    // The two directed sides of one representative branch lie on the two
    // geometric sides of the embedded curve.
    const int rep = *curves[cix].begin();
    for (int dir = 0; dir < 2; ++dir) {
      const int ri = region_of_side.at({rep, dir});
      const int comp = root_to_component[find(ri)];
      out.side_component[{static_cast<int>(cix), rep, dir}] = comp;
      out.components[comp].boundary_circles += 1;
    }
  }
  // Genus from the interior cell complex: regions count as disks (punctures
  // are marked points inside them), boundary circles contribute zero, so
  // chi_cell = V - E + F = 2 - 2h - (boundary circles).
  for (auto& comp : out.components) {
    const int chi = static_cast<int>(comp.switches.size()) - static_cast<int>(comp.branches.size()) +
                    static_cast<int>(comp.regions.size());
    comp.genus = (2 - comp.boundary_circles - chi) / 2;
  }
  return out;
}

// Separating test via Z/2 homology of the closed surface built from the
// ribbon structure: the curve is separating iff its branch vector lies in the
// span of the region boundaries.
inline bool is_separating(const TrainTrack& t, const std::set<int>& curve) {
  const auto regions = t.compute_regions();
  std::vector<int> ids;
  for (const auto& b : t.branches) ids.push_back(b.id);
  std::map<int, int> col;
  for (std::size_t i = 0; i < ids.size(); ++i) col[ids[i]] = static_cast<int>(i);
  std::vector<std::vector<char>> rows;
  for (const auto& r : regions) {
    std::vector<char> v(ids.size(), 0);
    for (const auto& st : r.walk) v[col.at(st.branch)] ^= 1;
    rows.push_back(std::move(v));
  }
  std::vector<char> target(ids.size(), 0);
  for (int id : curve) target[col.at(id)] ^= 1;
  // GF(2) elimination: can target be expressed by rows?
  std::size_t rank_col = 0;
  for (std::size_t c = 0; c < ids.size() && rank_col < rows.size(); ++c) {
    std::size_t piv = rank_col;
    while (piv < rows.size() && !rows[piv][c]) ++piv;
    if (piv == rows.size()) continue;
    std::swap(rows[rank_col], rows[piv]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (i != rank_col && rows[i][c])
        for (std::size_t j = 0; j < ids.size(); ++j) rows[i][j] ^= rows[rank_col][j];
    if (target[c])
      for (std::size_t j = 0; j < ids.size(); ++j) target[j] ^= rows[rank_col][j];
    ++rank_col;
  }
  return std::all_of(target.begin(), target.end(), [](char x) { return x == 0; });
}

struct ElementaryCheck {
  bool elementary = false;
  bool separating = false;
  int disk_component = -1;  // twice-punctured-disk component index when separating
  std::string reason;
};

// Elementary curve: non-separating, or (n >= 2) splitting off a twice-
// punctured disk.
inline ElementaryCheck check_elementary(const TrainTrack& t, const std::set<int>& curve) {
  ElementaryCheck res;
  const auto an = analyze_complement(t, {curve});
  res.separating = an.components.size() == 2;
  if (!res.separating) {
    if (an.components.size() != 1) {
      res.reason = "curve complement has unexpected component count";
      return res;
    }
    res.elementary = true;
    return res;
  }
  if (t.surface.punctures < 2) {
    res.reason = "separating curve with fewer than two punctures";
    return res;
  }
  for (std::size_t i = 0; i < an.components.size(); ++i) {
    if (an.components[i].is_twice_punctured_disk()) {
      res.disk_component = static_cast<int>(i);
      res.elementary = true;
      return res;
    }
  }
  res.reason = "separating curve does not bound a twice-punctured disk";
  return res;
}

struct CleanCheck {
  bool clean = false;
  std::string reason;
};

// Clean primitive vertex cycle: the underlying curve is elementary and every
// branch hitting the cycle's switches from outside is small, or lives in the
// twice-punctured-disk side of a separating cycle.
inline CleanCheck check_clean(const TrainTrack& t, const VertexCycle& c) {
  CleanCheck res;
  if (!is_primitive(t, c)) {
    res.reason = "not primitive";
    return res;
  }
  const ElementaryCheck el = check_elementary(t, c.branches);
  if (!el.elementary) {
    res.reason = "underlying curve not elementary: " + el.reason;
    return res;
  }
  const auto an = analyze_complement(t, {c.branches});
  for (const auto& b : t.branches) {
    if (c.branches.count(b.id)) continue;
    const bool incident = c.switches.count(b.ends[0].sw) || c.switches.count(b.ends[1].sw);
    if (!incident) continue;
    if (t.branch_kind(b) == BranchKind::Small) continue;
    if (el.separating && el.disk_component >= 0 &&
        an.components[el.disk_component].branches.count(b.id))
      continue;
    res.reason = "incident branch " + std::to_string(b.id) + " neither small nor inside the twice-punctured disk";
    return res;
  }
  res.clean = true;
  return res;
}

}  // namespace traintrack
