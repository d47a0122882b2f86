#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "traintrack/rational.hpp"

namespace traintrack {

struct Surface {
  int genus = 0;
  int punctures = 0;

  int euler_characteristic() const { return 2 - 2 * genus - punctures; }
  int complexity() const { return 3 * genus - 3 + punctures; }
  bool operator==(const Surface&) const = default;
};

// Slot of a trivalent switch. The local embedding convention: traveling along
// the track entering a switch through its large half-branch, small_left is the
// small half-branch on the left of the travel direction for the counter-
// clockwise surface orientation. Counterclockwise rotational order of the
// germs at a switch is therefore (large, small_right, small_left).
enum class Slot : std::uint8_t { Large = 0, SmallLeft = 1, SmallRight = 2 };

inline const char* slot_name(Slot s) {
  switch (s) {
    case Slot::Large: return "large";
    case Slot::SmallLeft: return "small_left";
    case Slot::SmallRight: return "small_right";
  }
  return "?";
}

inline std::optional<Slot> slot_from_name(const std::string& s) {
  if (s == "large") return Slot::Large;
  if (s == "small_left") return Slot::SmallLeft;
  if (s == "small_right") return Slot::SmallRight;
  return std::nullopt;
}

struct BranchEnd {
  int sw = -1;
  Slot slot = Slot::Large;
  bool operator==(const BranchEnd&) const = default;
  auto operator<=>(const BranchEnd& o) const {
    if (auto c = sw <=> o.sw; c != 0) return c;
    return static_cast<int>(slot) <=> static_cast<int>(o.slot);
  }
};

struct Branch {
  int id = -1;
  std::array<BranchEnd, 2> ends;
  bool operator==(const Branch&) const = default;
};

enum class BranchKind { Large, Small, Mixed };

struct RegionStep {
  int branch = -1;  // branch id
  int dir = 0;      // 0: ends[0] -> ends[1], 1: reverse
  bool cusp_after = false;
  bool operator==(const RegionStep&) const = default;
  auto operator<=>(const RegionStep&) const = default;
};

// Complementary region of the fattened ribbon graph: a cyclic boundary walk,
// its cusp count and the puncture flag. Index contribution to Gauss-Bonnet is
// 2 - cusps for unpunctured disks and -cusps for punctured ones.
struct Region {
  std::vector<RegionStep> walk;
  int cusp_count = 0;
  bool punctured = false;
};

enum class ValidationScope { Ambient, Subsurface };

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

class TrainTrack {
 public:
  Surface surface;
  std::vector<int> switches;       // sorted, unique
  std::vector<Branch> branches;    // sorted by id
  std::vector<bool> region_marks;  // aligned with compute_regions() order

  TrainTrack() = default;
  TrainTrack(Surface s, std::vector<int> sw, std::vector<Branch> br, std::vector<bool> marks = {})
      : surface(s), switches(std::move(sw)), branches(std::move(br)), region_marks(std::move(marks)) {
    normalize();
  }

  void normalize() {
    std::sort(switches.begin(), switches.end());
    switches.erase(std::unique(switches.begin(), switches.end()), switches.end());
    for (auto& b : branches)
      if (b.ends[1] < b.ends[0]) std::swap(b.ends[0], b.ends[1]);
    std::sort(branches.begin(), branches.end(),
              [](const Branch& a, const Branch& b) { return a.id < b.id; });
  }

  std::size_t num_switches() const { return switches.size(); }
  std::size_t num_branches() const { return branches.size(); }

  int branch_index(int id) const {
    for (std::size_t i = 0; i < branches.size(); ++i)
      if (branches[i].id == id) return static_cast<int>(i);
    return -1;
  }

  const Branch* branch_by_id(int id) const {
    const int i = branch_index(id);
    return i < 0 ? nullptr : &branches[i];
  }

  int max_branch_id() const {
    int m = -1;
    for (const auto& b : branches) m = std::max(m, b.id);
    return m;
  }
  int max_switch_id() const { return switches.empty() ? -1 : switches.back(); }

  // (switch, slot) -> (branch array index, end index); -1 when vacant.
  struct SlotTable {
    std::map<std::pair<int, int>, std::pair<int, int>> at;
    std::vector<std::string> conflicts;

    std::pair<int, int> get(int sw, Slot slot) const {
      auto it = at.find({sw, static_cast<int>(slot)});
      return it == at.end() ? std::pair<int, int>{-1, -1} : it->second;
    }
  };

  SlotTable slot_table() const {
    SlotTable table;
    std::set<int> sw_set(switches.begin(), switches.end());
    for (std::size_t bi = 0; bi < branches.size(); ++bi) {
      for (int ei = 0; ei < 2; ++ei) {
        const BranchEnd& e = branches[bi].ends[ei];
        if (!sw_set.count(e.sw)) {
          table.conflicts.push_back("branch " + std::to_string(branches[bi].id) +
                                    " references unknown switch " + std::to_string(e.sw));
          continue;
        }
        auto key = std::make_pair(e.sw, static_cast<int>(e.slot));
        if (table.at.count(key)) {
          table.conflicts.push_back("slot (" + std::to_string(e.sw) + "," + slot_name(e.slot) +
                                    ") occupied twice (branch " + std::to_string(branches[bi].id) + ")");
          continue;
        }
        table.at[key] = {static_cast<int>(bi), ei};
      }
    }
    for (int sw : switches)
      for (int s = 0; s < 3; ++s)
        if (!table.at.count({sw, s}))
          table.conflicts.push_back("slot (" + std::to_string(sw) + "," +
                                    slot_name(static_cast<Slot>(s)) + ") vacant");
    return table;
  }

  BranchKind branch_kind(const Branch& b) const {
    const int larges = (b.ends[0].slot == Slot::Large ? 1 : 0) + (b.ends[1].slot == Slot::Large ? 1 : 0);
    if (larges == 2) return BranchKind::Large;
    if (larges == 0) return BranchKind::Small;
    return BranchKind::Mixed;
  }

  BranchKind branch_kind(int id) const { return branch_kind(*branch_by_id(id)); }

  bool is_connected() const {
    if (branches.empty()) return switches.empty();
    std::map<int, std::vector<int>> adj;
    for (const auto& b : branches) {
      adj[b.ends[0].sw].push_back(b.ends[1].sw);
      adj[b.ends[1].sw].push_back(b.ends[0].sw);
    }
    std::set<int> seen;
    std::vector<int> stack{branches[0].ends[0].sw};
    while (!stack.empty()) {
      int s = stack.back();
      stack.pop_back();
      if (!seen.insert(s).second) continue;
      for (int t : adj[s]) stack.push_back(t);
    }
    return seen.size() == switches.size();
  }

  // Dense index view for the hot paths (region walks, canonical labeling).
  struct Dense {
    int V = 0, E = 0;
    std::vector<int> switch_ids;   // compact -> original
    std::vector<int> branch_ids;   // compact -> original
    std::vector<int> slot_occ;     // 3*sw + slot -> 2*branch + end
    std::vector<int> branch_end;   // 2*branch + end -> 3*sw + slot
  };

  Dense dense() const {
    Dense d;
    d.V = static_cast<int>(num_switches());
    d.E = static_cast<int>(num_branches());
    d.switch_ids = switches;
    std::map<int, int> sw_idx;
    for (int i = 0; i < d.V; ++i) sw_idx[switches[i]] = i;
    d.branch_ids.resize(d.E);
    d.slot_occ.assign(3 * d.V, -1);
    d.branch_end.assign(2 * d.E, -1);
    for (int bi = 0; bi < d.E; ++bi) {
      d.branch_ids[bi] = branches[bi].id;
      for (int e = 0; e < 2; ++e) {
        const BranchEnd& end = branches[bi].ends[e];
        auto it = sw_idx.find(end.sw);
        if (it == sw_idx.end()) throw std::runtime_error("dense(): unknown switch reference");
        const int code = 3 * it->second + static_cast<int>(end.slot);
        if (d.slot_occ[code] >= 0) throw std::runtime_error("dense(): slot occupied twice");
        d.slot_occ[code] = 2 * bi + e;
        d.branch_end[2 * bi + e] = code;
      }
    }
    for (int c = 0; c < 3 * d.V; ++c)
      if (d.slot_occ[c] < 0) throw std::runtime_error("dense(): vacant slot");
    return d;
  }

  // Boundary walks of the fattened ribbon graph, in canonical order
  // (lexicographically minimal rotation of the walk encoding, then sorted).
  // Regions lie on the right of the traversal direction; arriving at a switch
  // through slot a departs through the counterclockwise-next slot, and the
  // passed corner is a cusp exactly when it lies between the two small germs.
  std::vector<Region> compute_regions() const {
    const Dense d = dense();
    std::vector<Region> regions;
    std::vector<char> visited(2 * d.E, 0);  // directed edge 2*bi + dir
    for (int de0 = 0; de0 < 2 * d.E; ++de0) {
      if (visited[de0]) continue;
      Region reg;
      int de = de0;
      do {
        visited[de] = 1;
        const int bi = de >> 1, dir = de & 1;
        const int arrive_code = d.branch_end[2 * bi + (dir == 0 ? 1 : 0)];
        const Slot aslot = static_cast<Slot>(arrive_code % 3);
        const bool cusp = aslot == Slot::SmallRight;
        reg.walk.push_back(RegionStep{d.branch_ids[bi], dir, cusp});
        if (cusp) ++reg.cusp_count;
        const int depart_code = 3 * (arrive_code / 3) + static_cast<int>(ccw_next(aslot));
        de = d.slot_occ[depart_code];  // leaving through end e means direction e
      } while (!visited[de]);
      canonical_rotate(reg.walk);
      regions.push_back(std::move(reg));
    }
    std::sort(regions.begin(), regions.end(),
              [](const Region& a, const Region& b) { return a.walk < b.walk; });
    for (std::size_t i = 0; i < regions.size(); ++i)
      regions[i].punctured = i < region_marks.size() && region_marks[i];
    return regions;
  }

  // Maximal cusp-to-cusp runs of a region walk, as step-index lists. A region
  // with k cusps has k sides; a cuspless walk is a single cyclic side.
  static std::vector<std::vector<int>> region_sides(const Region& reg) {
    const int n = static_cast<int>(reg.walk.size());
    std::vector<std::vector<int>> sides;
    if (reg.cusp_count == 0) {
      std::vector<int> all(n);
      for (int i = 0; i < n; ++i) all[i] = i;
      sides.push_back(all);
      return sides;
    }
    int start = -1;
    for (int i = 0; i < n; ++i)
      if (reg.walk[i].cusp_after) start = (i + 1) % n;
    std::vector<int> cur;
    for (int k = 0; k < n; ++k) {
      const int i = (start + k) % n;
      cur.push_back(i);
      if (reg.walk[i].cusp_after) {
        sides.push_back(cur);
        cur.clear();
      }
    }
    return sides;
  }

  ValidationReport validate(ValidationScope scope = ValidationScope::Ambient) const {
    ValidationReport rep;
    const int floor = scope == ValidationScope::Ambient ? 2 : 1;
    if (surface.genus < 0 || surface.punctures < 0)
      rep.violations.push_back("negative genus or puncture count");
    else if (surface.complexity() < floor)
      rep.violations.push_back("surface below complexity bound: 3g-3+n = " +
                               std::to_string(surface.complexity()));
    std::set<int> ids;
    bool structural = false;
    for (const auto& b : branches)
      if (!ids.insert(b.id).second) {
        rep.violations.push_back("duplicate branch id " + std::to_string(b.id));
        structural = true;
      }
    const SlotTable table = slot_table();
    for (const auto& c : table.conflicts) rep.violations.push_back(c);
    structural = structural || !table.conflicts.empty();
    if (!structural && 3 * num_switches() != 2 * num_branches()) {
      rep.violations.push_back("genericity violated: 3*switches != 2*branches");
      structural = true;
    }
    if (!structural && !is_connected()) {
      rep.violations.push_back("disconnected track");
      structural = true;
    }
    if (structural) return rep;  // region walks are meaningless beyond this point

    const auto regions = compute_regions();
    if (region_marks.size() != regions.size())
      rep.violations.push_back("region_marks size " + std::to_string(region_marks.size()) +
                               " != region count " + std::to_string(regions.size()));
    int marked = 0;
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const bool punct = i < region_marks.size() && region_marks[i];
      marked += punct ? 1 : 0;
      const int c = regions[i].cusp_count;
      if (!punct && c == 2) rep.violations.push_back("forbidden bigon region (index " + std::to_string(i) + ")");
      else if (!punct && c == 1) rep.violations.push_back("forbidden monogon region (index " + std::to_string(i) + ")");
      else if (!punct && c == 0) rep.violations.push_back("forbidden smooth disk/annulus region (index " + std::to_string(i) + ")");
      else if (punct && c == 0) rep.violations.push_back("forbidden cuspless punctured region (index " + std::to_string(i) + ")");
    }
    if (marked != surface.punctures)
      rep.violations.push_back("puncture marks " + std::to_string(marked) + " != declared punctures " +
                               std::to_string(surface.punctures));
    const int chi_closed = static_cast<int>(num_switches()) - static_cast<int>(num_branches()) +
                           static_cast<int>(regions.size());
    if (chi_closed != 2 - 2 * surface.genus)
      rep.violations.push_back("Euler characteristic mismatch: derived 2-2g = " +
                               std::to_string(chi_closed) + ", declared genus " +
                               std::to_string(surface.genus));
    return rep;
  }

  // Gauss-Bonnet sum over regions (2 for unpunctured disks minus cusps);
  // equals 2*chi(S_{g,n}) on every valid track.
  long gauss_bonnet_sum() const {
    long total = 0;
    const auto regions = compute_regions();
    for (const auto& r : regions) total += (r.punctured ? 0 : 2) - r.cusp_count;
    return total;
  }

  static Slot ccw_next(Slot s) {
    switch (s) {
      case Slot::Large: return Slot::SmallRight;
      case Slot::SmallRight: return Slot::SmallLeft;
      case Slot::SmallLeft: return Slot::Large;
    }
    return Slot::Large;
  }

  static void canonical_rotate(std::vector<RegionStep>& walk) {
    if (walk.size() <= 1) return;
    std::size_t best = 0;
    for (std::size_t i = 1; i < walk.size(); ++i) {
      for (std::size_t k = 0; k < walk.size(); ++k) {
        const RegionStep& a = walk[(i + k) % walk.size()];
        const RegionStep& b = walk[(best + k) % walk.size()];
        if (a < b) {
          best = i;
          break;
        }
        if (b < a) break;
      }
    }
    std::rotate(walk.begin(), walk.begin() + static_cast<long>(best), walk.end());
  }
};

struct TopologicalType {
  std::vector<int> m;  // sorted zero orders (regions are m_i+2-gons)
  int p1 = 0;          // once-punctured monogons
  int p2 = 0;          // once-punctured bigons
  bool operator==(const TopologicalType&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < m.size(); ++i) os << (i ? "," : "") << m[i];
    os << ";-" << p1 << "," << p2 << ")";
    return os.str();
  }
};

struct NotFillingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Topological type (m_1,...,m_l; -p_1, p_2) of a filling track. Throws
// NotFillingError when some region is neither a disk nor a once-punctured
// monogon/bigon.
inline TopologicalType topological_type(const TrainTrack& t) {
  TopologicalType ty;
  for (const auto& r : t.compute_regions()) {
    if (r.punctured) {
      if (r.cusp_count == 1) ++ty.p1;
      else if (r.cusp_count == 2) ++ty.p2;
      else throw NotFillingError("punctured region with " + std::to_string(r.cusp_count) + " cusps");
    } else {
      if (r.cusp_count < 3) throw NotFillingError("unpunctured region with < 3 cusps");
      ty.m.push_back(r.cusp_count - 2);
    }
  }
  std::sort(ty.m.begin(), ty.m.end());
  long sum = 0;
  for (int v : ty.m) sum += v;
  if (sum != 4L * t.surface.genus - 4 + ty.p1)
    throw std::logic_error("type consistency: sum m_i != 4g-4+p1 on a validated track");
  if (ty.p1 + ty.p2 != t.surface.punctures)
    throw std::logic_error("type consistency: p1+p2 != punctures on a validated track");
  return ty;
}

struct OrientationResult {
  bool orientable = false;
  // +1: positive direction ends[0] -> ends[1]; keyed by branch id.
  std::map<int, int> orientation;
  std::vector<int> odd_cycle;  // certifying branch ids when non-orientable
};

// Coherent orientation search: at each switch the large half-branch's
// orientation must extend through both small half-branches. Reduces to a
// parity 2-coloring of branch ends.
inline OrientationResult is_orientable(const TrainTrack& t) {
  OrientationResult res;
  const auto table = t.slot_table();
  if (!table.conflicts.empty()) throw std::runtime_error("is_orientable on malformed track");
  // Node per (branch index, end); value f = +1 when the branch points away
  // from the switch at this end. Constraints: f(e0) = -f(e1) along a branch;
  // at a switch f(large) = -f(small_left) = -f(small_right).
  const int n = static_cast<int>(t.num_branches());
  std::vector<int> f(2 * n, 0);
  std::vector<int> parent(2 * n, -1), parent_branch(2 * n, -1);
  auto node = [](int bi, int ei) { return 2 * bi + ei; };
  for (int start = 0; start < 2 * n; ++start) {
    if (f[start] != 0) continue;
    f[start] = 1;
    std::vector<int> stack{start};
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      const int bi = u / 2, ei = u % 2;
      // Along-branch constraint.
      struct Nb {
        int v;
        int parity;
        int via_branch;
      };
      std::vector<Nb> nbs;
      nbs.push_back({node(bi, 1 - ei), -1, t.branches[bi].id});
      // Same-switch constraints.
      const BranchEnd& e = t.branches[bi].ends[ei];
      for (int s = 0; s < 3; ++s) {
        if (s == static_cast<int>(e.slot)) continue;
        auto [obi, oei] = table.get(e.sw, static_cast<Slot>(s));
        const bool large_involved = e.slot == Slot::Large || static_cast<Slot>(s) == Slot::Large;
        const int parity = large_involved ? -1 : 1;  // small-small ends agree
        nbs.push_back({node(obi, oei), parity, t.branches[obi].id});
      }
      for (const auto& nb : nbs) {
        const int want = f[u] * nb.parity;
        if (f[nb.v] == 0) {
          f[nb.v] = want;
          parent[nb.v] = u;
          parent_branch[nb.v] = nb.via_branch;
          stack.push_back(nb.v);
        } else if (f[nb.v] != want) {
          // Conflict: walk both nodes to the root collecting branch ids.
          std::set<int> cyc{nb.via_branch};
          for (int w : {u, nb.v})
            for (int x = w; parent[x] >= 0; x = parent[x]) cyc.insert(parent_branch[x]);
          res.orientable = false;
          res.odd_cycle.assign(cyc.begin(), cyc.end());
          return res;
        }
      }
    }
  }
  res.orientable = true;
  for (int bi = 0; bi < n; ++bi) res.orientation[t.branches[bi].id] = f[node(bi, 0)];
  return res;
}

// ---------------------------------------------------------------------------
// Canonical labeling. Isomorphisms preserve slot structure exactly (the
// surface orientation is part of the data, so small_left/small_right never
// swap). Canonical form = minimum over BFS roots of the relabeled encoding;
// optional per-branch colors pin branches (equal encodings can only match
// branches of equal color).

struct Relabeling {
  std::map<int, int> switch_map;  // old id -> new id
  std::map<int, int> branch_map;
};

struct CanonicalForm {
  std::string encoding;
  Relabeling to_canonical;
};

inline TrainTrack relabel(const TrainTrack& t, const Relabeling& r) {
  TrainTrack out;
  out.surface = t.surface;
  for (int s : t.switches) out.switches.push_back(r.switch_map.at(s));
  for (const auto& b : t.branches) {
    Branch nb;
    nb.id = r.branch_map.at(b.id);
    for (int e = 0; e < 2; ++e) nb.ends[e] = BranchEnd{r.switch_map.at(b.ends[e].sw), b.ends[e].slot};
    out.branches.push_back(nb);
  }
  // Carry puncture marks: relabel each old region walk, re-canonicalize, and
  // sort the same way compute_regions does.
  const auto old_regions = t.compute_regions();
  std::vector<std::pair<std::vector<RegionStep>, bool>> walks;
  for (std::size_t i = 0; i < old_regions.size(); ++i) {
    std::vector<RegionStep> w = old_regions[i].walk;
    for (auto& st : w) {
      const Branch& ob = *t.branch_by_id(st.branch);
      st.branch = r.branch_map.at(st.branch);
      // Branch end order may flip during normalize() if relabeled ends swap.
      BranchEnd ne0{r.switch_map.at(ob.ends[0].sw), ob.ends[0].slot};
      BranchEnd ne1{r.switch_map.at(ob.ends[1].sw), ob.ends[1].slot};
      if (ne1 < ne0) st.dir = 1 - st.dir;
    }
    TrainTrack::canonical_rotate(w);
    walks.push_back({std::move(w), i < t.region_marks.size() && t.region_marks[i]});
  }
  std::sort(walks.begin(), walks.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  out.region_marks.clear();
  for (const auto& [w, m] : walks) out.region_marks.push_back(m);
  out.normalize();
  return out;
}

namespace detail {

inline void append_int(std::string& s, int v) {
  char buf[12];
  int n = 0;
  if (v == 0) buf[n++] = '0';
  bool neg = v < 0;
  unsigned x = neg ? static_cast<unsigned>(-v) : static_cast<unsigned>(v);
  char tmp[12];
  int m = 0;
  while (x) {
    tmp[m++] = static_cast<char>('0' + x % 10);
    x /= 10;
  }
  if (neg) buf[n++] = '-';
  while (m) buf[n++] = tmp[--m];
  s.append(buf, static_cast<std::size_t>(n));
}

// BFS structural encoding from a root; fills compact relabeling arrays
// (sw_new, br_new indexed by compact indices). Empty string = disconnected.
inline std::string encode_root_dense(const TrainTrack::Dense& d, int root,
                                     const std::vector<int>& colors, std::vector<int>& sw_new,
                                     std::vector<int>& br_new) {
  sw_new.assign(d.V, -1);
  br_new.assign(d.E, -1);
  std::vector<int> order;
  order.reserve(d.V);
  sw_new[root] = 0;
  order.push_back(root);
  int next_branch = 0;
  std::string enc;
  enc.reserve(static_cast<std::size_t>(18 * d.V + 8 * d.E + 16));
  for (std::size_t qi = 0; qi < order.size(); ++qi) {
    const int s = order[qi];
    for (int slot = 0; slot < 3; ++slot) {
      const int occ = d.slot_occ[3 * s + slot];
      const int bi = occ >> 1, ei = occ & 1;
      if (br_new[bi] < 0) br_new[bi] = next_branch++;
      const int other_code = d.branch_end[2 * bi + (1 - ei)];
      const int osw = other_code / 3;
      if (sw_new[osw] < 0) {
        sw_new[osw] = static_cast<int>(order.size());
        order.push_back(osw);
      }
      append_int(enc, br_new[bi]);
      enc.push_back(':');
      append_int(enc, sw_new[osw]);
      enc.push_back(':');
      append_int(enc, other_code % 3);
      enc.push_back(' ');
    }
    enc.push_back(';');
  }
  if (static_cast<int>(order.size()) != d.V) return {};
  if (!colors.empty()) {
    enc.push_back('|');
    std::vector<int> by_new(d.E, -1);
    for (int bi = 0; bi < d.E; ++bi)
      if (colors[bi] != -1) by_new[br_new[bi]] = colors[bi];
    for (int nid = 0; nid < d.E; ++nid)
      if (by_new[nid] != -1) {
        append_int(enc, nid);
        enc.push_back('=');
        append_int(enc, by_new[nid]);
        enc.push_back(' ');
      }
  }
  return enc;
}

}  // namespace detail

// Canonical form under marked ribbon-graph isomorphism (colors optional:
// branches may only map to equal colors; give pinned branches unique colors
// to force pointwise fixing).
inline CanonicalForm canonical_form(const TrainTrack& t, const std::map<int, int>& colors = {}) {
  const TrainTrack::Dense d = t.dense();
  std::vector<int> color_vec(d.E, -1);
  if (!colors.empty()) {
    std::map<int, int> id_to_bi;
    for (int bi = 0; bi < d.E; ++bi) id_to_bi[d.branch_ids[bi]] = bi;
    for (const auto& [id, c] : colors) {
      auto it = id_to_bi.find(id);
      if (it != id_to_bi.end()) color_vec[it->second] = c;
    }
  }
  // Pass 1: minimal structural encoding over roots. Pass 2: among minimizing
  // roots (automorphic images), tie-break with the relabeled puncture-mark
  // string so marked isomorphism is what gets classified.
  std::string best_struct;
  std::vector<std::pair<std::vector<int>, std::vector<int>>> min_maps;  // (sw_new, br_new)
  std::vector<int> sw_new, br_new;
  for (int root = 0; root < d.V; ++root) {
    const std::string enc = detail::encode_root_dense(d, root, color_vec, sw_new, br_new);
    if (enc.empty()) throw std::runtime_error("canonical_form on disconnected track");
    if (best_struct.empty() || enc < best_struct) {
      best_struct = enc;
      min_maps.clear();
      min_maps.push_back({sw_new, br_new});
    } else if (enc == best_struct) {
      min_maps.push_back({sw_new, br_new});
    }
  }

  const bool any_marks =
      std::any_of(t.region_marks.begin(), t.region_marks.end(), [](bool b) { return b; });
  std::string prefix;
  detail::append_int(prefix, t.surface.genus);
  prefix.push_back(' ');
  detail::append_int(prefix, t.surface.punctures);
  prefix.push_back('|');

  CanonicalForm best;
  if (!any_marks) {
    // All-zero marks cannot break ties; first minimizing root serves.
    best.encoding = prefix + best_struct + "marks:";
    for (int i = 0; i < d.V; ++i) best.to_canonical.switch_map[d.switch_ids[i]] = min_maps[0].first[i];
    for (int i = 0; i < d.E; ++i) best.to_canonical.branch_map[d.branch_ids[i]] = min_maps[0].second[i];
    return best;
  }
  std::vector<Region> old_regions = t.compute_regions();
  std::map<int, int> id_to_bi;
  for (int bi = 0; bi < d.E; ++bi) id_to_bi[d.branch_ids[bi]] = bi;
  for (const auto& [swm, brm] : min_maps) {
    std::string enc = prefix + best_struct + "marks:";
    // Remap each region walk, re-canonicalize rotations, sort, emit marks.
    std::vector<std::pair<std::vector<RegionStep>, bool>> walks;
    walks.reserve(old_regions.size());
    for (std::size_t i = 0; i < old_regions.size(); ++i) {
      std::vector<RegionStep> w = old_regions[i].walk;
      for (auto& st : w) {
        const int bi = id_to_bi.at(st.branch);
        const int c0 = d.branch_end[2 * bi], c1 = d.branch_end[2 * bi + 1];
        const long k0 = 3L * swm[c0 / 3] + c0 % 3;
        const long k1 = 3L * swm[c1 / 3] + c1 % 3;
        if (k1 < k0) st.dir = 1 - st.dir;  // normalize() would swap the relabeled ends
        st.branch = brm[bi];
      }
      TrainTrack::canonical_rotate(w);
      walks.push_back({std::move(w), i < t.region_marks.size() && t.region_marks[i]});
    }
    std::sort(walks.begin(), walks.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [w, m] : walks) enc.push_back(m ? '1' : '0');
    if (best.encoding.empty() || enc < best.encoding) {
      best.encoding = enc;
      best.to_canonical.switch_map.clear();
      best.to_canonical.branch_map.clear();
      for (int i = 0; i < d.V; ++i) best.to_canonical.switch_map[d.switch_ids[i]] = swm[i];
      for (int i = 0; i < d.E; ++i) best.to_canonical.branch_map[d.branch_ids[i]] = brm[i];
    }
  }
  return best;
}

// Marked isomorphism test; returns the relabeling a -> b when isomorphic.
inline std::optional<Relabeling> find_isomorphism(const TrainTrack& a, const TrainTrack& b,
                                                  const std::map<int, int>& colors_a = {},
                                                  const std::map<int, int>& colors_b = {}) {
  if (a.num_switches() != b.num_switches() || a.num_branches() != b.num_branches())
    return std::nullopt;
  if (!(a.surface == b.surface)) return std::nullopt;
  const CanonicalForm ca = canonical_form(a, colors_a);
  const CanonicalForm cb = canonical_form(b, colors_b);
  if (ca.encoding != cb.encoding) return std::nullopt;
  Relabeling ab;
  std::map<int, int> inv_sw, inv_br;
  for (const auto& [old_id, nid] : cb.to_canonical.switch_map) inv_sw[nid] = old_id;
  for (const auto& [old_id, nid] : cb.to_canonical.branch_map) inv_br[nid] = old_id;
  for (const auto& [old_id, nid] : ca.to_canonical.switch_map) ab.switch_map[old_id] = inv_sw.at(nid);
  for (const auto& [old_id, nid] : ca.to_canonical.branch_map) ab.branch_map[old_id] = inv_br.at(nid);
  return ab;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Label-invariant content hash of the canonical encoding (non-cryptographic).
inline std::string track_hash(const TrainTrack& t) {
  const std::uint64_t h = fnv1a(canonical_form(t).encoding);
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace traintrack
