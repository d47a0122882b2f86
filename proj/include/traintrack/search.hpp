#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "traintrack/enumerate.hpp"
#include "traintrack/moves.hpp"
#include "traintrack/strata.hpp"

namespace traintrack {

// ---------------------------------------------------------------------------
// Two-pole-circle gadget: a primitive cycle {E large, K small} enclosing a
// twice-punctured disk (a once-punctured monogon loop hangs inside, a small
// connector hangs outside). These are the building blocks the sphere/torus
// base tracks are assembled from; figure data is reconstructed by search.

// Preset pairings for one gadget on switches x1, x2, y. K's small slots are
// picked by the 2-bit variant; h1's outer end is left free for the search.
inline std::vector<PresetPairing> gadget_presets(int x1, int x2, int y, int variant,
                                                 Slot* h1_slot = nullptr) {
  auto end = [](int sw, Slot s) { return 3 * sw + static_cast<int>(s); };
  const Slot k1 = (variant & 1) ? Slot::SmallRight : Slot::SmallLeft;
  const Slot k2 = (variant & 2) ? Slot::SmallRight : Slot::SmallLeft;
  const Slot h2slot = (variant & 2) ? Slot::SmallLeft : Slot::SmallRight;
  if (h1_slot) *h1_slot = (variant & 1) ? Slot::SmallLeft : Slot::SmallRight;
  std::vector<PresetPairing> p;
  p.push_back({end(x1, Slot::Large), end(x2, Slot::Large)});            // E
  p.push_back({end(x1, k1), end(x2, k2)});                              // K
  p.push_back({end(x2, h2slot), end(y, Slot::Large)});                  // h2
  p.push_back({end(y, Slot::SmallLeft), end(y, Slot::SmallRight)});     // monogon loop
  return p;
}

// All clean primitive cycle pairs of a track, with special-form checks.
inline std::vector<SpecialFormWitness> special_form_witnesses(const TrainTrack& t,
                                                              std::size_t max_out = SIZE_MAX) {
  std::vector<SpecialFormWitness> out;
  const auto cycles = find_vertex_cycles(t);
  std::vector<VertexCycle> clean;
  for (const auto& c : cycles)
    if (check_clean(t, c).clean) clean.push_back(c);
  for (std::size_t i = 0; i < clean.size() && out.size() < max_out; ++i)
    for (std::size_t j = i + 1; j < clean.size() && out.size() < max_out; ++j) {
      if (auto w = check_special_form(t, clean[i], clean[j])) out.push_back(*w);
      else if (auto w2 = check_special_form(t, clean[j], clean[i])) out.push_back(*w2);
    }
  return out;
}

// ---------------------------------------------------------------------------
// search_special_form: bounded constructive enumeration per the target
// stratum. Strategies: direct exhaustive (small), two-gadget prefix search
// (sphere/torus), handle attachment from a reduced stratum (genus growth),
// region subdivision (zero splitting).

struct SearchBudget {
  int direct_max_switches = 8;   // full exhaustive search up to here
  long node_budget = 40000000;   // DFS nodes per enumeration pass
  int max_tracks_per_pass = 512;  // candidate tracks kept per pass
  int max_witnesses = 4;
  bool allow_handle_growth = true;
};

struct SearchOutcome {
  std::vector<SpecialFormWitness> witnesses;
  bool budget_exhausted = false;
  bool small_complexity_warning = false;  // 3g-3+n == 4: weaker guarantee
  std::vector<std::string> log;
};

namespace searchdetail {

inline int switches_for(const StratumLabel& s) {
  int v = 0;
  for (int m : s.zero_orders) v += (s.kind == StratumLabel::Kind::Abelian ? 2 * m : m) + 2;
  v += s.poles + 2 * s.marked_points;
  return v;
}

inline std::vector<int> disk_cusps_for(const StratumLabel& s) {
  std::vector<int> d;
  for (int m : s.zero_orders) d.push_back((s.kind == StratumLabel::Kind::Abelian ? 2 * m : m) + 2);
  std::sort(d.begin(), d.end());
  return d;
}

inline bool matches(const TrainTrack& t, const StratumLabel& s) {
  if (t.surface.genus != s.genus) return false;
  if (t.surface.punctures != s.poles + s.marked_points) return false;
  try {
    return stratum_of(t) == s;
  } catch (const std::exception&) {
    return false;
  }
}

// Two-gadget prefix enumeration: the free tail of switches is exhausted with
// region budgets matching the target type.
inline std::vector<TrainTrack> gadget_prefix_search(const StratumLabel& target,
                                                    const SearchBudget& budget, bool& exhausted) {
  const int V = switches_for(target);
  std::vector<TrainTrack> found;
  std::set<std::string> seen;
  for (int var1 = 0; var1 < 4; ++var1) {
    for (int var2 = 0; var2 < 4; ++var2) {
      Slot h1a = Slot::SmallRight, h1b = Slot::SmallRight;
      std::vector<PresetPairing> presets = gadget_presets(0, 1, 2, var1, &h1a);
      const auto g2 = gadget_presets(3, 4, 5, var2, &h1b);
      presets.insert(presets.end(), g2.begin(), g2.end());
      EnumerationOptions opt;
      opt.max_monogons = target.poles;
      opt.max_bigons = target.marked_points;
      opt.disk_cusps = disk_cusps_for(target);
      opt.node_budget = budget.node_budget;
      const bool completed = enumerate_tracks(V, opt, presets, [&](const TrainTrack& t) {
        // Cheap clean-cycle precondition: both outer connectors must be small
        // branches, otherwise neither gadget cycle can be clean.
        const auto table = t.slot_table();
        for (const auto [sw, slot] : {std::pair{0, h1a}, std::pair{3, h1b}}) {
          auto [bi, ei] = table.get(sw, slot);
          if (bi < 0 || t.branch_kind(t.branches[bi]) != BranchKind::Small) return true;
        }
        if (matches(t, target) && seen.insert(canonical_form(t).encoding).second)
          found.push_back(t);
        return static_cast<int>(found.size()) < budget.max_tracks_per_pass;
      });
      if (!completed && static_cast<int>(found.size()) >= budget.max_tracks_per_pass) return found;
      if (!completed) exhausted = true;
    }
  }
  return found;
}

inline std::vector<TrainTrack> direct_search(const StratumLabel& target, const SearchBudget& budget,
                                             bool& exhausted) {
  const int V = switches_for(target);
  std::vector<TrainTrack> found;
  if (V > budget.direct_max_switches) return found;
  EnumerationOptions opt;
  opt.max_monogons = target.poles;
  opt.max_bigons = target.marked_points;
  opt.disk_cusps = disk_cusps_for(target);
  opt.node_budget = budget.node_budget;
  const bool completed = enumerate_tracks(V, opt, [&](const TrainTrack& t) {
    if (matches(t, target)) found.push_back(t);
    return static_cast<int>(found.size()) < budget.max_tracks_per_pass;
  });
  if (!completed && static_cast<int>(found.size()) < budget.max_tracks_per_pass) exhausted = true;
  return found;
}

}  // namespace searchdetail

inline SearchOutcome search_special_form(const StratumLabel& target, const SearchBudget& budget = {});
inline std::vector<TrainTrack> search_tracks(const StratumLabel& target, const SearchBudget& budget);

namespace searchdetail {

// Genus growth: tracks for (m_1..m_l; -n) on genus g from tracks for
// (m_1..m_l - 4; -n) on genus g-1 by attaching a handle inside the largest
// polygon. The reduced base need not itself be in special form (the handle
// contributes a clean cycle); special-form witnesses are preferred when the
// reduced complexity admits them.
inline std::vector<TrainTrack> base_tracks_for(const StratumLabel& reduced, const SearchBudget& budget,
                                               SearchOutcome& log) {
  std::vector<TrainTrack> bases;
  const int complexity = 3 * reduced.genus - 3 + reduced.poles + reduced.marked_points;
  if (complexity >= 4) {
    SearchBudget sub = budget;
    sub.max_witnesses = 2;
    try {
      SearchOutcome below = search_special_form(reduced, sub);
      for (const auto& w : below.witnesses) bases.push_back(w.track);
    } catch (const std::exception& e) {
      log.log.push_back(std::string("reduced special-form search: ") + e.what());
    }
  }
  if (bases.empty()) {
    try {
      bases = search_tracks(reduced, budget);
    } catch (const std::exception& e) {
      log.log.push_back(std::string("reduced track search: ") + e.what());
    }
  }
  return bases;
}

inline std::vector<TrainTrack> handle_growth(const StratumLabel& target, const SearchBudget& budget,
                                             SearchOutcome& log) {
  std::vector<TrainTrack> out;
  if (target.genus < 1 || target.zero_orders.empty()) return out;
  StratumLabel reduced = target;
  reduced.genus -= 1;
  const int top = reduced.zero_orders.back();
  const int reduced_top = top - (target.kind == StratumLabel::Kind::Abelian ? 2 : 4);
  reduced.zero_orders.pop_back();
  if (reduced_top > 0) {
    reduced.zero_orders.push_back(reduced_top);
    std::sort(reduced.zero_orders.begin(), reduced.zero_orders.end());
  }
  if (reduced.kind == StratumLabel::Kind::Abelian && reduced.genus < 1) return out;
  std::vector<TrainTrack> bases = base_tracks_for(reduced, budget, log);
  std::set<std::string> seen;
  for (const auto& base : bases) {
    const auto regions = base.compute_regions();
    // attach inside the largest polygon
    int reg_idx = -1, best = -1;
    for (std::size_t i = 0; i < regions.size(); ++i)
      if (!regions[i].punctured && regions[i].cusp_count > best) {
        best = regions[i].cusp_count;
        reg_idx = static_cast<int>(i);
      }
    if (reg_idx < 0) continue;
    const int n = static_cast<int>(regions[reg_idx].walk.size());
    for (int sa = 0; sa < n; ++sa)
      for (int sb = 0; sb < n; ++sb) {
        if (sa == sb) continue;
        for (int signs = 0; signs < 4; ++signs)
          for (int variant = 0; variant < 4; ++variant) {
            Move mv;
            mv.kind = Move::Kind::HandleAttachment;
            mv.region = reg_idx;
            mv.step_a = sa;
            mv.step_b = sb;
            mv.sign_a = (signs & 1) ? 1 : -1;
            mv.sign_b = (signs & 2) ? 1 : -1;
            mv.variant = variant;
            try {
              MoveResult r = apply_handle_attachment(base, mv);
              if (!r.track.validate(ValidationScope::Subsurface).ok()) continue;
              if (!matches(r.track, target)) continue;
              if (seen.insert(canonical_form(r.track).encoding).second) out.push_back(r.track);
              if (static_cast<int>(out.size()) >= budget.max_tracks_per_pass) return out;
            } catch (const std::exception&) {
              continue;
            }
          }
      }
  }
  return out;
}

// Zero splitting: subdivide polygons of single-zero (or fewer-zero) tracks to
// reach multi-zero types.
inline std::vector<TrainTrack> subdivision_growth(const StratumLabel& target,
                                                  const SearchBudget& budget) {
  std::vector<TrainTrack> out;
  if (target.zero_orders.size() < 2) return out;
  // Merge the two smallest zeros into one and search for that stratum.
  StratumLabel parent = target;
  std::sort(parent.zero_orders.begin(), parent.zero_orders.end());
  const int a = parent.zero_orders[0], b = parent.zero_orders[1];
  parent.zero_orders.erase(parent.zero_orders.begin(), parent.zero_orders.begin() + 2);
  parent.zero_orders.push_back(a + b);
  std::sort(parent.zero_orders.begin(), parent.zero_orders.end());
  SearchBudget sub = budget;
  sub.max_witnesses = 2;
  SearchOutcome below;
  try {
    below = search_special_form(parent, sub);
  } catch (const std::exception&) {
    return out;
  }
  std::set<std::string> seen;
  for (const auto& w : below.witnesses) {
    const TrainTrack& base = w.track;
    const auto regions = base.compute_regions();
    const int scale = target.kind == StratumLabel::Kind::Abelian ? 2 : 1;
    for (std::size_t ri = 0; ri < regions.size(); ++ri) {
      if (regions[ri].punctured || regions[ri].cusp_count != scale * (a + b) + 2) continue;
      const int n = static_cast<int>(regions[ri].walk.size());
      for (int sa = 0; sa < n; ++sa)
        for (int sb = sa + 1; sb < n; ++sb)
          for (int signs = 0; signs < 4; ++signs) {
            Move mv;
            mv.kind = Move::Kind::SimpleExtension;
            mv.region = static_cast<int>(ri);
            mv.step_a = sa;
            mv.step_b = sb;
            mv.sign_a = (signs & 1) ? 1 : -1;
            mv.sign_b = (signs & 2) ? 1 : -1;
            try {
              MoveResult r = apply_simple_extension(base, mv);
              if (!r.track.validate(ValidationScope::Subsurface).ok()) continue;
              if (!matches(r.track, target)) continue;
              if (seen.insert(canonical_form(r.track).encoding).second) out.push_back(r.track);
              if (static_cast<int>(out.size()) >= budget.max_tracks_per_pass) return out;
            } catch (const std::exception&) {
              continue;
            }
          }
    }
  }
  return out;
}

}  // namespace searchdetail

inline SearchOutcome search_special_form(const StratumLabel& target, const SearchBudget& budget) {
  SearchOutcome out;
  const ComponentInfo info = component_table(target);
  if (info.known && info.empty) throw EmptyStratumError("stratum is empty: " + target.str());
  const int complexity = 3 * target.genus - 3 + target.poles + target.marked_points;
  if (complexity < 3)
    throw StratumError("special form search needs 3g-3+n >= 3 (got " + std::to_string(complexity) + ")");
  out.small_complexity_warning = complexity < 5;

  auto harvest = [&](const std::vector<TrainTrack>& tracks, const char* how) {
    for (const auto& t : tracks) {
      for (auto& w : special_form_witnesses(t, budget.max_witnesses)) {
        out.witnesses.push_back(std::move(w));
        if (static_cast<int>(out.witnesses.size()) >= budget.max_witnesses) break;
      }
      if (static_cast<int>(out.witnesses.size()) >= budget.max_witnesses) break;
    }
    if (!tracks.empty())
      out.log.push_back(std::string(how) + ": " + std::to_string(tracks.size()) + " candidate tracks, " +
                        std::to_string(out.witnesses.size()) + " witnesses so far");
  };

  bool exhausted = false;
  harvest(searchdetail::direct_search(target, budget, exhausted), "direct");
  if (out.witnesses.empty() && target.genus <= 1)
    harvest(searchdetail::gadget_prefix_search(target, budget, exhausted), "gadget-prefix");
  if (out.witnesses.empty() && target.zero_orders.size() >= 2)
    harvest(searchdetail::subdivision_growth(target, budget), "subdivision");
  if (out.witnesses.empty() && budget.allow_handle_growth && target.genus >= 2)
    harvest(searchdetail::handle_growth(target, budget, out), "handle-growth");
  out.budget_exhausted = out.witnesses.empty() && exhausted;
  return out;
}

// Candidate tracks for a stratum regardless of special form (used by tests
// and the catalog for small strata).
inline std::vector<TrainTrack> search_tracks(const StratumLabel& target, const SearchBudget& budget) {
  bool exhausted = false;
  auto found = searchdetail::direct_search(target, budget, exhausted);
  if (found.empty() && target.genus <= 1)
    found = searchdetail::gadget_prefix_search(target, budget, exhausted);
  return found;
}

}  // namespace traintrack
