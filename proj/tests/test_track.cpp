#include <catch2/catch_amalgamated.hpp>

#include "traintrack/cycles.hpp"
#include "traintrack/enumerate.hpp"
#include "traintrack/track.hpp"

#include "seeds.hpp"

using namespace traintrack;

TEST_CASE("pillowcase track: validation, regions, Gauss-Bonnet") {
  const TrainTrack& t = ttseeds::pillowcase();
  REQUIRE(t.validate(ValidationScope::Subsurface).ok());
  CHECK(t.num_switches() == 4);
  CHECK(t.num_branches() == 6);
  const auto regions = t.compute_regions();
  REQUIRE(regions.size() == 4);
  for (const auto& r : regions) {
    CHECK(r.cusp_count == 1);
    CHECK(r.punctured);
  }
  CHECK(t.gauss_bonnet_sum() == 2 * t.surface.euler_characteristic());
  CHECK(3 * t.num_switches() == 2 * t.num_branches());
}

TEST_CASE("tampered marks produce named violations") {
  TrainTrack t = ttseeds::s12_maximal();
  REQUIRE(t.validate().ok());

  SECTION("unmarking a monogon region") {
    const auto regions = t.compute_regions();
    for (std::size_t i = 0; i < regions.size(); ++i) {
      if (regions[i].cusp_count == 1 && t.region_marks[i]) {
        t.region_marks[i] = false;
        t.surface.punctures -= 1;
        break;
      }
    }
    const auto rep = t.validate();
    REQUIRE_FALSE(rep.ok());
    bool found = false;
    for (const auto& v : rep.violations) found = found || v.find("monogon") != std::string::npos;
    CHECK(found);
  }

  SECTION("wrong declared genus -> Euler characteristic mismatch") {
    t.surface.genus += 1;
    const auto rep = t.validate();
    REQUIRE_FALSE(rep.ok());
    bool found = false;
    for (const auto& v : rep.violations)
      found = found || v.find("Euler characteristic mismatch") != std::string::npos;
    CHECK(found);
  }
}

TEST_CASE("malformed slot references are structural errors") {
  TrainTrack t = ttseeds::pillowcase();
  t.branches[0].ends[0].sw = 99;
  const auto rep = t.validate(ValidationScope::Subsurface);
  REQUIRE_FALSE(rep.ok());
  bool found = false;
  for (const auto& v : rep.violations) found = found || v.find("unknown switch 99") != std::string::npos;
  CHECK(found);
}

TEST_CASE("genus-2 single-zero tracks: one region with six cusps") {
  for (const TrainTrack* t : {&ttseeds::h2_orientable(), &ttseeds::genus2_nonorientable()}) {
    const auto regions = t->compute_regions();
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].cusp_count == 6);
    CHECK_FALSE(regions[0].punctured);
    const auto ty = topological_type(*t);
    CHECK(ty.m == std::vector<int>{4});
  }
}

TEST_CASE("orientability") {
  SECTION("punctured monogon forces non-orientable") {
    const auto res = is_orientable(ttseeds::pillowcase());
    CHECK_FALSE(res.orientable);
    CHECK_FALSE(res.odd_cycle.empty());
  }
  SECTION("orientable witness satisfies the coherence rule") {
    const TrainTrack& t = ttseeds::h2_orientable();
    const auto res = is_orientable(t);
    REQUIRE(res.orientable);
    // Check coherence directly: at each switch, large end orientation is
    // opposite to both small ends.
    const auto table = t.slot_table();
    for (int sw : t.switches) {
      auto dir_at = [&](Slot slot) {
        auto [bi, ei] = table.get(sw, slot);
        const int o = res.orientation.at(t.branches[bi].id);
        // +1 when the branch points away from this switch.
        return ei == 0 ? o : -o;
      };
      CHECK(dir_at(Slot::Large) == -dir_at(Slot::SmallLeft));
      CHECK(dir_at(Slot::Large) == -dir_at(Slot::SmallRight));
    }
  }
  SECTION("orientable track has even-sided regions and p1 = 0") {
    const auto ty = topological_type(ttseeds::h2_orientable());
    CHECK(ty.p1 == 0);
    for (int m : ty.m) CHECK(m % 2 == 0);
  }
}

TEST_CASE("canonical labeling is relabeling-invariant") {
  const TrainTrack& t = ttseeds::s12_maximal();
  Relabeling shuffle;
  const int nb = static_cast<int>(t.num_branches());
  for (std::size_t i = 0; i < t.switches.size(); ++i)
    shuffle.switch_map[t.switches[i]] = 100 + static_cast<int>((i * 5 + 3) % t.num_switches());
  for (int i = 0; i < nb; ++i) shuffle.branch_map[t.branches[i].id] = 50 + ((i * 7 + 2) % nb);
  const TrainTrack t2 = relabel(t, shuffle);
  REQUIRE(t2.validate().ok());
  CHECK(canonical_form(t).encoding == canonical_form(t2).encoding);
  CHECK(track_hash(t) == track_hash(t2));
  const auto iso = find_isomorphism(t, t2);
  REQUIRE(iso.has_value());
  for (const auto& [old_id, new_id] : iso->branch_map)
    CHECK(new_id == shuffle.branch_map.at(old_id));
}

TEST_CASE("vertex cycles: counting measures satisfy switch conditions") {
  for (const TrainTrack* t :
       {&ttseeds::pillowcase(), &ttseeds::s12_maximal(), &ttseeds::h2_orientable()}) {
    const auto cycles = find_vertex_cycles(*t);
    REQUIRE_FALSE(cycles.empty());
    for (const auto& c : cycles) {
      TransverseMeasure m;
      for (const auto& [id, w] : c.measure) m.weights[id] = Rat(w);
      CHECK(satisfies_switch_conditions(*t, m));
    }
  }
}

TEST_CASE("orientable tracks contain no dumbbells") {
  const auto cycles = find_vertex_cycles(ttseeds::h2_orientable());
  for (const auto& c : cycles) CHECK(c.kind == CycleKind::Circle);
}
