#pragma once

// Shared seed tracks for the test suites, produced by bounded exhaustive
// enumeration (the project reconstructs its base tracks by search; nothing is
// read off paper figures).

#include <optional>
#include <stdexcept>
#include <vector>

#include "traintrack/cone.hpp"
#include "traintrack/enumerate.hpp"
#include "traintrack/track.hpp"

namespace ttseeds {

using namespace traintrack;

inline std::vector<TrainTrack> enumerate_matching(int V, const EnumerationOptions& opt,
                                                  const std::function<bool(const TrainTrack&)>& keep,
                                                  std::size_t max_results = SIZE_MAX) {
  std::vector<TrainTrack> out;
  enumerate_tracks(V, opt, [&](const TrainTrack& t) {
    if (keep(t)) out.push_back(t);
    return out.size() < max_results;
  });
  return out;
}

inline std::optional<TopologicalType> type_of(const TrainTrack& t) {
  try {
    return topological_type(t);
  } catch (const NotFillingError&) {
    return std::nullopt;
  }
}

// Sphere with four punctures, no zero: the smallest residual-scale track.
inline const TrainTrack& pillowcase() {
  static const TrainTrack t = [] {
    EnumerationOptions opt;
    opt.max_monogons = 4;
    opt.max_bigons = 0;
    opt.disk_cusps = std::vector<int>{};
    auto found = enumerate_matching(4, opt, [](const TrainTrack& tr) {
      if (tr.surface.genus != 0 || tr.surface.punctures != 4) return false;
      const auto ty = type_of(tr);
      if (!ty || !ty->m.empty() || ty->p1 != 4) return false;
      return is_recurrent(tr).recurrent;
    }, 1);
    if (found.empty()) throw std::runtime_error("no pillowcase track found");
    return found[0];
  }();
  return t;
}

// Maximal recurrent track on S_{1,2}: type (1,1;-2,0), dim V = 6g-6+2n = 4.
inline const TrainTrack& s12_maximal() {
  static const TrainTrack t = [] {
    EnumerationOptions opt;
    opt.max_monogons = 2;
    opt.max_bigons = 0;
    opt.disk_cusps = std::vector<int>{3, 3};
    auto found = enumerate_matching(8, opt, [](const TrainTrack& tr) {
      if (tr.surface.genus != 1 || tr.surface.punctures != 2) return false;
      const auto ty = type_of(tr);
      if (!ty || ty->m != std::vector<int>{1, 1} || ty->p1 != 2) return false;
      return is_recurrent(tr).recurrent;
    }, 1);
    if (found.empty()) throw std::runtime_error("no S_{1,2} maximal track found");
    return found[0];
  }();
  return t;
}

// Orientable genus-2 single-zero track: combinatorial model for H(2).
inline const TrainTrack& h2_orientable() {
  static const TrainTrack t = [] {
    EnumerationOptions opt;
    opt.max_monogons = 0;
    opt.max_bigons = 0;
    opt.disk_cusps = std::vector<int>{6};
    auto found = enumerate_matching(6, opt, [](const TrainTrack& tr) {
      if (tr.surface.genus != 2 || tr.surface.punctures != 0) return false;
      const auto ty = type_of(tr);
      if (!ty || ty->m != std::vector<int>{4}) return false;
      if (!is_orientable(tr).orientable) return false;
      return is_recurrent(tr).recurrent;
    }, 1);
    if (found.empty()) throw std::runtime_error("no orientable (4;0,0) track found");
    return found[0];
  }();
  return t;
}

// Non-orientable genus-2 single-zero track: model for Q(4;0)-type data
// (the stratum itself is empty; the track is combinatorial input for region
// and dimension tests only).
inline const TrainTrack& genus2_nonorientable() {
  static const TrainTrack t = [] {
    EnumerationOptions opt;
    opt.max_monogons = 0;
    opt.max_bigons = 0;
    opt.disk_cusps = std::vector<int>{6};
    auto found = enumerate_matching(6, opt, [](const TrainTrack& tr) {
      if (tr.surface.genus != 2 || tr.surface.punctures != 0) return false;
      const auto ty = type_of(tr);
      if (!ty || ty->m != std::vector<int>{4}) return false;
      if (is_orientable(tr).orientable) return false;
      return is_recurrent(tr).recurrent;
    }, 1);
    if (found.empty()) throw std::runtime_error("no non-orientable (4;0,0) track found");
    return found[0];
  }();
  return t;
}

}  // namespace ttseeds
