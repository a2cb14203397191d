#pragma once

// Brute-force oracles, independent of the production enumeration routes:
// they scan the defining equations directly over the truncated lattice.

#include <algorithm>
#include <set>
#include <vector>

#include "rnls/lattice.hpp"

namespace rnls::oracle {

// Canonical tuple for set comparison: the lexicographically smaller of the
// two involution-equivalent orientations.
inline ResonantPair canon(ResonantPair p) {
  ResonantPair alt = p;
  std::swap(alt.n, alt.m);
  if (p.kind == ResonanceKind::First) std::swap(alt.i, alt.j);
  if (p.kind == ResonanceKind::Second) {
    if (p.j < p.i) std::swap(p.i, p.j);
    if (alt.j < alt.i) std::swap(alt.i, alt.j);
  }
  return std::min(p, alt);
}

inline std::set<ResonantPair> canon_set(const std::vector<ResonantPair>& v) {
  std::set<ResonantPair> out;
  for (const auto& p : v) out.insert(canon(p));
  return out;
}

// All quadruples (i, j, n, m) in I x I x (Z^2 \ I)^2 with max(|n|,|m|) <= R
// satisfying the first-type equations; i = j excluded as trivial.
inline std::set<ResonantPair> brute_first(const TangentialSet& I, int R) {
  std::set<ResonantPair> out;
  const std::int64_t r2 = std::int64_t(R) * R;
  for (Site i : I.sites())
    for (Site j : I.sites()) {
      if (i == j) continue;
      for (Site n : sites_in_ball(R)) {
        const Site m = n + i - j;  // i - j + n - m = 0
        if (norm_sq(m) > r2) continue;
        if (norm_sq(i) - norm_sq(j) + norm_sq(n) - norm_sq(m) != 0) continue;
        if (I.contains(n) || I.contains(m)) continue;
        out.insert(canon({ResonanceKind::First, n, m, i, j}));
      }
    }
  return out;
}

// Same for the second type.
inline std::set<ResonantPair> brute_second(const TangentialSet& I, int R) {
  std::set<ResonantPair> out;
  const std::int64_t r2 = std::int64_t(R) * R;
  for (Site i : I.sites())
    for (Site j : I.sites()) {
      for (Site n : sites_in_ball(R)) {
        const Site m = i + j - n;  // -i - j + n + m = 0
        if (norm_sq(m) > r2) continue;
        if (norm_sq(n) + norm_sq(m) != norm_sq(i) + norm_sq(j)) continue;
        if (I.contains(n) || I.contains(m)) continue;
        out.insert(canon({ResonanceKind::Second, n, m, i, j}));
      }
    }
  return out;
}

}  // namespace rnls::oracle
