#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rnls/site.hpp"

namespace rnls {

enum class ResonanceKind { First, Second };

/// A resonant pair (n, m) of normal sites together with the tangential
/// triplet (i, j) coupling them.
///
/// First type:  i - j + n - m = 0 and |i|^2 - |j|^2 + |n|^2 - |m|^2 = 0,
///              (i, j) ordered, i != j. Solutions lie on lattice lines.
/// Second type: -i - j + n + m = 0 and -|i|^2 - |j|^2 + |n|^2 + |m|^2 = 0,
///              {i, j} unordered. Solutions lie on lattice circles, hence
///              finitely many.
struct ResonantPair {
  ResonanceKind kind;
  Site n, m;
  Site i, j;

  friend auto operator<=>(const ResonantPair&, const ResonantPair&) = default;
};

enum class SiteTag { Tangential, FirstType, SecondType, Generic };

/// Classification of one site: Generic sites form Z^2_2; resonant sites
/// carry their unique pair (block dimension 2), everything else is scalar.
struct SiteClass {
  SiteTag tag = SiteTag::Generic;
  std::optional<ResonantPair> pair;  // set for FirstType / SecondType

  int block_dim() const {
    return (tag == SiteTag::FirstType || tag == SiteTag::SecondType) ? 2 : 1;
  }
};

/// All second-type pairs for I. Exhaustive: the quadratic constraint
/// confines (n, m) to a circle of radius |i-j|/2, solved exactly over the
/// integers. Each resonance is listed once, n lexicographically greater
/// than m, {i, j} sorted.
std::vector<ResonantPair> enumerate_second_type(const TangentialSet& I);

/// All first-type pairs with max(|n|, |m|) <= R. Trivial i = j solutions
/// (which force n = m) are excluded. Each unordered resonance is listed
/// once with n lexicographically greater than m; the stored (i, j) is the
/// orientation matching that representative.
std::vector<ResonantPair> enumerate_first_type(const TangentialSet& I, int R);

/// Tags one site. The returned pair (when resonant) has the queried site
/// in the n slot. Throws AmbiguousResonance if the site carries more than
/// one triplet. The classification itself is exact (independent of R).
SiteClass classify_site(const TangentialSet& I, Site n, int R);

struct AdmissibilityViolation {
  Site site;
  std::string reason;
  std::vector<ResonantPair> witnesses;
};

struct AdmissibilityVerdict {
  bool admissible = false;
  int verified_radius = 0;
  bool uniqueness_ok = true;   // every resonant site has exactly one triplet
  bool disjoint_ok = true;     // L1 and L2 do not overlap
  bool involution_ok = true;   // partner of a partner is the original site
  std::size_t l1_count = 0;    // first-type resonances with |n| <= R
  std::size_t l2_count = 0;    // second-type resonances (all of them)
  std::vector<AdmissibilityViolation> violations;
  /// Only the uniqueness/disjointness/involution properties are checked;
  /// any further conditions on admissible sets from the literature are out
  /// of scope and flagged here.
  std::string note;
};

/// Checks uniqueness of triplets, L1 ∩ L2 = ∅ and involution symmetry for
/// every site with |n| <= R. Failures are collected, never thrown.
AdmissibilityVerdict check_admissible(const TangentialSet& I, int R);

/// Classification of every site in the ball |n| <= R, plus the pair lists.
/// Throws AmbiguousResonance on the first non-unique triplet.
struct LatticeClassification {
  TangentialSet I;
  int R = 0;
  std::vector<ResonantPair> l1;  // max(|n|,|m|) <= R
  std::vector<ResonantPair> l2;
  /// Pair (with queried site in the n slot) for each resonant site in the
  /// ball, in lexicographic site order.
  std::vector<std::pair<Site, ResonantPair>> resonant_sites;

  bool is_resonant(Site n) const;
  const ResonantPair* pair_for(Site n) const;
};

LatticeClassification classify_all(const TangentialSet& I, int R);

}  // namespace rnls
