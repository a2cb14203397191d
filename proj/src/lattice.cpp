#include "rnls/lattice.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <set>

namespace rnls {

std::vector<Site> sites_in_ball(int R) {
  std::vector<Site> out;
  const std::int64_t r2 = std::int64_t(R) * R;
  for (int x = -R; x <= R; ++x)
    for (int y = -R; y <= R; ++y)
      if (std::int64_t(x) * x + std::int64_t(y) * y <= r2)
        out.push_back({x, y});
  return out;
}

TangentialSet::TangentialSet(std::vector<Site> sites) : sites_(std::move(sites)) {
  if (sites_.empty()) throw InvalidConfig("tangential set must be non-empty");
  auto sorted = sites_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InvalidConfig("tangential set has duplicate sites");
}

bool TangentialSet::contains(Site n) const { return index_of(n) >= 0; }

int TangentialSet::index_of(Site n) const {
  for (std::size_t a = 0; a < sites_.size(); ++a)
    if (sites_[a] == n) return int(a);
  return -1;
}

int TangentialSet::max_norm_ceil() const {
  std::int64_t m = 0;
  for (Site s : sites_) m = std::max(m, norm_sq(s));
  int r = int(std::ceil(std::sqrt(double(m))));
  while (std::int64_t(r) * r < m) ++r;
  return r;
}

namespace {

// Exact integer square root test.
bool perfect_square(std::int64_t v, std::int64_t& root) {
  if (v < 0) return false;
  root = std::int64_t(std::llround(std::sqrt(double(v))));
  while (root * root > v) --root;
  while ((root + 1) * (root + 1) <= v) ++root;
  return root * root == v;
}

// Canonical representative of an unordered resonance: the orientation with
// n lexicographically greater than m. Swapping (n,m) swaps the triplet
// orientation for first-type pairs; second-type triplets are unordered.
ResonantPair canonical(ResonantPair p) {
  if (p.n < p.m) {
    std::swap(p.n, p.m);
    if (p.kind == ResonanceKind::First) std::swap(p.i, p.j);
  }
  if (p.kind == ResonanceKind::Second && p.j < p.i) std::swap(p.i, p.j);
  return p;
}

void sort_unique(std::vector<ResonantPair>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

std::vector<ResonantPair> enumerate_second_type(const TangentialSet& I) {
  std::vector<ResonantPair> out;
  const auto& S = I.sites();
  for (std::size_t a = 0; a < S.size(); ++a) {
    for (std::size_t b = a; b < S.size(); ++b) {
      const Site i = S[a], j = S[b];
      const Site c = i + j;
      // n + m = i + j and |n|^2 + |m|^2 = |i|^2 + |j|^2 confine
      // u = 2n - (i+j) to the circle |u|^2 = |i-j|^2.
      const std::int64_t rad2 = norm_sq(i - j);
      std::int64_t u2max = 0;
      perfect_square(rad2, u2max);  // floor sqrt as loop bound
      for (std::int64_t u1 = -u2max; u1 <= u2max; ++u1) {
        std::int64_t u2;
        if (!perfect_square(rad2 - u1 * u1, u2)) continue;
        for (int sgn = 0; sgn < (u2 == 0 ? 1 : 2); ++sgn) {
          const std::int64_t v2 = sgn == 0 ? u2 : -u2;
          if (((u1 + c.n1) & 1) || ((v2 + c.n2) & 1)) break;  // parity
          const Site n{int((u1 + c.n1) / 2), int((v2 + c.n2) / 2)};
          const Site m = c - n;
          if (I.contains(n) || I.contains(m)) continue;
          out.push_back(canonical({ResonanceKind::Second, n, m, i, j}));
        }
      }
    }
  }
  sort_unique(out);
  return out;
}

std::vector<ResonantPair> enumerate_first_type(const TangentialSet& I, int R) {
  std::vector<ResonantPair> out;
  const auto& S = I.sites();
  const std::int64_t r2 = std::int64_t(R) * R;
  for (std::size_t a = 0; a < S.size(); ++a) {
    for (std::size_t b = 0; b < S.size(); ++b) {
      if (a == b) continue;  // i = j forces n = m (kept in the normal form)
      const Site i = S[a], j = S[b];
      const Site c = i - j;
      // The constraints reduce to <n - j, i - j> = 0: n runs along the
      // line through j with primitive direction e perpendicular to i - j.
      const int g = int(std::gcd(std::abs(c.n1), std::abs(c.n2)));
      const Site e{-c.n2 / g, c.n1 / g};
      const int smax = R + I.max_norm_ceil() + 1;
      for (int s = -smax; s <= smax; ++s) {
        const Site n = j + e * s;
        const Site m = i + e * s;
        if (norm_sq(n) > r2 || norm_sq(m) > r2) continue;
        if (I.contains(n) || I.contains(m)) continue;
        out.push_back(canonical({ResonanceKind::First, n, m, i, j}));
      }
    }
  }
  sort_unique(out);
  return out;
}

namespace {

// All triplets (kind, i, j, m) making the queried site n resonant.
std::vector<ResonantPair> collect_triplets(const TangentialSet& I, Site n) {
  std::vector<ResonantPair> found;
  if (I.contains(n)) return found;
  const auto& S = I.sites();
  for (std::size_t a = 0; a < S.size(); ++a) {
    for (std::size_t b = 0; b < S.size(); ++b) {
      const Site i = S[a], j = S[b];
      if (a != b) {
        // first type: m = n + (i - j), lambda condition <n - j, i - j> = 0
        if (dot(n - j, i - j) == 0) {
          const Site m = n + (i - j);
          if (!I.contains(m))
            found.push_back({ResonanceKind::First, n, m, i, j});
        }
      }
      if (b >= a) {
        // second type: m = (i + j) - n with the norm constraint
        const Site m = i + j - n;
        if (norm_sq(n) + norm_sq(m) == norm_sq(i) + norm_sq(j) &&
            !I.contains(m)) {
          found.push_back({ResonanceKind::Second, n, m, i, j});
        }
      }
    }
  }
  // Deduplicate second-type triplets that differ only by (i,j) order.
  for (auto& p : found)
    if (p.kind == ResonanceKind::Second && p.j < p.i) std::swap(p.i, p.j);
  sort_unique(found);
  return found;
}

}  // namespace

SiteClass classify_site(const TangentialSet& I, Site n, int /*R*/) {
  if (I.contains(n)) return {SiteTag::Tangential, std::nullopt};
  auto triplets = collect_triplets(I, n);
  if (triplets.empty()) return {SiteTag::Generic, std::nullopt};
  if (triplets.size() > 1) {
    std::string msg = "site " + to_string(n) + " has " +
                      std::to_string(triplets.size()) + " resonant triplets:";
    for (const auto& t : triplets)
      msg += " [" + std::string(t.kind == ResonanceKind::First ? "L1" : "L2") +
             " i=" + to_string(t.i) + " j=" + to_string(t.j) +
             " m=" + to_string(t.m) + "]";
    throw AmbiguousResonance(msg);
  }
  const auto& p = triplets.front();
  return {p.kind == ResonanceKind::First ? SiteTag::FirstType
                                         : SiteTag::SecondType,
          p};
}

AdmissibilityVerdict check_admissible(const TangentialSet& I, int R) {
  AdmissibilityVerdict v;
  v.verified_radius = R;
  v.note =
      "verified: triplet uniqueness, L1/L2 disjointness and involution "
      "symmetry for |n| <= R; further admissibility conditions from the "
      "literature are not restated here and were not checked";

  std::set<ResonantPair> l1, l2;
  for (Site n : sites_in_ball(R)) {
    if (I.contains(n)) continue;
    auto triplets = collect_triplets(I, n);
    if (triplets.empty()) continue;

    if (triplets.size() > 1) {
      v.uniqueness_ok = false;
      bool has1 = false, has2 = false;
      for (const auto& t : triplets) {
        (t.kind == ResonanceKind::First ? has1 : has2) = true;
      }
      if (has1 && has2) v.disjoint_ok = false;
      v.violations.push_back(
          {n,
           has1 && has2 ? "site lies in both L1 and L2"
                        : "site has multiple resonant triplets of one kind",
           triplets});
      continue;
    }

    const auto& p = triplets.front();
    (p.kind == ResonanceKind::First ? l1 : l2).insert(canonical(p));

    // Involution: the partner's unique triplet must mirror this one.
    auto back = collect_triplets(I, p.m);
    const ResonantPair expect =
        p.kind == ResonanceKind::First
            ? ResonantPair{p.kind, p.m, p.n, p.j, p.i}
            : ResonantPair{p.kind, p.m, p.n, std::min(p.i, p.j),
                           std::max(p.i, p.j)};
    if (back.size() != 1 || !(back.front() == expect)) {
      v.involution_ok = false;
      v.violations.push_back({n, "partner triplet is not the mirror", back});
    }
  }
  v.l1_count = l1.size();
  v.l2_count = l2.size();
  v.admissible = v.uniqueness_ok && v.disjoint_ok && v.involution_ok;
  return v;
}

bool LatticeClassification::is_resonant(Site n) const {
  return pair_for(n) != nullptr;
}

const ResonantPair* LatticeClassification::pair_for(Site n) const {
  auto it = std::lower_bound(
      resonant_sites.begin(), resonant_sites.end(), n,
      [](const auto& e, Site s) { return e.first < s; });
  if (it != resonant_sites.end() && it->first == n) return &it->second;
  return nullptr;
}

LatticeClassification classify_all(const TangentialSet& I, int R) {
  LatticeClassification c;
  c.I = I;
  c.R = R;
  c.l2 = enumerate_second_type(I);
  c.l1 = enumerate_first_type(I, R);
  for (Site n : sites_in_ball(R)) {
    auto sc = classify_site(I, n, R);  // throws on ambiguity
    if (sc.pair) c.resonant_sites.emplace_back(n, *sc.pair);
  }
  std::sort(c.resonant_sites.begin(), c.resonant_sites.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return c;
}

}  // namespace rnls
