#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "rnls/errors.hpp"

namespace rnls {

/// A Fourier lattice site n in Z^2. The Laplacian eigenvalue at n is
/// norm_sq(n) = n1^2 + n2^2.
struct Site {
  int n1 = 0;
  int n2 = 0;

  friend auto operator<=>(const Site&, const Site&) = default;

  Site operator+(Site o) const { return {n1 + o.n1, n2 + o.n2}; }
  Site operator-(Site o) const { return {n1 - o.n1, n2 - o.n2}; }
  Site operator-() const { return {-n1, -n2}; }
  Site operator*(int s) const { return {s * n1, s * n2}; }
};

inline std::int64_t norm_sq(Site n) {
  return std::int64_t(n.n1) * n.n1 + std::int64_t(n.n2) * n.n2;
}

inline double norm(Site n) { return std::sqrt(double(norm_sq(n))); }

inline std::int64_t dot(Site a, Site b) {
  return std::int64_t(a.n1) * b.n1 + std::int64_t(a.n2) * b.n2;
}

inline std::string to_string(Site n) {
  return "(" + std::to_string(n.n1) + "," + std::to_string(n.n2) + ")";
}

/// All lattice sites with |n| <= R, in lexicographic order.
std::vector<Site> sites_in_ball(int R);

/// The ordered tangential set I = {i^(1), ..., i^(b)} of excited modes.
class TangentialSet {
 public:
  TangentialSet() = default;
  explicit TangentialSet(std::vector<Site> sites);

  int b() const { return int(sites_.size()); }
  const std::vector<Site>& sites() const { return sites_; }
  Site site(int a) const { return sites_.at(a); }

  bool contains(Site n) const;
  /// Index of n in the set, or -1.
  int index_of(Site n) const;

  /// max_a |i^(a)| rounded up.
  int max_norm_ceil() const;

 private:
  std::vector<Site> sites_;
};

}  // namespace rnls
