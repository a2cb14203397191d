#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <vector>

#include "rnls/site.hpp"

namespace rnls {

using cd = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kFourPiSq = 4.0 * kPi * kPi;  // (2*pi)^2

/// One coordinate of the mode phase space: q_{hn} (sign +1) or its
/// conjugate variable (sign -1). Component index h is 0-based. The field
/// order (h, n, sign) fixes the canonical term order; sign comes last so
/// that conjugating a whole field permutes sorted sequences only by
/// adjacent same-site swaps, which keeps merged sums bit-exact mirrors.
struct ModeVar {
  std::int16_t h = 0;
  Site n;
  std::int16_t sign = +1;

  friend auto operator<=>(const ModeVar&, const ModeVar&) = default;

  ModeVar conjugated() const { return {h, n, std::int16_t(-sign)}; }
};

struct ExpEntry {
  ModeVar var;
  int pow = 0;

  friend auto operator<=>(const ExpEntry&, const ExpEntry&) = default;
};

/// Exponent multiset of one monomial, sorted by variable, no zero entries.
class Exponents {
 public:
  static constexpr int kCap = 6;

  int size() const { return n_; }
  const ExpEntry* begin() const { return e_.data(); }
  const ExpEntry* end() const { return e_.data() + n_; }
  const ExpEntry& operator[](int k) const { return e_[k]; }

  int degree() const;
  int power_of(const ModeVar& v) const;

  /// Inserts or accumulates one variable power (keeps sort order).
  void mul(const ModeVar& v, int pow);
  /// Removes one power of v (v must be present).
  void div_once(const ModeVar& v);

  friend auto operator<=>(const Exponents& a, const Exponents& b) = default;

 private:
  std::array<ExpEntry, kCap> e_{};
  int n_ = 0;
};

/// c * eps^eps_pow * q^alpha qbar^beta  d/d(target).
struct MonomialTerm {
  ModeVar target;
  cd coeff;
  int eps_pow = 0;
  Exponents exps;

  int degree() const { return exps.degree(); }
};

struct TermKey {
  ModeVar target;
  int eps_pow;
  Exponents exps;
  friend auto operator<=>(const TermKey&, const TermKey&) = default;
};

inline TermKey key_of(const MonomialTerm& t) {
  return {t.target, t.eps_pow, t.exps};
}

/// Sparse polynomial vector field over the mode variables of d components,
/// truncated to sites with |n| <= R. Terms are kept in canonical order
/// with merged coefficients; merged terms below 1e-15 in magnitude are
/// dropped and counted in `dropped`.
class PolyVectorField {
 public:
  static constexpr double kDropTol = 1e-15;

  PolyVectorField() = default;
  PolyVectorField(int d, int R) : d_(d), R_(R) {}

  int d() const { return d_; }
  int R() const { return R_; }
  const std::vector<MonomialTerm>& terms() const { return terms_; }
  std::size_t dropped() const { return dropped_; }

  void add_term(MonomialTerm t) { terms_.push_back(std::move(t)); }
  void reserve(std::size_t n) { terms_.reserve(n); }

  /// Sort, merge duplicate keys, drop near-zero coefficients.
  void normalize();

  /// Max |coeff| over terms (0 for the empty field).
  double max_abs_coeff() const;

  /// Coefficient of an exact (target, exponents, eps_pow) key, 0 if absent.
  cd coeff_of(const TermKey& k) const;

  PolyVectorField& operator+=(const PolyVectorField& o);
  PolyVectorField scaled(cd factor) const;

 private:
  int d_ = 1;
  int R_ = 0;
  std::vector<MonomialTerm> terms_;
  std::size_t dropped_ = 0;
};

/// Cubic lattice perturbation of the coupled NLS: for every component h and
/// every (i, j, m, n) with i + j - m - n = 0 inside the ball of radius R,
/// the term (i/4pi^2) q_{hi} q_{hj} qbar_{hm} d/dq_{hn}, plus the conjugate
/// family. Symmetric (i, j) contributions are merged; every term carries
/// eps^1.
PolyVectorField build_cubic_P0(int d, int R);

/// Diagonal rotation  i|n|^2 q d/dq - i|n|^2 qbar d/dqbar.
PolyVectorField build_linear_lambda(int d, int R);

/// Momentum field M^(l): sum of sign * i * (n)_l q^sign d/dq^sign, l in {1,2}.
PolyVectorField build_momentum_field(int d, int R, int l);

/// Lie bracket [X, Y] = (X.grad)Y - (Y.grad)X, so that for a diagonal
/// linear field L with weights i*w the bracket [L, c*M d/dv] has
/// coefficient i*(sum_exponents +-w - w_target)*c on the same monomial.
/// Terms of degree above max_degree are not formed when max_degree >= 0.
PolyVectorField lie_bracket(const PolyVectorField& X, const PolyVectorField& Y,
                            int max_degree = -1);

enum class OverflowPolicy { Throw, Drop };

/// Restricts X to sites with |n| <= R; out-of-ball terms either raise
/// TruncationOverflow or are dropped and counted.
PolyVectorField truncate_to_radius(const PolyVectorField& X, int R,
                                   OverflowPolicy policy,
                                   std::size_t* dropped = nullptr);

/// Reversibility with respect to S(q, qbar) = (qbar, q): true iff
/// DS . X(S y) = -X(y), i.e. flipping the sign of every mode variable maps
/// each term onto the negation of a term of X.
bool check_reversible(const PolyVectorField& X);

/// Momentum conservation in the l-th lattice coordinate: every term must
/// satisfy sum_exponents sign*(n)_l - sign_target*(target)_l = 0.
/// Equivalent to [X, M^(l)] = 0.
bool check_momentum(const PolyVectorField& X, int l);

/// Finitely supported mode coefficient sequence, all components.
using ModeKey = std::pair<int, Site>;  // (h, n)
using ModeSeq = std::map<ModeKey, cd>;

/// Weighted l1 norm  sum_h sum_n e^{|n| rho} |z_{hn}|.
double seq_norm(const ModeSeq& z, double rho);

/// Upper bound for the weighted vector-field norm on the ball
/// ||z_h||_rho < s (z-sector of the analytic norm): each monomial is
/// maximized separately via weighted AM-GM, which is exact for
/// single-monomial fields. Evaluated at eps = 1.
double vf_norm_upper(const PolyVectorField& X, double rho, double s);

/// Evaluates the q-sector of X at a state (conjugate variables take the
/// complex conjugate of the stored values). eps substitutes the symbolic
/// eps factor.
ModeSeq apply(const PolyVectorField& X, const ModeSeq& state, double eps = 1.0);

struct TLBudget {
  double rho = 0.3;   // weight for decay bounds
  double s = 0.5;     // ball radius for derivative norms
  double eps0 = 1.0;  // size constant in the (A6) bounds
  int t_count = 4;    // how many t samples beyond K
  int max_offset = 1; // |n|, |m| range of sampled entries
};

struct TLEntry {
  Site n, m;
  int h_row = 0, h_col = 0;
  int sigma_row = +1, sigma_col = +1;  // sign of row var / column var
  bool limit_exists = false;
  bool stabilized_exactly = false;  // fixed-monomial coefficients constant
  double limit_norm = 0.0;          // weighted norm of the limit derivative
  double decay_bound = 0.0;         // eps0 * e^{-|n -+ m| rho}
  bool decay_ok = false;
  double max_defect = 0.0;          // sup_t || D_t - limit ||
  double max_defect_times_t = 0.0;  // sup_t |t| * defect(t)
  bool lipschitz_ok = false;        // defect(t) <= eps0/|t| for sampled t > K
};

struct TLReport {
  Site direction;
  int K = 0;
  std::vector<int> t_samples;
  std::vector<TLEntry> entries;
  bool limits_ok = true;
  bool decay_ok = true;
  bool lipschitz_ok = true;
  double max_defect = 0.0;  // over all entries
  bool pass() const { return limits_ok && decay_ok && lipschitz_ok; }
};

/// Samples the Jacobian entries  d X^(z^s_{h,(n+tc)}) / d z^(+-s)_{h',(m+-tc)}
/// along t, detects stabilization of the t-independent monomial
/// coefficients (exact for translation-invariant cubic coefficients), and
/// checks the decay and 1/|t| Lipschitz bounds. Throws TruncationTooSmall
/// if no t with |t| > K fits inside the truncation.
TLReport toeplitz_lipschitz_check(const PolyVectorField& X, Site c, int K,
                                  const TLBudget& budget = {});

}  // namespace rnls
