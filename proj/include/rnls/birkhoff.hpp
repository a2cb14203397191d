#pragma once

#include <array>
#include <string>
#include <vector>

#include "rnls/lattice.hpp"
#include "rnls/polyvf.hpp"

namespace rnls {

/// Frequency that is affine in the amplitude parameters xi with an exact
/// integer eps^{-4} part:
///   value(xi, eps) = quartic * eps^{-4} + (constant + sum lin[a]*xi_{ha}) / (4 pi^2).
/// The linear coefficients are exact integers in units of 1/(4 pi^2).
struct AffineFrequency {
  std::int64_t quartic = 0;       // coefficient of eps^{-4}
  std::int64_t constant = 0;      // units of 1/(4 pi^2)
  std::vector<int> lin;           // per tangential index a, units of 1/(4 pi^2)

  double analytic(const std::vector<double>& xi_h) const;
  double value(const std::vector<double>& xi_h, double eps) const;
};

/// Normal-frequency block M_{hn}: scalar on Z^2_2, a 2x2 coupling block on
/// resonant pairs. For both resonance types the eps^{-4} parts of the two
/// diagonal entries coincide (a consequence of the resonance relations), so
/// the block is quartic_diag * eps^{-4} * Id + analytic part.
struct MelnikovBlock {
  int dim = 1;
  ResonanceKind kind = ResonanceKind::First;  // meaningful when dim == 2
  Site n, m;
  int ai = -1, aj = -1;       // tangential indices of the coupling pair
  std::int64_t quartic = 0;   // shared diagonal eps^{-4} coefficient
  AffineFrequency diag0, diag1;

  /// Analytic (eps-free) part of the block at xi_h; entries in row-major
  /// order for dim == 2. A = sqrt(xi_i xi_j)/(2 pi^2) with the L1 pattern
  /// [[., A], [A, .]] and the L2 pattern [[., A], [-A, .]].
  std::array<double, 4> analytic(const std::vector<double>& xi_h) const;
};

/// Closed-form frequency data of the normal form:
///   omega_{hi}  = eps^{-4}|i|^2 - xi_{hi}/(4 pi^2) + sum_j xi_{hj}/(2 pi^2)
///   Omega_{hn}  = eps^{-4}|n|^2 + sum_i xi_{hi}/(2 pi^2)
/// plus the coupling blocks on resonant pairs. The analytic part of Omega
/// does not depend on n, so it is stored once per component.
struct FrequencyData {
  int d = 0;
  int b = 0;
  TangentialSet I;
  std::vector<AffineFrequency> omega;    // per a (same for every h)
  AffineFrequency Omega0;                // analytic part of Omega_{hn}
  std::vector<MelnikovBlock> blocks;     // resonant 2x2 blocks, both h share

  double omega_value(int a, const std::vector<double>& xi_h, double eps) const;
  double Omega_value(Site n, const std::vector<double>& xi_h, double eps) const;
  /// Scalar block for a generic site.
  MelnikovBlock scalar_block(Site n) const;
};

/// Homological field F for the cubic part: one term per cubic monomial of
/// P3 that has at least two tangential indices (counted with multiplicity
/// over exponents and target) and nonzero integer denominator
///   delta = sum_exponents sign*|site|^2 - sign_target*|target|^2.
/// The coefficient is chosen so that [F, X_lin] + (that monomial) = 0:
///   f = -i * c / delta.
/// Resonant monomials (delta = 0) are left out; they stay in the normal
/// form. Throws ZeroDivisor only if an inconsistent selection is forced.
PolyVectorField solve_homological(const PolyVectorField& P3,
                                  const TangentialSet& I);

/// Multiset count of tangential indices of one monomial (exponents plus
/// target).
int tangential_count(const MonomialTerm& t, const TangentialSet& I);

/// Integer homological denominator of one monomial.
std::int64_t homological_denominator(const MonomialTerm& t);

struct RemainderStats {
  std::size_t term_bound = 0;   // upper bound on degree-5 terms not formed
  double coeff_bound = 0.0;     // upper bound on their coefficients
};

/// Degree-3 truncation of the time-1 flow pushforward of X along F:
/// X + [F, X_lin]. Higher Lie-series terms are degree >= 5 and are only
/// counted/bounded (stats), never formed.
PolyVectorField pushforward_order3(const PolyVectorField& X,
                                   const PolyVectorField& F,
                                   RemainderStats* stats = nullptr);

struct FamilyReport {
  std::string name;
  cd expected;        // coefficient at eps^1
  std::size_t count = 0;
  double worst_rel_err = 0.0;
};

struct NormalFormReport {
  /// Largest |coefficient| of a remaining cubic term with >= 2 tangential
  /// indices that is not one of the expected resonant families.
  double residual_nonresonant = 0.0;
  std::size_t residual_count = 0;
  std::vector<FamilyReport> families;
  bool cross_component_clean = true;  // no h != h' cubic coupling
  // F statistics
  std::size_t f_terms = 0;
  std::int64_t min_abs_denominator = 0;
  RemainderStats remainder;
  double tolerance = 1e-12;
  bool pass = false;
};

/// Tabulates the five resonant families of the cubic normal form
/// (self-action i/4pi^2; cross-action, tangential-normal action, first- and
/// second-type couplings i/2pi^2, conjugate families mirrored) and the
/// worst unidentified residual.
NormalFormReport extract_normal_form(const PolyVectorField& Xt,
                                     const LatticeClassification& cls);

/// Full cubic normal-form step at truncation R: build P0 and the linear
/// rotation, solve the homological equation, push forward feature-complete
/// and extract the report.
struct NormalFormResult {
  PolyVectorField F;
  PolyVectorField transformed;
  NormalFormReport report;
};
NormalFormResult normal_form_pipeline(int d, int R, const TangentialSet& I);

/// Exact frequency data of the normal form for an admissible set.
FrequencyData frequencies(const TangentialSet& I,
                          const LatticeClassification& cls, int d, int b);

/// The b x b Jacobian d omega_h / d xi_h = (1/4pi^2)(1 on the diagonal,
/// 2 off) and its determinant, exact: det = (-1)^(b-1) (2b-1) / (4pi^2)^b.
struct NondegeneracyResult {
  int b = 0;
  std::vector<std::vector<double>> jacobian;
  std::int64_t det_scaled = 0;  // integer det of (4pi^2 J) = (-1)^(b-1)(2b-1)
  double det = 0.0;
};
NondegeneracyResult verify_nondegeneracy(int b);

}  // namespace rnls
