#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rnls/birkhoff.hpp"

namespace rnls {

/// Product parameter box O = prod_h [h - 1/2, h]^b (components numbered
/// from 1). Adjacent component boxes are separated by at least 1/2 per
/// coordinate, so |xi_h - xi_h'|_1 >= b/2 for h != h'.
struct ParameterBox {
  int d = 1;
  int b = 1;

  double lower(int h) const { return h + 0.5; }  // h is 0-based
  double upper(int h) const { return h + 1.0; }

  bool contains(const std::vector<std::vector<double>>& xi) const;
  double min_l1_separation() const { return b / 2.0; }
};

/// One failed non-resonance inequality.
struct MelViolation {
  std::string condition;
  std::vector<int> k;
  int h = 0, h2 = 0;
  std::string block;  // textual block/site description
  double value = 0.0;
  double threshold = 0.0;
};

struct ConditionStats {
  std::string name;
  /// Number of (k, family) instances examined. A family covers every site
  /// sharing the same analytic divisor (the analytic parts are
  /// n-independent), so one instance may stand for many lattice sites.
  std::size_t checked = 0;
  std::size_t auto_passed = 0;   // nonzero integer eps^-4 part
  std::size_t numeric = 0;       // analytic part evaluated
  std::size_t failed = 0;
  /// (k, family) instances whose divisor is identically zero in xi: kernel
  /// directions of the normal form (the retained coupling), excluded from
  /// the inequalities and reported here. For block determinants only the
  /// kernel factor is dropped; the reduced determinant is still checked.
  std::size_t kernel = 0;
  /// min over numeric instances of |divisor| * max(|k|_1, 1)^tau / gamma;
  /// pass requires >= 1. Infinity when nothing was evaluated numerically.
  double worst_margin = 0.0;
};

struct MelnikovReport {
  // configuration echo
  double gamma = 0.0, tau = 0.0, eps = 0.0;
  int kmax = 0, radius = 0;
  std::string k_norm = "l1";
  std::vector<std::vector<double>> xi;

  std::vector<ConditionStats> conditions;
  std::vector<MelViolation> violations;  // capped
  double mel14_margin = 0.0;             // min gap |Omega0_h - Omega0_h'|
  double mel14_bound = 0.0;              // b / (4 pi^2)
  /// min over every checked instance of |divisor| * max(|k|,1)^tau
  /// (gamma-free); the sample passes at gamma iff min_margin >= gamma.
  double min_margin = 0.0;
  bool pass = false;
};

/// Checks (Mel1), (Mel2) (including k = 0, reported separately), (Mel13)
/// and the gap condition (Mel14) for a single parameter point xi over
/// |k|_1 <= kmax and sites |n| <= R. Divisors split into the integer
/// eps^-4 part and the analytic part; instances with a nonzero integer
/// part are auto-passed by scale separation.
MelnikovReport check_conditions(const std::vector<std::vector<double>>& xi,
                                double eps, double gamma, double tau, int kmax,
                                int R, const FrequencyData& freq);

struct ScanRow {
  double gamma = 0.0;
  std::size_t excluded = 0;
  double fraction = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // 95% Wilson interval
};

struct ScanResult {
  std::vector<ScanRow> rows;  // ordered as the input gamma list
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double fitted_slope = 0.0;      // d log10 fraction / d log10 gamma
  double fitted_intercept = 0.0;  // log10 fraction at log10 gamma = 0
  std::string note;
};

/// Monte-Carlo estimate of the excluded-parameter fraction as a function
/// of gamma. One margin per sample is computed (the minimum gamma-free
/// ratio over all conditions), so exclusion sets are nested by
/// construction and the fractions are monotone in gamma exactly.
ScanResult scan_measure(const ParameterBox& box,
                        const std::vector<double>& gamma_list, double tau,
                        double eps, int kmax, int R, std::size_t samples,
                        std::uint64_t seed, const FrequencyData& freq,
                        int threads = 1);

/// Determinant of the full db x db Jacobian d omega / d xi (block diagonal
/// with identical b x b blocks). Nonzero for every b >= 1.
bool check_nondegeneracy(const FrequencyData& freq, double* det = nullptr);

}  // namespace rnls
