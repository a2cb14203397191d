#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "rnls/polyvf.hpp"

namespace rnls {

/// Real polynomial in the intensities (s_1, ..., s_d), s_h = |u_h|^2.
/// Every term must have total degree >= 3 so the induced lattice terms are
/// degree >= 5 in (u, ubar).
struct GPoly {
  struct Term {
    double c = 0.0;
    std::vector<int> p;  // exponent per component
  };
  std::vector<Term> terms;

  /// d G / d s_h evaluated at s.
  double dpartial(int h, const std::vector<double>& s) const;
  int max_total_degree() const;
};

struct SimTolerances {
  double amp_drift = 0.01;        // relative tangential amplitude drift
  double normal_sup_factor = 10;  // bound = factor * (max xi)^{3/2}
  double freq_tol = 1e-6;         // |fitted - predicted| frequency error
  double mass_tol = 1e-10;        // relative mass drift
};

struct SimConfig {
  int d = 1;
  int b = 1;
  std::vector<Site> sites;               // tangential set, shared by all h
  std::vector<std::vector<double>> xi;   // amplitudes xi[h][a], in (0, 1e-2]
  std::vector<GPoly> G;                  // per component; may be empty
  int N = 64;                            // grid size per dimension (power of 2)
  double dt = 1e-3;
  double T = 100.0;
  int stride = 50;                       // sampling stride (must divide steps)
  std::uint64_t seed = 0;
  SimTolerances tol;
  bool dealias = true;                   // 2/3 rule on the nonlinear image
  bool first_order_correction = false;   // seed normal modes with the F image
  double blowup_sup = 100.0;             // abort when max_x |u_h| exceeds this
  std::vector<Site> tracked_extra;

  std::size_t steps() const;
  void validate() const;  // throws InvalidConfig / ConfigError
};

/// Spectral state of all components; coefficients q_{hn} with respect to
/// the orthonormal basis phi_n = (2 pi)^{-1} e^{i<n,x>}, wrapped indices.
class FieldState {
 public:
  FieldState() = default;
  FieldState(int d, int N);

  int d() const { return d_; }
  int N() const { return N_; }
  cd at(int h, Site n) const;
  void set(int h, Site n, cd v);
  /// Per-component mass sum_n |q_{hn}|^2 (= integral |u_h|^2 by Parseval).
  double mass(int h) const;
  /// max_{n not in I} |q_{hn}|.
  double normal_sup(int h, const std::vector<Site>& I) const;
  void conjugate_inplace();  // q -> qbar (the involution S)

  std::vector<cd>& raw(int h) { return q_[h]; }
  const std::vector<cd>& raw(int h) const { return q_[h]; }
  std::size_t index_of(Site n) const;

 private:
  int d_ = 0, N_ = 0;
  std::vector<std::vector<cd>> q_;
};

/// Simulated time series of tracked Fourier modes plus per-component mass
/// and normal-sector sup series.
struct ModeTrace {
  std::vector<double> times;
  std::vector<std::pair<int, Site>> tracked;        // (h, n)
  std::vector<std::vector<cd>> series;              // [tracked][time]
  std::vector<std::vector<double>> mass;            // [h][time]
  std::vector<std::vector<double>> normal_sup;      // [h][time]
  SimConfig config;
  FieldState final_state;

  const std::vector<cd>* series_for(int h, Site n) const;
};

/// First-order quasi-periodic ansatz at t = 0: q_{h,i^(a)} = sqrt(xi_{ha}),
/// every other mode zero. With first_order_correction the normal modes are
/// seeded with the homological-flow image of the torus.
FieldState build_ansatz(const SimConfig& config);

/// Split-step integrator (Strang: exact linear half steps in Fourier,
/// exact pointwise nonlinear phase rotation, optional dealiasing).
class SplitStepIntegrator {
 public:
  explicit SplitStepIntegrator(const SimConfig& config);
  ~SplitStepIntegrator();
  SplitStepIntegrator(const SplitStepIntegrator&) = delete;
  SplitStepIntegrator& operator=(const SplitStepIntegrator&) = delete;

  /// One Strang step of size dt; throws BlowUp past config.blowup_sup.
  void step(FieldState& state, double dt) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Full integration with sampling; deterministic for a given config.
ModeTrace run(const SimConfig& config);

struct FreqFit {
  double omega = 0.0;     // least-squares slope of the unwrapped phase
  double residual = 0.0;  // rms phase residual of the fit
};

/// Linear fit of the unwrapped phase of one tracked series. Throws
/// DegenerateFit when the amplitude collapses or a phase increment is too
/// close to +-pi to unwrap reliably.
FreqFit fit_frequency(const std::vector<double>& times,
                      const std::vector<cd>& series);

/// First-order frequency prediction  |i_a|^2 + (xi_{ha} + 2 sum_{a' != a}
/// xi_{ha'}) / (4 pi^2).
double predicted_frequency(const SimConfig& config, int h, int a);

struct QPVerdict {
  struct ModeCheck {
    int h = 0;
    Site n;
    double amp_drift = 0.0;
    double omega_fitted = 0.0;
    double omega_predicted = 0.0;
    double freq_error = 0.0;
    double fit_residual = 0.0;
  };
  std::vector<ModeCheck> tangential;
  std::vector<double> normal_sup_max;  // per h
  double normal_bound = 0.0;
  std::vector<double> mass_drift;      // per h, relative
  bool amp_ok = false, normal_ok = false, freq_ok = false, mass_ok = false;
  bool pass = false;
  /// Linear phases evolve as e^{+i |n|^2 t}; fitted frequencies follow the
  /// same sign convention.
  std::string sign_convention = "+i|n|^2 t";
};

QPVerdict verify_quasiperiodic(const ModeTrace& trace, const SimConfig& config);

/// Defect of the first-order ansatz in the lattice ODE: sup over sampled t
/// of sum_{h,n} |qdot_{hn} - RHS_{hn}(q(t))|, evaluated exactly on the
/// sparse tangential support (cubic term and G term by convolution).
double residual_norm(const SimConfig& config, int t_samples = 33);

/// Pseudospectral right-hand side qdot = i lambda q + i theta * q evaluated
/// on the grid without dealiasing; oracle counterpart of apply() on the
/// cubic field.
FieldState spectral_rhs(const FieldState& state, const SimConfig& config);

/// Exact sparse right-hand side on finitely supported states (convolution
/// arithmetic, includes G).
ModeSeq sparse_rhs(const ModeSeq& state, const SimConfig& config);

}  // namespace rnls
