#include "rnls/melnikov.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <thread>

namespace rnls {

bool ParameterBox::contains(const std::vector<std::vector<double>>& xi) const {
  if (int(xi.size()) != d) return false;
  for (int h = 0; h < d; ++h) {
    if (int(xi[h].size()) != b) return false;
    for (double v : xi[h])
      if (v < lower(h) || v > upper(h)) return false;
  }
  return true;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum JobType : std::uint8_t {
  kMel1,      // |<k,omega>|, k != 0
  kMel2S,     // |<k,omega> + s1 Omega_h|
  kMel2B,     // sigma_min(<k,omega> I + s1 B[pat,h])
  kMel13SS,   // |<k,omega> + s1 Omega_h + s2 Omega_h2|, k != 0
  kMel13SB,   // |det((<k,omega> + s1 Omega_h) I + s2 B[pat,h2])|, k != 0
  kMel13BB,   // |det(<k,omega> I + s1 B^T x I + s2 I x B')|, k != 0
  kNumJobTypes
};

const char* kCondName[kNumJobTypes] = {"Mel1",    "Mel2_scalar", "Mel2_block",
                                       "Mel13_ss", "Mel13_sb",   "Mel13_bb"};

struct Job {
  std::uint8_t type;
  std::int8_t s1, s2;
  std::uint8_t h, h2;
  std::uint8_t pat, pat2;
  /// Index of the k vector (if any) at which this family's divisor has an
  /// affine factor identically zero in xi: a kernel direction of the
  /// normal form (the retained coupling), not a small divisor. Scalar
  /// families are skipped there; block determinants drop the kernel
  /// factor and check the reduced determinant.
  std::int32_t kernel_k = -1;
};

// A block pattern: all resonant blocks sharing (kind, ai, aj) have the
// same analytic part; they differ only in the integer eps^-4 coefficient.
struct Pattern {
  ResonanceKind kind;
  int ai, aj;
  std::vector<std::int64_t> mus;  // distinct diagonal eps^-4 coefficients
  AffineFrequency diag0, diag1;   // analytic diagonal entries
};

struct Plan {
  int d = 0, b = 0, kmax = 0, R = 0;
  double tau = 0.0, eps = 0.0;
  FrequencyData freq;

  // k enumeration, flattened db entries per vector
  std::vector<std::int16_t> kflat;
  std::vector<std::int32_t> r_int;
  std::vector<std::int16_t> kl1;
  std::vector<double> powtau;  // max(|k|,1)^tau
  std::size_t nk = 0;
  std::size_t k_zero_index = std::size_t(-1);

  std::vector<char> generic_nu;  // realizable |n|^2 on Z^2_2 within R
  std::vector<Pattern> patterns;

  std::int64_t rmin = 0, rmax = 0;
  std::vector<std::vector<Job>> jobs;  // per bucket r - rmin
  std::size_t kernel_jobs = 0;         // jobs carrying a kernel direction

  std::size_t bucket(std::int64_t r) const { return std::size_t(r - rmin); }

  std::int32_t k_index(const std::vector<int>& k) const {
    const int dim = d * b;
    for (std::size_t i = 0; i < nk; ++i) {
      bool same = true;
      for (int t = 0; t < dim && same; ++t) same = kflat[i * dim + t] == k[t];
      if (same) return std::int32_t(i);
    }
    return -1;
  }
};

void enumerate_k(int dim, int kmax, std::vector<std::int16_t>& out) {
  std::vector<std::int16_t> cur(dim, 0);
  // depth-first over coordinates, bounded l1 norm
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == dim) {
      out.insert(out.end(), cur.begin(), cur.end());
      return;
    }
    for (int v = -left; v <= left; ++v) {
      cur[pos] = std::int16_t(v);
      rec(pos + 1, left - std::abs(v));
    }
  };
  rec(0, kmax);
}

bool feasible_pair(const std::vector<char>& setA,
                   const std::vector<char>& setB, int s1, int s2,
                   std::int64_t r) {
  // exists nu in A, nu' in B with r + s1 nu + s2 nu' = 0
  for (std::int64_t nu = 0; nu < std::int64_t(setA.size()); ++nu) {
    if (!setA[nu]) continue;
    const std::int64_t want = -(r + s1 * nu) * s2;  // s2^2 = 1
    if (want >= 0 && want < std::int64_t(setB.size()) && setB[want]) return true;
  }
  return false;
}

bool feasible_mu(const std::vector<std::int64_t>& mus,
                 const std::vector<char>& gen, int s_mu, int s_nu,
                 std::int64_t r) {
  for (std::int64_t mu : mus) {
    const std::int64_t want = -(r + s_mu * mu) * s_nu;
    if (want >= 0 && want < std::int64_t(gen.size()) && gen[want]) return true;
  }
  return false;
}

bool feasible_mu_mu(const std::vector<std::int64_t>& a,
                    const std::vector<std::int64_t>& bset, int s1, int s2,
                    std::int64_t r) {
  for (std::int64_t mu : a) {
    const std::int64_t want = -(r + s1 * mu) * s2;
    if (std::binary_search(bset.begin(), bset.end(), want)) return true;
  }
  return false;
}

// Solves <k, omega0(xi)> == -phi identically in xi, where phi holds the
// integer xi-coefficients (units of 1/4pi^2) of an affine divisor part.
// The per-component Jacobian (1 on the diagonal, 2 off) is invertible, so
// the real solution is unique; returns false unless it is integral. Only
// affine combinations can vanish identically in xi, which is how kernel
// directions of the normal form are recognized exactly.
bool solve_kernel_k(const std::vector<std::int64_t>& phi, int d, int b,
                    std::vector<int>& k_out) {
  k_out.assign(std::size_t(d) * b, 0);
  for (int h = 0; h < d; ++h) {
    std::int64_t S = 0;
    for (int a = 0; a < b; ++a) S += phi[std::size_t(h) * b + a];
    if ((2 * S) % (2 * b - 1) != 0) return false;
    const std::int64_t shift = 2 * S / (2 * b - 1);
    for (int a = 0; a < b; ++a)
      k_out[std::size_t(h) * b + a] =
          int(phi[std::size_t(h) * b + a] - shift);
  }
  return true;
}

Plan build_plan(const FrequencyData& freq, double tau, double eps, int kmax,
                int R) {
  if (tau <= 0) throw InvalidConfig("tau must be positive");
  if (eps <= 0 || eps >= 1) throw InvalidConfig("eps must be in (0,1)");
  Plan plan;
  plan.d = freq.d;
  plan.b = freq.b;
  plan.kmax = kmax;
  plan.R = R;
  plan.tau = tau;
  plan.eps = eps;
  plan.freq = freq;

  const int dim = freq.d * freq.b;
  enumerate_k(dim, kmax, plan.kflat);
  plan.nk = plan.kflat.size() / dim;

  std::vector<std::int64_t> lam(freq.b);
  for (int a = 0; a < freq.b; ++a) lam[a] = norm_sq(freq.I.site(a));
  const std::int64_t lam_max = *std::max_element(lam.begin(), lam.end());

  plan.r_int.resize(plan.nk);
  plan.kl1.resize(plan.nk);
  plan.powtau.resize(plan.nk);
  for (std::size_t i = 0; i < plan.nk; ++i) {
    const std::int16_t* k = &plan.kflat[i * dim];
    std::int64_t r = 0;
    int l1 = 0;
    for (int h = 0; h < freq.d; ++h)
      for (int a = 0; a < freq.b; ++a) {
        r += std::int64_t(k[h * freq.b + a]) * lam[a];
        l1 += std::abs(k[h * freq.b + a]);
      }
    plan.r_int[i] = std::int32_t(r);
    plan.kl1[i] = std::int16_t(l1);
    plan.powtau[i] = std::pow(double(std::max(l1, 1)), tau);
    if (l1 == 0) plan.k_zero_index = i;
  }

  // scale separation: the eps^-4 part must dominate every analytic part
  const double max_affine =
      (1.0 + 2.0 * freq.b) * freq.d / kFourPiSq;  // |omega0|, |Omega0| bound
  if (std::pow(eps, -4.0) <= kmax * max_affine + 2 * double(R) * R)
    throw InvalidConfig("scale separation broken: eps^-4 too small");

  // realizable generic |n|^2 (Z^2_2 within the ball)
  std::set<Site> excluded(freq.I.sites().begin(), freq.I.sites().end());
  for (const auto& blk : freq.blocks) {
    excluded.insert(blk.n);
    excluded.insert(blk.m);
  }
  plan.generic_nu.assign(std::size_t(R) * R + 1, 0);
  for (const Site s : sites_in_ball(R))
    if (!excluded.count(s)) plan.generic_nu[std::size_t(norm_sq(s))] = 1;

  // block patterns
  for (const auto& blk : freq.blocks) {
    auto it = std::find_if(plan.patterns.begin(), plan.patterns.end(),
                           [&](const Pattern& p) {
                             return p.kind == blk.kind && p.ai == blk.ai &&
                                    p.aj == blk.aj;
                           });
    if (it == plan.patterns.end()) {
      plan.patterns.push_back(
          {blk.kind, blk.ai, blk.aj, {blk.quartic}, blk.diag0, blk.diag1});
    } else {
      it->mus.push_back(blk.quartic);
    }
  }
  for (auto& p : plan.patterns) {
    std::sort(p.mus.begin(), p.mus.end());
    p.mus.erase(std::unique(p.mus.begin(), p.mus.end()), p.mus.end());
  }

  // job lists per r bucket
  plan.rmin = -kmax * lam_max;
  plan.rmax = kmax * lam_max;
  plan.jobs.assign(std::size_t(plan.rmax - plan.rmin + 1), {});
  const int d = freq.d;
  const int P = int(plan.patterns.size());
  for (std::int64_t r = plan.rmin; r <= plan.rmax; ++r) {
    auto& js = plan.jobs[plan.bucket(r)];
    if (r == 0) js.push_back({kMel1, 0, 0, 0, 0, 0, 0});
    for (int s1 : {+1, -1}) {
      // Mel2 scalar: nu = -s1 r realizable
      const std::int64_t want = -s1 * r;
      if (want >= 0 && want < std::int64_t(plan.generic_nu.size()) &&
          plan.generic_nu[want])
        for (int h = 0; h < d; ++h)
          js.push_back({kMel2S, std::int8_t(s1), 0, std::uint8_t(h), 0, 0, 0});
      // Mel2 block: mu = -s1 r present in pattern
      for (int p = 0; p < P; ++p)
        if (std::binary_search(plan.patterns[p].mus.begin(),
                               plan.patterns[p].mus.end(), -s1 * r))
          for (int h = 0; h < d; ++h)
            js.push_back({kMel2B, std::int8_t(s1), 0, std::uint8_t(h), 0,
                          std::uint8_t(p), 0});
      for (int s2 : {+1, -1}) {
        // Mel13 scalar x scalar (unordered h pairs)
        if (feasible_pair(plan.generic_nu, plan.generic_nu, s1, s2, r))
          for (int h = 0; h < d; ++h)
            for (int h2 = h; h2 < d; ++h2)
              js.push_back({kMel13SS, std::int8_t(s1), std::int8_t(s2),
                            std::uint8_t(h), std::uint8_t(h2), 0, 0});
        // Mel13 scalar x block (covers both orders)
        for (int p = 0; p < P; ++p)
          if (feasible_mu(plan.patterns[p].mus, plan.generic_nu, s2, s1, r))
            for (int h = 0; h < d; ++h)
              for (int h2 = 0; h2 < d; ++h2)
                js.push_back({kMel13SB, std::int8_t(s1), std::int8_t(s2),
                              std::uint8_t(h), std::uint8_t(h2),
                              std::uint8_t(p), 0});
        // Mel13 block x block (unordered block instances)
        for (int p = 0; p < P; ++p)
          for (int p2 = 0; p2 < P; ++p2)
            if (feasible_mu_mu(plan.patterns[p].mus, plan.patterns[p2].mus, s1,
                               s2, r))
              for (int h = 0; h < d; ++h)
                for (int h2 = 0; h2 < d; ++h2) {
                  if (p2 * d + h2 < p * d + h) continue;  // unordered
                  js.push_back({kMel13BB, std::int8_t(s1), std::int8_t(s2),
                                std::uint8_t(h), std::uint8_t(h2),
                                std::uint8_t(p), std::uint8_t(p2)});
                }
      }
    }
  }

  // Mark kernel directions: families whose divisor has an affine factor
  // identically zero in xi (the trace factor of a block paired with itself
  // at equal signs, or a scalar combination). These are the couplings the
  // normal form retains; the inequalities apply off that kernel.
  const auto add_lin = [&](std::vector<std::int64_t>& phi, int h, int sgn,
                           const AffineFrequency& f) {
    for (int a = 0; a < freq.b; ++a)
      phi[std::size_t(h) * freq.b + a] += sgn * f.lin[a];
  };
  for (std::int64_t r = plan.rmin; r <= plan.rmax; ++r) {
    for (Job& j : plan.jobs[plan.bucket(r)]) {
      std::vector<std::int64_t> phi(std::size_t(d) * freq.b, 0);
      if (j.type == kMel2S) {
        add_lin(phi, j.h, j.s1, freq.Omega0);
      } else if (j.type == kMel13SS) {
        add_lin(phi, j.h, j.s1, freq.Omega0);
        add_lin(phi, j.h2, j.s2, freq.Omega0);
      } else if (j.type == kMel13BB && j.pat == j.pat2 && j.h == j.h2 &&
                 j.s1 == j.s2) {
        // trace factor of the same-instance pairing; every block of a
        // pattern shares the analytic part, so the factor kills the family
        add_lin(phi, j.h, j.s1, plan.patterns[j.pat].diag0);
        add_lin(phi, j.h, j.s1, plan.patterns[j.pat].diag1);
      } else {
        continue;
      }
      std::vector<int> kstar;
      if (!solve_kernel_k(phi, d, freq.b, kstar)) continue;
      int l1 = 0;
      for (int v : kstar) l1 += std::abs(v);
      if (l1 == 0 || l1 > kmax) continue;
      const std::int32_t idx = plan.k_index(kstar);
      if (idx < 0) continue;
      if (plan.r_int[idx] != r) continue;  // never evaluated in this bucket
      j.kernel_k = idx;
      ++plan.kernel_jobs;
    }
  }
  return plan;
}

// Per-sample precomputed analytic data.
struct SampleCtx {
  std::vector<double> omega0;      // db entries
  std::vector<double> Omega0;      // d entries
  std::vector<std::array<double, 4>> B;    // per (pat * d + h)
  std::vector<double> Btr, Bdet;           // per (pat * d + h)
  // char-poly coefficients (a^4 + c3 a^3 + c2 a^2 + c1 a + c0) per
  // (instance pair, sign combo)
  std::vector<std::array<double, 4>> bb_poly;
  int d = 0, b = 0, P = 0;

  int inst(int pat, int h) const { return pat * d + h; }
  int bb_index(int i1, int i2, int s1, int s2) const {
    const int sc = (s1 > 0 ? 0 : 1) * 2 + (s2 > 0 ? 0 : 1);
    return (i1 * P * d + i2) * 4 + sc;
  }
};

std::array<double, 4> charpoly4(const double K[4][4]) {
  // det(aI + K) = a^4 + e1 a^3 + e2 a^2 + e3 a + e4, with e_j the sums of
  // principal j x j minors of K.
  double e1 = 0, e2 = 0, e3 = 0, e4 = 0;
  for (int i = 0; i < 4; ++i) e1 += K[i][i];
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      e2 += K[i][i] * K[j][j] - K[i][j] * K[j][i];
  int idx[4] = {0, 1, 2, 3};
  for (int drop = 0; drop < 4; ++drop) {
    int r[3], c = 0;
    for (int i = 0; i < 4; ++i)
      if (i != idx[drop]) r[c++] = i;
    e3 += K[r[0]][r[0]] * (K[r[1]][r[1]] * K[r[2]][r[2]] -
                           K[r[1]][r[2]] * K[r[2]][r[1]]) -
          K[r[0]][r[1]] * (K[r[1]][r[0]] * K[r[2]][r[2]] -
                           K[r[1]][r[2]] * K[r[2]][r[0]]) +
          K[r[0]][r[2]] * (K[r[1]][r[0]] * K[r[2]][r[1]] -
                           K[r[1]][r[1]] * K[r[2]][r[0]]);
  }
  // det via expansion on the first row
  double det = 0;
  for (int j = 0; j < 4; ++j) {
    double m[3][3];
    int cc = 0;
    for (int col = 0; col < 4; ++col) {
      if (col == j) continue;
      for (int row = 1; row < 4; ++row) m[row - 1][cc] = K[row][col];
      ++cc;
    }
    const double minor = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    det += (j % 2 == 0 ? 1.0 : -1.0) * K[0][j] * minor;
  }
  e4 = det;
  return {e4, e3, e2, e1};  // c0, c1, c2, c3
}

SampleCtx make_ctx(const Plan& plan,
                   const std::vector<std::vector<double>>& xi) {
  SampleCtx ctx;
  ctx.d = plan.d;
  ctx.b = plan.b;
  ctx.P = int(plan.patterns.size());
  ctx.omega0.resize(std::size_t(plan.d) * plan.b);
  ctx.Omega0.resize(plan.d);
  for (int h = 0; h < plan.d; ++h) {
    ctx.Omega0[h] = plan.freq.Omega0.analytic(xi[h]);
    for (int a = 0; a < plan.b; ++a)
      ctx.omega0[std::size_t(h) * plan.b + a] =
          plan.freq.omega[a].analytic(xi[h]);
  }
  const int ninst = ctx.P * plan.d;
  ctx.B.resize(ninst);
  ctx.Btr.resize(ninst);
  ctx.Bdet.resize(ninst);
  for (int p = 0; p < ctx.P; ++p) {
    const auto& pat = plan.patterns[p];
    for (int h = 0; h < plan.d; ++h) {
      const double A = std::sqrt(xi[h][pat.ai] * xi[h][pat.aj]) /
                       (2.0 * kPi * kPi);
      const double lower = pat.kind == ResonanceKind::First ? A : -A;
      std::array<double, 4> B{pat.diag0.analytic(xi[h]), A, lower,
                              pat.diag1.analytic(xi[h])};
      ctx.B[ctx.inst(p, h)] = B;
      ctx.Btr[ctx.inst(p, h)] = B[0] + B[3];
      ctx.Bdet[ctx.inst(p, h)] = B[0] * B[3] - B[1] * B[2];
    }
  }
  // 4x4 char polys for block x block combinations
  ctx.bb_poly.assign(std::size_t(ninst) * ninst * 4, {0, 0, 0, 0});
  for (int i1 = 0; i1 < ninst; ++i1) {
    for (int i2 = 0; i2 < ninst; ++i2) {
      const auto& Bm = ctx.B[i1];
      const auto& Bp = ctx.B[i2];
      for (int s1 : {+1, -1})
        for (int s2 : {+1, -1}) {
          double K[4][4] = {};
          // s1 * B^T x I2 + s2 * I2 x B'
          for (int a = 0; a < 2; ++a)
            for (int bcol = 0; bcol < 2; ++bcol)
              for (int c = 0; c < 2; ++c)
                K[a * 2 + c][bcol * 2 + c] += s1 * Bm[bcol * 2 + a];
          for (int a = 0; a < 2; ++a)
            for (int bcol = 0; bcol < 2; ++bcol)
              for (int c = 0; c < 2; ++c)
                K[c * 2 + a][c * 2 + bcol] += s2 * Bp[a * 2 + bcol];
          ctx.bb_poly[ctx.bb_index(i1, i2, s1, s2)] = charpoly4(K);
        }
    }
  }
  return ctx;
}

double sigma_min_2x2(double a11, double a12, double a21, double a22) {
  const double det = a11 * a22 - a12 * a21;
  const double fr2 = a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22;
  const double disc = std::max(fr2 * fr2 - 4.0 * det * det, 0.0);
  const double smax2 = 0.5 * (fr2 + std::sqrt(disc));
  if (smax2 <= 0.0) return 0.0;
  return std::abs(det) / std::sqrt(smax2);
}

// Evaluates one job at the k index ki. Returns the analytic divisor on the
// per-eigendirection scale: determinants of phi x phi' Kronecker blocks
// are products of phi*phi' eigen-divisors, so |det|^(1/(phi phi')) is
// compared against gamma/|k|^tau (the literal determinant is bounded by
// the corresponding power). Returns a negative value when the whole
// family is a kernel direction.
inline double eval_job(const Job& j, const SampleCtx& ctx, double a,
                       std::int32_t ki) {
  if (ki == j.kernel_k) {
    if (j.type != kMel13BB) return -1.0;
    // drop the two identically-zero trace factors; the remaining
    // eigen-directions contribute (a + 2 s mu_1)(a + 2 s mu_2)
    const int i = ctx.inst(j.pat, j.h);
    return std::sqrt(
        std::abs(a * a + 2.0 * j.s1 * ctx.Btr[i] * a + 4.0 * ctx.Bdet[i]));
  }
  switch (j.type) {
    case kMel1:
      return std::abs(a);
    case kMel2S:
      return std::abs(a + j.s1 * ctx.Omega0[j.h]);
    case kMel2B: {
      const auto& B = ctx.B[ctx.inst(j.pat, j.h)];
      return sigma_min_2x2(a + j.s1 * B[0], j.s1 * B[1], j.s1 * B[2],
                           a + j.s1 * B[3]);
    }
    case kMel13SS:
      return std::abs(a + j.s1 * ctx.Omega0[j.h] + j.s2 * ctx.Omega0[j.h2]);
    case kMel13SB: {
      const double al = a + j.s1 * ctx.Omega0[j.h];
      const int i = ctx.inst(j.pat, j.h2);
      return std::sqrt(
          std::abs(al * al + j.s2 * ctx.Btr[i] * al + ctx.Bdet[i]));
    }
    case kMel13BB: {
      const auto& c = ctx.bb_poly[ctx.bb_index(ctx.inst(j.pat, j.h),
                                               ctx.inst(j.pat2, j.h2), j.s1,
                                               j.s2)];
      const double det =
          std::abs((((a + c[3]) * a + c[2]) * a + c[1]) * a + c[0]);
      return std::sqrt(std::sqrt(det));
    }
    default:
      return kInf;
  }
}

// Minimum gamma-free margin over all conditions for one sample.
double sample_margin(const Plan& plan, const SampleCtx& ctx) {
  double margin = kInf;
  const int dim = plan.d * plan.b;
  for (std::size_t i = 0; i < plan.nk; ++i) {
    const bool kzero = (i == plan.k_zero_index);
    const auto& js = plan.jobs[plan.bucket(plan.r_int[i])];
    if (js.empty()) continue;
    const std::int16_t* k = &plan.kflat[i * dim];
    double a = 0.0;
    for (int t = 0; t < dim; ++t) a += k[t] * ctx.omega0[t];
    const double pw = plan.powtau[i];
    for (const Job& j : js) {
      if (kzero && j.type != kMel2S && j.type != kMel2B) continue;
      const double v = eval_job(j, ctx, a, std::int32_t(i));
      if (v < 0) continue;  // kernel direction
      margin = std::min(margin, v * pw);
    }
  }
  // gap condition (Mel14)
  for (int h = 0; h < plan.d; ++h)
    for (int h2 = h + 1; h2 < plan.d; ++h2)
      margin = std::min(margin, std::abs(ctx.Omega0[h] - ctx.Omega0[h2]));
  return margin;
}

}  // namespace

MelnikovReport check_conditions(const std::vector<std::vector<double>>& xi,
                                double eps, double gamma, double tau, int kmax,
                                int R, const FrequencyData& freq) {
  if (gamma <= 0) throw InvalidConfig("gamma must be positive");
  const Plan plan = build_plan(freq, tau, eps, kmax, R);
  const SampleCtx ctx = make_ctx(plan, xi);

  MelnikovReport rep;
  rep.gamma = gamma;
  rep.tau = tau;
  rep.eps = eps;
  rep.kmax = kmax;
  rep.radius = R;
  rep.xi = xi;

  std::vector<ConditionStats> stats(kNumJobTypes);
  for (int t = 0; t < kNumJobTypes; ++t) {
    stats[t].name = kCondName[t];
    stats[t].worst_margin = kInf;
  }

  const int dim = plan.d * plan.b;
  double min_margin = kInf;
  // Counting unit: (k, divisor family). A family covers every site with
  // the same analytic divisor; families with nonzero integer eps^-4 part
  // never enter a bucket's job list and count as auto-passed.
  for (std::size_t i = 0; i < plan.nk; ++i) {
    const bool kzero = (i == plan.k_zero_index);
    const auto& js = plan.jobs[plan.bucket(plan.r_int[i])];
    const std::int16_t* k = &plan.kflat[i * dim];
    double a = 0.0;
    for (int t = 0; t < dim; ++t) a += k[t] * ctx.omega0[t];
    const double pw = plan.powtau[i];

    for (const Job& j : js) {
      if (kzero && j.type != kMel2S && j.type != kMel2B) continue;
      const double v = eval_job(j, ctx, a, std::int32_t(i));
      auto& st = stats[j.type];
      if (v < 0) {
        ++st.kernel;
        continue;
      }
      if (std::int32_t(i) == j.kernel_k) ++st.kernel;
      const double ratio = v * pw;
      ++st.numeric;
      st.worst_margin = std::min(st.worst_margin, ratio / gamma);
      min_margin = std::min(min_margin, ratio);
      if (ratio < gamma) {
        ++st.failed;
        if (rep.violations.size() < 200) {
          MelViolation viol;
          viol.condition = st.name;
          viol.k.assign(k, k + dim);
          viol.h = j.h;
          viol.h2 = j.h2;
          // scalar families cover every site with the implied |n|^2
          if (j.type == kMel2S)
            viol.block = "generic sites with |n|^2 = " +
                         std::to_string(-j.s1 * plan.r_int[i]);
          else if (j.type == kMel13SS)
            viol.block = "generic site pairs with s1|n|^2 + s2|n'|^2 = " +
                         std::to_string(-plan.r_int[i]);
          else if (j.type == kMel2B || j.type == kMel13SB ||
                   j.type == kMel13BB)
            viol.block = "pattern " + std::to_string(j.pat) +
                         (j.type == kMel13BB
                              ? " x pattern " + std::to_string(j.pat2)
                              : "");
          viol.value = v;
          viol.threshold = gamma / pw;
          rep.violations.push_back(std::move(viol));
        }
      }
    }
    stats[kMel1].checked += kzero ? 0 : 1;
    if (!kzero) {
      stats[kMel2S].checked += 2 * plan.d;
      stats[kMel2B].checked += 2 * plan.d * plan.patterns.size();
      stats[kMel13SS].checked += 4 * (plan.d * (plan.d + 1)) / 2;
      stats[kMel13SB].checked +=
          4 * plan.d * plan.d * plan.patterns.size();
      const int ninst = int(plan.patterns.size()) * plan.d;
      stats[kMel13BB].checked += 4 * (std::size_t(ninst) * (ninst + 1)) / 2;
    } else {
      stats[kMel2S].checked += 2 * plan.d;
      stats[kMel2B].checked += 2 * plan.d * plan.patterns.size();
    }
  }
  for (auto& st : stats) {
    st.auto_passed = st.checked - st.numeric - st.kernel;
    if (st.worst_margin == kInf) st.worst_margin = -1.0;  // nothing numeric
  }

  // gap condition
  rep.mel14_bound = plan.b / kFourPiSq;
  rep.mel14_margin = kInf;
  for (int h = 0; h < plan.d; ++h)
    for (int h2 = h + 1; h2 < plan.d; ++h2)
      rep.mel14_margin =
          std::min(rep.mel14_margin, std::abs(ctx.Omega0[h] - ctx.Omega0[h2]));
  if (plan.d == 1) rep.mel14_margin = kInf;

  ConditionStats mel14;
  mel14.name = "Mel14";
  mel14.checked = plan.d > 1 ? std::size_t(plan.d) * (plan.d - 1) / 2 : 0;
  mel14.numeric = mel14.checked;
  mel14.worst_margin = plan.d > 1 ? rep.mel14_margin / gamma : -1.0;
  if (plan.d > 1 && rep.mel14_margin < gamma) ++mel14.failed;

  rep.conditions = std::move(stats);
  rep.conditions.push_back(mel14);

  rep.min_margin =
      std::min(min_margin, plan.d > 1 ? rep.mel14_margin : kInf);
  rep.pass = true;
  for (const auto& st : rep.conditions) rep.pass = rep.pass && st.failed == 0;
  return rep;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::vector<std::vector<double>> sample_xi(const ParameterBox& box,
                                           std::uint64_t seed,
                                           std::uint64_t index) {
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(index + 1)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> xi(box.d, std::vector<double>(box.b));
  for (int h = 0; h < box.d; ++h)
    for (int a = 0; a < box.b; ++a)
      xi[h][a] = box.lower(h) + 0.5 * u(rng);
  return xi;
}

void wilson(double p, double n, double& lo, double& hi) {
  const double z = 1.959963984540054;
  const double z2 = z * z;
  const double den = 1.0 + z2 / n;
  const double center = (p + z2 / (2 * n)) / den;
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / den;
  lo = std::min(p, std::max(0.0, center - half));
  hi = std::max(p, std::min(1.0, center + half));
}

}  // namespace

ScanResult scan_measure(const ParameterBox& box,
                        const std::vector<double>& gamma_list, double tau,
                        double eps, int kmax, int R, std::size_t samples,
                        std::uint64_t seed, const FrequencyData& freq,
                        int threads) {
  for (double g : gamma_list)
    if (g <= 0) throw InvalidConfig("gamma must be positive");
  if (samples < 1) throw InvalidConfig("samples must be >= 1");
  const Plan plan = build_plan(freq, tau, eps, kmax, R);

  std::vector<double> margins(samples);
  const int nthreads =
      std::max(1, std::min<int>(threads, int(std::thread::hardware_concurrency())));
  auto worker = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto xi = sample_xi(box, seed, i);
      const SampleCtx ctx = make_ctx(plan, xi);
      margins[i] = sample_margin(plan, ctx);
    }
  };
  if (nthreads == 1) {
    worker(0, samples);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (samples + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      const std::size_t lo = std::min(samples, std::size_t(t) * chunk);
      const std::size_t hi = std::min(samples, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  ScanResult res;
  res.samples = samples;
  res.seed = seed;
  for (double g : gamma_list) {
    ScanRow row;
    row.gamma = g;
    for (double m : margins)
      if (m < g) ++row.excluded;
    row.fraction = double(row.excluded) / double(samples);
    wilson(row.fraction, double(samples), row.ci_low, row.ci_high);
    res.rows.push_back(row);
  }

  // log-log slope; zero counts enter with a continuity correction
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int npts = 0;
  bool corrected = false;
  for (const auto& row : res.rows) {
    double frac = row.fraction;
    if (row.excluded == 0) {
      frac = 0.5 / double(samples);
      corrected = true;
    }
    const double x = std::log10(row.gamma), y = std::log10(frac);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++npts;
  }
  if (npts >= 2 && sxx * npts - sx * sx > 0) {
    res.fitted_slope = (npts * sxy - sx * sy) / (npts * sxx - sx * sx);
    res.fitted_intercept = (sy - res.fitted_slope * sx) / npts;
  }
  res.note = corrected
                 ? "zero-count rows entered the fit with a 0.5/n correction"
                 : "";
  return res;
}

bool check_nondegeneracy(const FrequencyData& freq, double* det) {
  const auto block = verify_nondegeneracy(freq.b);
  const double full = std::pow(block.det, freq.d);
  if (det) *det = full;
  return block.det_scaled != 0;
}

}  // namespace rnls
