#include "rnls/birkhoff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace rnls {

double AffineFrequency::analytic(const std::vector<double>& xi_h) const {
  double v = double(constant);
  for (std::size_t a = 0; a < lin.size(); ++a) v += lin[a] * xi_h[a];
  return v / kFourPiSq;
}

double AffineFrequency::value(const std::vector<double>& xi_h,
                              double eps) const {
  return double(quartic) / std::pow(eps, 4) + analytic(xi_h);
}

std::array<double, 4> MelnikovBlock::analytic(
    const std::vector<double>& xi_h) const {
  if (dim == 1) return {diag0.analytic(xi_h), 0.0, 0.0, 0.0};
  const double A = std::sqrt(xi_h[ai] * xi_h[aj]) / (2.0 * kPi * kPi);
  const double lower = kind == ResonanceKind::First ? A : -A;
  return {diag0.analytic(xi_h), A, lower, diag1.analytic(xi_h)};
}

double FrequencyData::omega_value(int a, const std::vector<double>& xi_h,
                                  double eps) const {
  return omega.at(a).value(xi_h, eps);
}

double FrequencyData::Omega_value(Site n, const std::vector<double>& xi_h,
                                  double eps) const {
  return double(norm_sq(n)) / std::pow(eps, 4) + Omega0.analytic(xi_h);
}

MelnikovBlock FrequencyData::scalar_block(Site n) const {
  MelnikovBlock blk;
  blk.dim = 1;
  blk.n = n;
  blk.quartic = norm_sq(n);
  blk.diag0 = Omega0;
  blk.diag0.quartic = 0;
  return blk;
}

int tangential_count(const MonomialTerm& t, const TangentialSet& I) {
  int c = I.contains(t.target.n) ? 1 : 0;
  for (const auto& e : t.exps)
    if (I.contains(e.var.n)) c += e.pow;
  return c;
}

std::int64_t homological_denominator(const MonomialTerm& t) {
  std::int64_t delta = 0;
  for (const auto& e : t.exps)
    delta += std::int64_t(e.var.sign) * e.pow * norm_sq(e.var.n);
  delta -= std::int64_t(t.target.sign) * norm_sq(t.target.n);
  return delta;
}

PolyVectorField solve_homological(const PolyVectorField& P3,
                                  const TangentialSet& I) {
  PolyVectorField F(P3.d(), P3.R());
  for (const auto& t : P3.terms()) {
    if (t.degree() != 3) continue;
    if (tangential_count(t, I) < 2) continue;
    const std::int64_t delta = homological_denominator(t);
    if (delta == 0) continue;  // resonant, stays in the normal form
    MonomialTerm f = t;
    f.coeff = cd(0.0, -1.0) * t.coeff / double(delta);
    F.add_term(std::move(f));
  }
  F.normalize();
  return F;
}

PolyVectorField pushforward_order3(const PolyVectorField& X,
                                   const PolyVectorField& F,
                                   RemainderStats* stats) {
  PolyVectorField out = X;
  out += lie_bracket(F, X, /*max_degree=*/3);

  if (stats) {
    // Bound the degree-5 Lie terms that the truncation refuses to form:
    // pairs of a cubic F term with a cubic X term in [F, X], plus the
    // leading half-bracket [F, [F, X_lin]].
    std::size_t cubic_x = 0;
    double max_x = 0.0;
    for (const auto& t : X.terms())
      if (t.degree() == 3) {
        ++cubic_x;
        max_x = std::max(max_x, std::abs(t.coeff));
      }
    const double max_f = F.max_abs_coeff();
    stats->term_bound =
        2 * 3 * F.terms().size() * cubic_x + 3 * F.terms().size() * F.terms().size();
    stats->coeff_bound =
        9.0 * max_f * (max_x + max_f * X.max_abs_coeff());
  }
  return out;
}

namespace {

struct FamilyAccum {
  cd expected;
  std::size_t count = 0;
  double worst_rel_err = 0.0;

  void add(cd found) {
    ++count;
    worst_rel_err =
        std::max(worst_rel_err, std::abs(found - expected) / std::abs(expected));
  }
};

}  // namespace

NormalFormReport extract_normal_form(const PolyVectorField& Xt,
                                     const LatticeClassification& cls) {
  const TangentialSet& I = cls.I;
  NormalFormReport rep;
  const cd i_over_4pi2(0.0, 1.0 / kFourPiSq);
  const cd i_over_2pi2(0.0, 2.0 / kFourPiSq);

  FamilyAccum self{i_over_4pi2};
  FamilyAccum cross{i_over_2pi2};
  FamilyAccum action{i_over_2pi2};
  FamilyAccum l1c{i_over_2pi2};
  FamilyAccum l2c{i_over_2pi2};
  // resonant back-action of the normal sector on the tangential equations
  FamilyAccum normal_action{i_over_2pi2};
  FamilyAccum l1b{i_over_2pi2};
  FamilyAccum l2b{i_over_2pi2};

  for (const auto& t : Xt.terms()) {
    if (t.degree() != 3) continue;
    if (tangential_count(t, I) < 2) continue;

    bool mixed = false;
    for (const auto& e : t.exps) mixed = mixed || e.var.h != t.target.h;
    if (mixed) {
      rep.cross_component_clean = false;
      rep.residual_nonresonant =
          std::max(rep.residual_nonresonant, std::abs(t.coeff));
      ++rep.residual_count;
      continue;
    }

    const std::int16_t h = t.target.h;
    const std::int16_t sg = t.target.sign;
    const Site tn = t.target.n;
    // Conjugate-sector families mirror with coefficient sign * i * (...).
    const cd orient = sg > 0 ? cd(1.0, 0.0) : cd(-1.0, 0.0);

    auto has = [&](Site site, int rel_sign, int pow) {
      return t.exps.power_of({h, site, std::int16_t(rel_sign * sg)}) == pow;
    };

    bool matched = false;
    if (I.contains(tn)) {
      // self-action |q_i|^2 q_i d/dq_i
      if (t.exps.size() == 2 && has(tn, +1, 2) && has(tn, -1, 1)) {
        self.add(t.coeff / orient);
        matched = true;
      } else if (t.exps.size() == 3 && has(tn, +1, 1)) {
        // intensity action |w|^2 q_i d/dq_i: cross-action for tangential w,
        // normal back-action otherwise
        for (const auto& e : t.exps) {
          const Site w = e.var.n;
          if (w == tn) continue;
          if (has(w, +1, 1) && has(w, -1, 1)) {
            (I.contains(w) ? cross : normal_action).add(t.coeff / orient);
            matched = true;
            break;
          }
        }
      }
      if (!matched && t.exps.size() == 3) {
        // back-action of a resonant pair: z_n zbar_m q_i d/dq_j (first
        // type) or z_n z_m qbar_i d/dq_j (second type), with (i, j, m) the
        // triplet of n and j the target
        Site plus_norm[2], plus_tan{}, minus_site{};
        int minus_sign_tan = -2, np = 0;
        bool shape_ok = true;
        for (const auto& e : t.exps) {
          if (e.pow != 1) shape_ok = false;
          const bool tang = I.contains(e.var.n);
          if (e.var.sign == sg) {
            if (tang) plus_tan = e.var.n;
            else if (np < 2) plus_norm[np++] = e.var.n;
          } else {
            minus_site = e.var.n;
            minus_sign_tan = tang ? 1 : 0;
          }
        }
        if (shape_ok && np == 1 && minus_sign_tan == 0) {
          // first type: +n, -m normal, +i tangential
          const ResonantPair* rp = cls.pair_for(plus_norm[0]);
          if (rp && rp->kind == ResonanceKind::First && rp->m == minus_site &&
              rp->i == plus_tan && rp->j == tn) {
            l1b.add(t.coeff / orient);
            matched = true;
          }
        } else if (shape_ok && np == 2 && minus_sign_tan == 1) {
          // second type: +n, +m normal, -i tangential
          const ResonantPair* rp = cls.pair_for(plus_norm[0]);
          if (rp && rp->kind == ResonanceKind::Second &&
              rp->m == plus_norm[1] &&
              ((rp->i == minus_site && rp->j == tn) ||
               (rp->j == minus_site && rp->i == tn))) {
            l2b.add(t.coeff / orient);
            matched = true;
          }
        }
      }
    } else {
      const ResonantPair* rp = cls.pair_for(tn);
      if (t.exps.size() == 3 && has(tn, +1, 1)) {
        // tangential action |q_j|^2 z_n d/dz_n
        for (Site j : I.sites()) {
          if (has(j, +1, 1) && has(j, -1, 1)) {
            action.add(t.coeff / orient);
            matched = true;
            break;
          }
        }
      }
      if (!matched && rp && rp->kind == ResonanceKind::First) {
        // qbar_i q_j z_m d/dz_n with (i, j, m) the triplet of n
        if (has(rp->i, -1, 1) && has(rp->j, +1, 1) && has(rp->m, +1, 1)) {
          l1c.add(t.coeff / orient);
          matched = true;
        }
      }
      if (!matched && rp && rp->kind == ResonanceKind::Second) {
        // q_i q_j zbar_m d/dz_n
        Exponents want;
        want.mul({h, rp->i, sg}, 1);
        want.mul({h, rp->j, sg}, 1);
        want.mul({h, rp->m, std::int16_t(-sg)}, 1);
        if (want == t.exps) {
          l2c.add(t.coeff / orient);
          matched = true;
        }
      }
    }

    if (!matched) {
      rep.residual_nonresonant =
          std::max(rep.residual_nonresonant, std::abs(t.coeff));
      ++rep.residual_count;
    }
  }

  rep.families = {
      {"self_action", self.expected, self.count, self.worst_rel_err},
      {"cross_action", cross.expected, cross.count, cross.worst_rel_err},
      {"tangential_action", action.expected, action.count, action.worst_rel_err},
      {"first_type_coupling", l1c.expected, l1c.count, l1c.worst_rel_err},
      {"second_type_coupling", l2c.expected, l2c.count, l2c.worst_rel_err},
      {"normal_back_action", normal_action.expected, normal_action.count,
       normal_action.worst_rel_err},
      {"first_type_back_action", l1b.expected, l1b.count, l1b.worst_rel_err},
      {"second_type_back_action", l2b.expected, l2b.count, l2b.worst_rel_err},
  };
  rep.pass = rep.residual_nonresonant < rep.tolerance &&
             rep.cross_component_clean;
  for (const auto& f : rep.families)
    rep.pass = rep.pass && f.worst_rel_err < rep.tolerance;
  return rep;
}

NormalFormResult normal_form_pipeline(int d, int R, const TangentialSet& I) {
  auto cls = classify_all(I, R);  // throws AmbiguousResonance if not unique
  NormalFormResult res;
  const auto P0 = build_cubic_P0(d, R);
  const auto lin = build_linear_lambda(d, R);
  PolyVectorField X = lin;
  X += P0;
  res.F = solve_homological(P0, I);
  res.transformed = pushforward_order3(X, res.F, &res.report.remainder);
  auto rep = extract_normal_form(res.transformed, cls);
  rep.remainder = res.report.remainder;
  rep.f_terms = res.F.terms().size();
  std::int64_t mind = 0;
  for (const auto& t : res.F.terms()) {
    const std::int64_t d_abs = std::llabs(homological_denominator(t));
    mind = mind == 0 ? d_abs : std::min(mind, d_abs);
  }
  rep.min_abs_denominator = mind;
  res.report = rep;
  return res;
}

FrequencyData frequencies(const TangentialSet& I,
                          const LatticeClassification& cls, int d, int b) {
  assert(b == I.b());
  FrequencyData fd;
  fd.d = d;
  fd.b = b;
  fd.I = I;

  for (int a = 0; a < b; ++a) {
    AffineFrequency w;
    w.quartic = norm_sq(I.site(a));
    w.lin.assign(b, 2);  // sum_j xi_j / (2 pi^2)
    w.lin[a] += -1;      // - xi_i / (4 pi^2)
    fd.omega.push_back(std::move(w));
  }

  fd.Omega0.quartic = 0;
  fd.Omega0.lin.assign(b, 2);

  for (const auto& p : cls.l1) {
    MelnikovBlock blk;
    blk.dim = 2;
    blk.kind = ResonanceKind::First;
    blk.n = p.n;
    blk.m = p.m;
    blk.ai = I.index_of(p.i);
    blk.aj = I.index_of(p.j);
    blk.quartic = norm_sq(p.n) + norm_sq(p.i);  // = |m|^2 + |j|^2
    blk.diag0 = fd.Omega0;                      // Omega_n + omega_i
    for (int a = 0; a < b; ++a) blk.diag0.lin[a] += fd.omega[blk.ai].lin[a];
    blk.diag1 = fd.Omega0;                      // Omega_m + omega_j
    for (int a = 0; a < b; ++a) blk.diag1.lin[a] += fd.omega[blk.aj].lin[a];
    fd.blocks.push_back(std::move(blk));
  }
  for (const auto& p : cls.l2) {
    MelnikovBlock blk;
    blk.dim = 2;
    blk.kind = ResonanceKind::Second;
    blk.n = p.n;
    blk.m = p.m;
    blk.ai = I.index_of(p.i);
    blk.aj = I.index_of(p.j);
    blk.quartic = norm_sq(p.n) - norm_sq(p.i);  // = |j|^2 - |m|^2
    blk.diag0 = fd.Omega0;                      // Omega_n - omega_i
    for (int a = 0; a < b; ++a) blk.diag0.lin[a] -= fd.omega[blk.ai].lin[a];
    blk.diag1 = fd.Omega0;                      // -Omega_m + omega_j
    for (int a = 0; a < b; ++a)
      blk.diag1.lin[a] = -blk.diag1.lin[a] + fd.omega[blk.aj].lin[a];
    fd.blocks.push_back(std::move(blk));
  }
  return fd;
}

NondegeneracyResult verify_nondegeneracy(int b) {
  if (b < 1) throw InvalidConfig("b must be >= 1");
  NondegeneracyResult res;
  res.b = b;
  res.jacobian.assign(b, std::vector<double>(b, 2.0 / kFourPiSq));
  for (int a = 0; a < b; ++a) res.jacobian[a][a] = 1.0 / kFourPiSq;

  // Integer determinant of the scaled matrix (1 diagonal, 2 off-diagonal)
  // via fraction-free elimination; equals (-1)^(b-1)(2b-1).
  std::vector<std::vector<std::int64_t>> m(b, std::vector<std::int64_t>(b, 2));
  for (int a = 0; a < b; ++a) m[a][a] = 1;
  std::int64_t prev = 1;
  std::int64_t sign = 1;
  for (int k = 0; k < b - 1; ++k) {
    if (m[k][k] == 0) {
      int p = k + 1;
      while (p < b && m[p][k] == 0) ++p;
      if (p == b) {
        prev = 0;
        break;
      }
      std::swap(m[p], m[k]);
      sign = -sign;
    }
    for (int r = k + 1; r < b; ++r)
      for (int c2 = k + 1; c2 < b; ++c2)
        m[r][c2] = (m[r][c2] * m[k][k] - m[r][k] * m[k][c2]) / prev;
    prev = m[k][k];
  }
  res.det_scaled = prev == 0 ? 0 : sign * m[b - 1][b - 1];
  res.det = double(res.det_scaled) / std::pow(kFourPiSq, b);
  return res;
}

}  // namespace rnls
