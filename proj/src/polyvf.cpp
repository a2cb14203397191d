#include "rnls/polyvf.hpp"

#include <algorithm>
#include <cassert>
#include <unordered_map>

namespace rnls {

int Exponents::degree() const {
  int s = 0;
  for (int k = 0; k < n_; ++k) s += e_[k].pow;
  return s;
}

int Exponents::power_of(const ModeVar& v) const {
  for (int k = 0; k < n_; ++k)
    if (e_[k].var == v) return e_[k].pow;
  return 0;
}

void Exponents::mul(const ModeVar& v, int pow) {
  if (pow == 0) return;
  int k = 0;
  while (k < n_ && e_[k].var < v) ++k;
  if (k < n_ && e_[k].var == v) {
    e_[k].pow += pow;
    return;
  }
  if (n_ >= kCap) throw Error("monomial exponent capacity exceeded");
  for (int j = n_; j > k; --j) e_[j] = e_[j - 1];
  e_[k] = {v, pow};
  ++n_;
}

void Exponents::div_once(const ModeVar& v) {
  for (int k = 0; k < n_; ++k) {
    if (e_[k].var == v) {
      if (--e_[k].pow == 0) {
        for (int j = k; j + 1 < n_; ++j) e_[j] = e_[j + 1];
        e_[--n_] = {};
      }
      return;
    }
  }
  throw Error("div_once: variable not present");
}

void PolyVectorField::normalize() {
  std::stable_sort(terms_.begin(), terms_.end(),
                   [](const MonomialTerm& a, const MonomialTerm& b) {
                     return key_of(a) < key_of(b);
                   });
  std::vector<MonomialTerm> merged;
  merged.reserve(terms_.size());
  for (auto& t : terms_) {
    if (!merged.empty() && key_of(merged.back()) == key_of(t))
      merged.back().coeff += t.coeff;
    else
      merged.push_back(std::move(t));
  }
  terms_.clear();
  for (auto& t : merged) {
    if (std::abs(t.coeff) < kDropTol)
      ++dropped_;
    else
      terms_.push_back(std::move(t));
  }
}

double PolyVectorField::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& t : terms_) m = std::max(m, std::abs(t.coeff));
  return m;
}

cd PolyVectorField::coeff_of(const TermKey& k) const {
  auto it = std::lower_bound(
      terms_.begin(), terms_.end(), k,
      [](const MonomialTerm& t, const TermKey& kk) { return key_of(t) < kk; });
  if (it != terms_.end() && key_of(*it) == k) return it->coeff;
  return cd(0.0, 0.0);
}

PolyVectorField& PolyVectorField::operator+=(const PolyVectorField& o) {
  assert(d_ == o.d_);
  R_ = std::max(R_, o.R_);
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  normalize();
  return *this;
}

PolyVectorField PolyVectorField::scaled(cd factor) const {
  PolyVectorField out = *this;
  for (auto& t : out.terms_) t.coeff *= factor;
  out.normalize();
  return out;
}

PolyVectorField build_cubic_P0(int d, int R) {
  if (R < 1) throw InvalidConfig("build_cubic_P0 requires R >= 1");
  PolyVectorField X(d, R);
  const auto ball = sites_in_ball(R);
  const std::int64_t r2 = std::int64_t(R) * R;
  const double c0 = 1.0 / kFourPiSq;
  X.reserve(std::size_t(d) * ball.size() * ball.size() * (ball.size() + 1));
  for (int h = 0; h < d; ++h) {
    for (std::size_t a = 0; a < ball.size(); ++a) {
      for (std::size_t b = a; b < ball.size(); ++b) {
        const Site i = ball[a], j = ball[b];
        const double mult = (a == b) ? 1.0 : 2.0;  // ordered (i,j) merge
        for (const Site m : ball) {
          const Site n = i + j - m;
          if (norm_sq(n) > r2) continue;
          const std::int16_t hh = std::int16_t(h);
          MonomialTerm tq;  // (i mult / 4pi^2) q_i q_j qbar_m d/dq_n
          tq.target = {hh, n, +1};
          tq.coeff = cd(0.0, mult * c0);
          tq.eps_pow = 1;
          tq.exps.mul({hh, i, +1}, 1);
          tq.exps.mul({hh, j, +1}, 1);
          tq.exps.mul({hh, m, -1}, 1);
          X.add_term(tq);

          MonomialTerm tc;  // conjugate family
          tc.target = {hh, n, -1};
          tc.coeff = cd(0.0, -mult * c0);
          tc.eps_pow = 1;
          tc.exps.mul({hh, i, -1}, 1);
          tc.exps.mul({hh, j, -1}, 1);
          tc.exps.mul({hh, m, +1}, 1);
          X.add_term(tc);
        }
      }
    }
  }
  X.normalize();
  return X;
}

PolyVectorField build_linear_lambda(int d, int R) {
  PolyVectorField X(d, R);
  for (int h = 0; h < d; ++h) {
    for (const Site n : sites_in_ball(R)) {
      const double lam = double(norm_sq(n));
      for (int sgn : {+1, -1}) {
        MonomialTerm t;
        t.target = {std::int16_t(h), n, std::int16_t(sgn)};
        t.coeff = cd(0.0, sgn * lam);
        t.exps.mul(t.target, 1);
        X.add_term(t);
      }
    }
  }
  X.normalize();
  return X;
}

PolyVectorField build_momentum_field(int d, int R, int l) {
  if (l != 1 && l != 2) throw InvalidConfig("momentum component must be 1 or 2");
  PolyVectorField X(d, R);
  for (int h = 0; h < d; ++h) {
    for (const Site n : sites_in_ball(R)) {
      const double nl = (l == 1) ? n.n1 : n.n2;
      for (int sgn : {+1, -1}) {
        MonomialTerm t;
        t.target = {std::int16_t(h), n, std::int16_t(sgn)};
        t.coeff = cd(0.0, sgn * nl);
        t.exps.mul(t.target, 1);
        X.add_term(t);
      }
    }
  }
  X.normalize();
  return X;
}

namespace {

std::uint64_t hash_var(const ModeVar& v) {
  auto u = [](int x) { return std::uint64_t(std::uint16_t(x)); };
  return (u(v.h) << 48) | (u(v.n.n1) << 32) | (u(v.n.n2) << 16) | u(v.sign);
}

// (X.grad)Y contributions, scaled by `sign`, appended to out.
void bracket_half(const PolyVectorField& X, const PolyVectorField& Y,
                  double sign, int max_degree, PolyVectorField& out) {
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_var;
  for (std::size_t u = 0; u < Y.terms().size(); ++u)
    for (const auto& e : Y.terms()[u].exps)
      by_var[hash_var(e.var)].push_back(u);

  for (const auto& t : X.terms()) {
    auto it = by_var.find(hash_var(t.target));
    if (it == by_var.end()) continue;
    const int dt = t.degree();
    for (std::size_t uid : it->second) {
      const auto& u = Y.terms()[uid];
      if (max_degree >= 0 && dt + u.degree() - 1 > max_degree) continue;
      const int p = u.exps.power_of(t.target);
      MonomialTerm r;
      r.target = u.target;
      r.eps_pow = t.eps_pow + u.eps_pow;
      r.coeff = sign * double(p) * u.coeff * t.coeff;
      r.exps = u.exps;
      r.exps.div_once(t.target);
      for (const auto& e : t.exps) r.exps.mul(e.var, e.pow);
      out.add_term(std::move(r));
    }
  }
}

}  // namespace

PolyVectorField lie_bracket(const PolyVectorField& X, const PolyVectorField& Y,
                            int max_degree) {
  if (X.d() != Y.d()) throw InvalidConfig("lie_bracket: component mismatch");
  PolyVectorField out(X.d(), std::max(X.R(), Y.R()));
  bracket_half(X, Y, +1.0, max_degree, out);
  bracket_half(Y, X, -1.0, max_degree, out);
  out.normalize();
  return out;
}

PolyVectorField truncate_to_radius(const PolyVectorField& X, int R,
                                   OverflowPolicy policy,
                                   std::size_t* dropped) {
  PolyVectorField out(X.d(), R);
  const std::int64_t r2 = std::int64_t(R) * R;
  std::size_t n_dropped = 0;
  for (const auto& t : X.terms()) {
    bool inside = norm_sq(t.target.n) <= r2;
    for (const auto& e : t.exps) inside = inside && norm_sq(e.var.n) <= r2;
    if (inside) {
      out.add_term(t);
    } else if (policy == OverflowPolicy::Throw) {
      throw TruncationOverflow("term references a site with norm > " +
                               std::to_string(R));
    } else {
      ++n_dropped;
    }
  }
  if (dropped) *dropped = n_dropped;
  out.normalize();
  return out;
}

bool check_reversible(const PolyVectorField& X) {
  for (const auto& t : X.terms()) {
    TermKey flipped;
    flipped.target = t.target.conjugated();
    flipped.eps_pow = t.eps_pow;
    for (const auto& e : t.exps) flipped.exps.mul(e.var.conjugated(), e.pow);
    if (X.coeff_of(flipped) != -t.coeff) return false;
  }
  return true;
}

bool check_momentum(const PolyVectorField& X, int l) {
  if (l != 1 && l != 2) throw InvalidConfig("momentum component must be 1 or 2");
  for (const auto& t : X.terms()) {
    std::int64_t s = 0;
    for (const auto& e : t.exps)
      s += std::int64_t(e.var.sign) * e.pow *
           (l == 1 ? e.var.n.n1 : e.var.n.n2);
    s -= std::int64_t(t.target.sign) *
         (l == 1 ? t.target.n.n1 : t.target.n.n2);
    if (s != 0) return false;
  }
  return true;
}

double seq_norm(const ModeSeq& z, double rho) {
  double s = 0.0;
  for (const auto& [k, v] : z) s += std::exp(norm(k.second) * rho) * std::abs(v);
  return s;
}

namespace {

// sup over the per-(h,sign) balls ||z||_rho < s of |z^exps|, by weighted
// AM-GM. Exact for a single monomial.
double monomial_sup(const Exponents& exps, double rho, double s) {
  // group totals
  std::map<std::pair<int, int>, int> tot;
  for (const auto& e : exps) tot[{e.var.h, e.var.sign}] += e.pow;
  double logv = 0.0;
  for (const auto& e : exps) {
    const int A = tot[{e.var.h, e.var.sign}];
    logv += e.pow * (std::log(double(e.pow) / double(A)) - norm(e.var.n) * rho);
  }
  for (const auto& [k, A] : tot) logv += A * std::log(s);
  return std::exp(logv);
}

}  // namespace

double vf_norm_upper(const PolyVectorField& X, double rho, double s) {
  if (rho <= 0 || s <= 0) throw InvalidConfig("vf_norm_upper needs rho, s > 0");
  double total = 0.0;
  for (const auto& t : X.terms()) {
    const double sup =
        t.degree() == 0 ? std::abs(t.coeff)
                        : std::abs(t.coeff) * monomial_sup(t.exps, rho, s);
    total += std::exp(norm(t.target.n) * rho) / s * sup;
  }
  return total;
}

ModeSeq apply(const PolyVectorField& X, const ModeSeq& state, double eps) {
  ModeSeq out;
  for (const auto& t : X.terms()) {
    if (t.target.sign != +1) continue;  // qbar-sector mirrors by conjugacy
    cd val = t.coeff;
    if (t.eps_pow != 0) val *= std::pow(eps, t.eps_pow);
    bool zero = false;
    for (const auto& e : t.exps) {
      auto it = state.find({e.var.h, e.var.n});
      if (it == state.end() || it->second == cd(0.0, 0.0)) {
        zero = true;
        break;
      }
      cd z = e.var.sign > 0 ? it->second : std::conj(it->second);
      for (int p = 0; p < e.pow; ++p) val *= z;
    }
    if (zero || val == cd(0.0, 0.0)) continue;
    out[{t.target.h, t.target.n}] += val;
  }
  return out;
}

namespace {

// Derivative of the row component with respect to one column variable:
// a polynomial in the remaining variables.
std::map<Exponents, cd> jacobian_entry(
    const PolyVectorField& X,
    const std::map<ModeVar, std::vector<std::size_t>>& by_target, ModeVar row,
    ModeVar col) {
  std::map<Exponents, cd> out;
  auto it = by_target.find(row);
  if (it == by_target.end()) return out;
  for (std::size_t id : it->second) {
    const auto& t = X.terms()[id];
    const int p = t.exps.power_of(col);
    if (p == 0) continue;
    Exponents e = t.exps;
    e.div_once(col);
    out[e] += double(p) * t.coeff;
  }
  return out;
}

double poly_norm(const std::map<Exponents, cd>& poly, double rho, double s) {
  double total = 0.0;
  for (const auto& [e, c] : poly)
    total += e.degree() == 0 ? std::abs(c) : std::abs(c) * monomial_sup(e, rho, s);
  return total;
}

}  // namespace

TLReport toeplitz_lipschitz_check(const PolyVectorField& X, Site c, int K,
                                  const TLBudget& budget) {
  if (norm_sq(c) < 1) throw InvalidConfig("direction c must be nonzero");
  TLReport rep;
  rep.direction = c;
  rep.K = K;

  std::map<ModeVar, std::vector<std::size_t>> by_target;
  for (std::size_t id = 0; id < X.terms().size(); ++id)
    by_target[X.terms()[id].target].push_back(id);

  const std::int64_t r2 = std::int64_t(X.R()) * X.R();
  std::vector<Site> offsets;
  for (int x = -budget.max_offset; x <= budget.max_offset; ++x)
    for (int y = -budget.max_offset; y <= budget.max_offset; ++y)
      offsets.push_back({x, y});

  // t samples shared across entries: sites n + t c and m -+ t c must all
  // stay inside the ball for the largest sampled offsets.
  std::vector<int> ts;
  for (int t = K + 1; int(ts.size()) < budget.t_count; ++t) {
    const Site shift = c * t;
    bool ok = true;
    for (const Site o : offsets)
      ok = ok && norm_sq(o + shift) <= r2 && norm_sq(o - shift) <= r2;
    if (!ok) break;
    ts.push_back(t);
  }
  if (ts.empty())
    throw TruncationTooSmall("no t with |t| > K fits inside radius " +
                             std::to_string(X.R()));
  rep.t_samples = ts;

  for (int h_row = 0; h_row < X.d(); ++h_row) {
    for (int h_col = 0; h_col < X.d(); ++h_col) {
      for (int sigma_row : {+1, -1}) {
        for (int same : {+1, -1}) {  // column sign = same * sigma_row
          for (const Site n0 : offsets) {
            for (const Site m0 : offsets) {
              TLEntry ent;
              ent.n = n0;
              ent.m = m0;
              ent.h_row = h_row;
              ent.h_col = h_col;
              ent.sigma_row = sigma_row;
              ent.sigma_col = same * sigma_row;

              // D_t for each sampled t
              std::vector<std::map<Exponents, cd>> der;
              for (int t : ts) {
                const ModeVar row{std::int16_t(h_row), n0 + c * t,
                                  std::int16_t(sigma_row)};
                const ModeVar col{std::int16_t(h_col),
                                  same > 0 ? m0 + c * t : m0 - c * t,
                                  std::int16_t(ent.sigma_col)};
                der.push_back(jacobian_entry(X, by_target, row, col));
              }

              // fixed monomials: present for every sampled t
              std::map<Exponents, cd> limit;
              for (const auto& [e, v] : der.back()) {
                bool everywhere = true;
                for (const auto& d : der) everywhere = everywhere && d.count(e);
                if (everywhere) limit[e] = v;
              }
              ent.limit_norm = poly_norm(limit, budget.rho, budget.s);
              const Site diff = same > 0 ? n0 - m0 : n0 + m0;
              ent.decay_bound = budget.eps0 * std::exp(-norm(diff) * budget.rho);
              ent.decay_ok = ent.limit_norm <= ent.decay_bound + 1e-12;

              ent.stabilized_exactly = true;
              double first_defect = 0.0, last_defect = 0.0;
              for (std::size_t k = 0; k < der.size(); ++k) {
                double defect = 0.0;
                for (const auto& [e, v] : limit) {
                  auto it2 = der[k].find(e);
                  const cd dv = (it2 == der[k].end() ? -v : it2->second - v);
                  defect = std::max(defect, std::abs(dv));
                }
                if (defect != 0.0) ent.stabilized_exactly = false;
                ent.max_defect = std::max(ent.max_defect, defect);
                if (k + 1 < der.size())  // reference sample excluded
                  ent.max_defect_times_t =
                      std::max(ent.max_defect_times_t, defect * ts[k]);
                if (k == 0) first_defect = defect;
                last_defect = defect;
              }
              ent.lipschitz_ok = true;
              for (std::size_t k = 0; k + 1 < der.size(); ++k) {
                double defect = 0.0;
                for (const auto& [e, v] : limit) {
                  auto it2 = der[k].find(e);
                  const cd dv = (it2 == der[k].end() ? -v : it2->second - v);
                  defect = std::max(defect, std::abs(dv));
                }
                if (defect > budget.eps0 / double(ts[k]) + 1e-12)
                  ent.lipschitz_ok = false;
              }
              ent.limit_exists =
                  ent.stabilized_exactly || last_defect <= first_defect + 1e-15;

              rep.limits_ok = rep.limits_ok && ent.limit_exists;
              rep.decay_ok = rep.decay_ok && ent.decay_ok;
              rep.lipschitz_ok = rep.lipschitz_ok && ent.lipschitz_ok;
              rep.max_defect = std::max(rep.max_defect, ent.max_defect);
              rep.entries.push_back(std::move(ent));
            }
          }
        }
      }
    }
  }
  return rep;
}

}  // namespace rnls
