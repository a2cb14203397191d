#include "rnls/simulate.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "rnls/lattice.hpp"

namespace rnls {

double GPoly::dpartial(int h, const std::vector<double>& s) const {
  double acc = 0.0;
  for (const auto& t : terms) {
    if (t.p[h] == 0) continue;
    double v = t.c * t.p[h];
    for (std::size_t j = 0; j < s.size(); ++j) {
      const int e = t.p[j] - (int(j) == h ? 1 : 0);
      for (int k = 0; k < e; ++k) v *= s[j];
    }
    acc += v;
  }
  return acc;
}

int GPoly::max_total_degree() const {
  int m = 0;
  for (const auto& t : terms) {
    int tot = 0;
    for (int e : t.p) tot += e;
    m = std::max(m, tot);
  }
  return m;
}

std::size_t SimConfig::steps() const {
  return std::size_t(std::llround(T / dt));
}

void SimConfig::validate() const {
  if (d < 1) throw ConfigError("d must be >= 1");
  if (int(sites.size()) != b || b < 1)
    throw ConfigError("sites must list b tangential sites");
  TangentialSet check(sites);  // throws on duplicates
  if (N < 8 || (N & (N - 1)) != 0) throw ConfigError("N must be a power of 2, >= 8");
  const int ball = dealias ? N / 3 : N / 2 - 1;
  for (Site s : sites)
    if (std::abs(s.n1) > ball || std::abs(s.n2) > ball)
      throw InvalidConfig("tangential site " + to_string(s) +
                          " outside the usable grid ball");
  if (int(xi.size()) != d) throw ConfigError("xi must have d rows");
  for (const auto& row : xi) {
    if (int(row.size()) != b) throw ConfigError("xi rows must have b entries");
    for (double v : row)
      if (!(v > 0.0) || v > 1e-2)
        throw ConfigError("xi entries must lie in (0, 1e-2]");
  }
  if (!G.empty()) {
    if (int(G.size()) != d) throw ConfigError("G must have one polynomial per component");
    for (const auto& g : G)
      for (const auto& t : g.terms) {
        if (int(t.p.size()) != d) throw ConfigError("G exponents must have d entries");
        int tot = 0;
        for (int e : t.p) {
          if (e < 0) throw ConfigError("G exponents must be non-negative");
          tot += e;
        }
        if (tot < 3)
          throw ConfigError("G terms must have total degree >= 3 in s");
      }
  }
  if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("dt and T must be positive");
  if (steps() < 1) throw ConfigError("T too small for one step");
  if (std::abs(double(steps()) * dt - T) > 1e-6 * std::max(1.0, T))
    throw ConfigError("T must be an integer multiple of dt");
  if (stride < 1 || steps() % std::size_t(stride) != 0)
    throw ConfigError("stride must divide the step count");
  const double lam_max = 2.0 * (N / 2.0) * (N / 2.0);
  if (dt * lam_max > 4.0 * kPi)
    throw ConfigError("dt too large for the grid (phase per step over 4*pi)");
  if (!(blowup_sup > 0.0)) throw ConfigError("blowup_sup must be positive");
}

FieldState::FieldState(int d, int N)
    : d_(d), N_(N), q_(d, std::vector<cd>(std::size_t(N) * N, cd(0, 0))) {}

std::size_t FieldState::index_of(Site n) const {
  const int a = ((n.n1 % N_) + N_) % N_;
  const int b = ((n.n2 % N_) + N_) % N_;
  return std::size_t(a) * N_ + b;
}

cd FieldState::at(int h, Site n) const { return q_[h][index_of(n)]; }

void FieldState::set(int h, Site n, cd v) { q_[h][index_of(n)] = v; }

double FieldState::mass(int h) const {
  double s = 0.0;
  for (cd v : q_[h]) s += std::norm(v);
  return s;
}

double FieldState::normal_sup(int h, const std::vector<Site>& I) const {
  std::vector<std::size_t> skip;
  for (Site s : I) skip.push_back(index_of(s));
  double sup = 0.0;
  for (std::size_t idx = 0; idx < q_[h].size(); ++idx) {
    if (std::find(skip.begin(), skip.end(), idx) != skip.end()) continue;
    sup = std::max(sup, std::abs(q_[h][idx]));
  }
  return sup;
}

void FieldState::conjugate_inplace() {
  for (auto& comp : q_)
    for (auto& v : comp) v = std::conj(v);
}

namespace {

// Mode index (frequency) of a wrapped array position.
inline int freq_of(int idx, int N) { return idx < N / 2 ? idx : idx - N; }

}  // namespace

FieldState build_ansatz(const SimConfig& config) {
  config.validate();
  FieldState st(config.d, config.N);
  for (int h = 0; h < config.d; ++h)
    for (int a = 0; a < config.b; ++a)
      st.set(h, config.sites[a], cd(std::sqrt(config.xi[h][a]), 0.0));

  if (config.first_order_correction) {
    // Seed the normal sector with the homological-flow image of the torus:
    // z_n += -i c / delta * q_a q_b qbar_c over tangential triples.
    TangentialSet I(config.sites);
    const cd unit(0.0, 1.0 / kFourPiSq);
    for (int h = 0; h < config.d; ++h) {
      std::map<Site, cd> corr;
      for (int a = 0; a < config.b; ++a)
        for (int b2 = 0; b2 < config.b; ++b2)
          for (int c = 0; c < config.b; ++c) {
            const Site n = config.sites[a] + config.sites[b2] - config.sites[c];
            if (I.contains(n)) continue;
            const std::int64_t delta = norm_sq(config.sites[a]) +
                                       norm_sq(config.sites[b2]) -
                                       norm_sq(config.sites[c]) - norm_sq(n);
            if (delta == 0) continue;
            const cd mono = cd(std::sqrt(config.xi[h][a]), 0.0) *
                            cd(std::sqrt(config.xi[h][b2]), 0.0) *
                            cd(std::sqrt(config.xi[h][c]), 0.0);
            corr[n] += cd(0.0, -1.0) * unit / double(delta) * mono;
          }
      const int ball = config.dealias ? config.N / 3 : config.N / 2 - 1;
      for (const auto& [n, v] : corr)
        if (std::abs(n.n1) <= ball && std::abs(n.n2) <= ball)
          st.set(h, n, st.at(h, n) + v);
    }
  }
  return st;
}

struct SplitStepIntegrator::Impl {
  SimConfig config;
  int N;
  fftw_plan fwd = nullptr, bwd = nullptr;
  std::vector<cd> buf;
  std::vector<std::vector<cd>> u;       // physical fields per component
  std::vector<std::vector<double>> s;   // intensities per component
  std::vector<double> lambda;           // |n|^2 per array index
  std::vector<char> keep;               // dealias mask
  double cached_dt = 0.0;
  std::vector<cd> half_phase;  // e^{i lambda dt/2}

  explicit Impl(const SimConfig& cfg) : config(cfg), N(cfg.N) {
    buf.resize(std::size_t(N) * N);
    u.assign(cfg.d, std::vector<cd>(buf.size()));
    s.assign(cfg.d, std::vector<double>(buf.size()));
    lambda.resize(buf.size());
    keep.assign(buf.size(), 1);
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) {
        const int n1 = freq_of(a, N), n2 = freq_of(b, N);
        const std::size_t idx = std::size_t(a) * N + b;
        lambda[idx] = double(n1) * n1 + double(n2) * n2;
        const int ball = cfg.dealias ? N / 3 : N / 2 - 1;
        keep[idx] = (std::abs(n1) <= ball && std::abs(n2) <= ball) ? 1 : 0;
      }
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    fwd = fftw_plan_dft_2d(N, N, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_2d(N, N, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  ~Impl() {
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }

  void refresh_phase(double dt) {
    if (dt == cached_dt && !half_phase.empty()) return;
    half_phase.resize(lambda.size());
    for (std::size_t i = 0; i < lambda.size(); ++i)
      half_phase[i] = std::polar(1.0, lambda[i] * dt / 2.0);
    cached_dt = dt;
  }

  void linear_half(FieldState& st) const {
    for (int h = 0; h < config.d; ++h) {
      auto& q = st.raw(h);
      for (std::size_t i = 0; i < q.size(); ++i) q[i] *= half_phase[i];
    }
  }

  // Physical fields are held unnormalized (u_raw = 2 pi u); the 1/(2 pi)
  // enters only through the real intensities, so the spectral round trip
  // carries the exact power-of-two factor 1/N^2 and preserves mass to
  // rounding.
  void to_physical(const FieldState& st, int h) {
    std::copy(st.raw(h).begin(), st.raw(h).end(), buf.begin());
    fftw_execute(bwd);  // unnormalized sum of e^{+i<n,x>}
    std::copy(buf.begin(), buf.end(), u[h].begin());
  }

  void to_spectral(FieldState& st, int h) {
    const double scale = 1.0 / (double(N) * N);  // exact for N a power of 2
    std::copy(u[h].begin(), u[h].end(), buf.begin());
    fftw_execute(fwd);
    auto& q = st.raw(h);
    for (std::size_t i = 0; i < buf.size(); ++i) q[i] = buf[i] * scale;
  }

  void nonlinear_full(FieldState& st, double dt) {
    for (int h = 0; h < config.d; ++h) to_physical(st, h);

    const double inv4pisq = 1.0 / kFourPiSq;
    double sup = 0.0;
    for (int h = 0; h < config.d; ++h)
      for (std::size_t i = 0; i < u[h].size(); ++i) {
        s[h][i] = std::norm(u[h][i]) * inv4pisq;
        sup = std::max(sup, std::abs(u[h][i]));
      }
    if (sup > config.blowup_sup * 2.0 * kPi)
      throw BlowUp("field sup norm " + std::to_string(sup / (2.0 * kPi)) +
                   " exceeded the configured bound");

    std::vector<double> sx(config.d);
    for (std::size_t i = 0; i < s[0].size(); ++i) {
      for (int h = 0; h < config.d; ++h) sx[h] = s[h][i];
      for (int h = 0; h < config.d; ++h) {
        double theta = sx[h];
        if (!config.G.empty()) theta += config.G[h].dpartial(h, sx);
        u[h][i] *= std::polar(1.0, dt * theta);
      }
    }
    for (int h = 0; h < config.d; ++h) {
      to_spectral(st, h);
      auto& q = st.raw(h);
      for (std::size_t i = 0; i < q.size(); ++i)
        if (!keep[i]) q[i] = cd(0, 0);
    }
  }
};

SplitStepIntegrator::SplitStepIntegrator(const SimConfig& config)
    : impl_(std::make_unique<Impl>(config)) {}

SplitStepIntegrator::~SplitStepIntegrator() = default;

void SplitStepIntegrator::step(FieldState& state, double dt) const {
  impl_->refresh_phase(dt);
  impl_->linear_half(state);
  impl_->nonlinear_full(state, dt);
  impl_->linear_half(state);
}

const std::vector<cd>* ModeTrace::series_for(int h, Site n) const {
  for (std::size_t i = 0; i < tracked.size(); ++i)
    if (tracked[i].first == h && tracked[i].second == n) return &series[i];
  return nullptr;
}

namespace {

std::vector<std::pair<int, Site>> tracked_modes(const SimConfig& config) {
  const int ball = config.dealias ? config.N / 3 : config.N / 2 - 1;
  auto inside = [&](Site s) {
    return std::abs(s.n1) <= ball && std::abs(s.n2) <= ball;
  };
  std::vector<Site> sites = config.sites;
  TangentialSet I(config.sites);
  for (const auto& p : enumerate_second_type(I)) {
    sites.push_back(p.n);
    sites.push_back(p.m);
  }
  auto l1 = enumerate_first_type(I, ball);
  std::sort(l1.begin(), l1.end(), [](const auto& a, const auto& b) {
    return std::max(norm_sq(a.n), norm_sq(a.m)) <
           std::max(norm_sq(b.n), norm_sq(b.m));
  });
  for (std::size_t i = 0; i < l1.size() && i < 2; ++i) {
    sites.push_back(l1[i].n);
    sites.push_back(l1[i].m);
  }
  for (Site s : config.tracked_extra) sites.push_back(s);

  std::vector<std::pair<int, Site>> out;
  for (int h = 0; h < config.d; ++h)
    for (Site s : sites) {
      if (!inside(s)) continue;
      if (std::find(out.begin(), out.end(), std::make_pair(h, s)) == out.end())
        out.emplace_back(h, s);
    }
  return out;
}

}  // namespace

ModeTrace run(const SimConfig& config) {
  config.validate();
  ModeTrace trace;
  trace.config = config;
  trace.tracked = tracked_modes(config);
  trace.series.assign(trace.tracked.size(), {});
  trace.mass.assign(config.d, {});
  trace.normal_sup.assign(config.d, {});

  FieldState st = build_ansatz(config);
  SplitStepIntegrator integ(config);

  const std::size_t steps = config.steps();
  auto record = [&](double t) {
    trace.times.push_back(t);
    for (std::size_t i = 0; i < trace.tracked.size(); ++i)
      trace.series[i].push_back(
          st.at(trace.tracked[i].first, trace.tracked[i].second));
    for (int h = 0; h < config.d; ++h) {
      trace.mass[h].push_back(st.mass(h));
      trace.normal_sup[h].push_back(st.normal_sup(h, config.sites));
    }
  };
  record(0.0);
  for (std::size_t k = 1; k <= steps; ++k) {
    integ.step(st, config.dt);
    if (k % std::size_t(config.stride) == 0) record(double(k) * config.dt);
  }
  trace.final_state = std::move(st);
  return trace;
}

FreqFit fit_frequency(const std::vector<double>& times,
                      const std::vector<cd>& series) {
  if (times.size() != series.size() || times.size() < 3)
    throw DegenerateFit("need at least 3 samples");
  double amp_min = 1e300, amp_max = 0.0;
  for (cd v : series) {
    amp_min = std::min(amp_min, std::abs(v));
    amp_max = std::max(amp_max, std::abs(v));
  }
  if (amp_min < 1e-14 || amp_min < 1e-3 * amp_max)
    throw DegenerateFit("amplitude collapsed during the window");

  std::vector<double> phase(times.size());
  phase[0] = std::arg(series[0]);
  for (std::size_t k = 1; k < series.size(); ++k) {
    const double dphi = std::arg(series[k] / series[k - 1]);
    if (std::abs(dphi) > kPi * 0.95)
      throw DegenerateFit("phase increment too close to pi to unwrap");
    phase[k] = phase[k - 1] + dphi;
  }

  const std::size_t n = times.size();
  double st = 0, sp = 0, stt = 0, stp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    st += times[k];
    sp += phase[k];
    stt += times[k] * times[k];
    stp += times[k] * phase[k];
  }
  FreqFit fit;
  fit.omega = (n * stp - st * sp) / (n * stt - st * st);
  const double b0 = (sp - fit.omega * st) / n;
  double ss = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = phase[k] - (fit.omega * times[k] + b0);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

double predicted_frequency(const SimConfig& config, int h, int a) {
  double shift = config.xi[h][a];
  for (int a2 = 0; a2 < config.b; ++a2)
    if (a2 != a) shift += 2.0 * config.xi[h][a2];
  return double(norm_sq(config.sites[a])) + shift / kFourPiSq;
}

QPVerdict verify_quasiperiodic(const ModeTrace& trace,
                               const SimConfig& config) {
  QPVerdict v;
  double max_xi = 0.0;
  for (const auto& row : config.xi)
    for (double x : row) max_xi = std::max(max_xi, x);
  v.normal_bound = config.tol.normal_sup_factor * std::pow(max_xi, 1.5);

  v.amp_ok = v.freq_ok = true;
  for (int h = 0; h < config.d; ++h) {
    for (int a = 0; a < config.b; ++a) {
      const auto* ser = trace.series_for(h, config.sites[a]);
      if (!ser) continue;
      QPVerdict::ModeCheck mc;
      mc.h = h;
      mc.n = config.sites[a];
      double amin = 1e300, amax = 0.0;
      for (cd val : *ser) {
        amin = std::min(amin, std::abs(val));
        amax = std::max(amax, std::abs(val));
      }
      const double base = std::abs(ser->front());
      mc.amp_drift = base > 0 ? (amax - amin) / base : 0.0;
      const auto fit = fit_frequency(trace.times, *ser);
      mc.omega_fitted = fit.omega;
      mc.fit_residual = fit.residual;
      mc.omega_predicted = predicted_frequency(config, h, a);
      mc.freq_error = std::abs(mc.omega_fitted - mc.omega_predicted);
      v.amp_ok = v.amp_ok && mc.amp_drift <= config.tol.amp_drift;
      v.freq_ok = v.freq_ok && mc.freq_error <= config.tol.freq_tol;
      v.tangential.push_back(mc);
    }
  }

  v.normal_ok = true;
  v.mass_ok = true;
  for (int h = 0; h < config.d; ++h) {
    double sup = 0.0;
    for (double x : trace.normal_sup[h]) sup = std::max(sup, x);
    v.normal_sup_max.push_back(sup);
    v.normal_ok = v.normal_ok && sup <= v.normal_bound;

    const double m0 = trace.mass[h].front();
    double drift = 0.0;
    for (double m : trace.mass[h])
      drift = std::max(drift, std::abs(m - m0) / std::max(m0, 1e-300));
    v.mass_drift.push_back(drift);
    v.mass_ok = v.mass_ok && drift <= config.tol.mass_tol;
  }

  // zero field: trivially quasi-periodic (all margins zero)
  if (v.tangential.empty()) v.amp_ok = v.freq_ok = true;
  v.pass = v.amp_ok && v.normal_ok && v.freq_ok && v.mass_ok;
  return v;
}

namespace {

using SpMap = std::map<Site, cd>;

SpMap conv(const SpMap& a, const SpMap& b) {
  SpMap out;
  for (const auto& [sa, va] : a)
    for (const auto& [sb, vb] : b) out[sa + sb] += va * vb;
  return out;
}

SpMap reflect_conj(const SpMap& a) {
  SpMap out;
  for (const auto& [s, v] : a) out[-s] += std::conj(v);
  return out;
}

}  // namespace

ModeSeq sparse_rhs(const ModeSeq& state, const SimConfig& config) {
  // split per component
  std::vector<SpMap> q(config.d);
  for (const auto& [k, v] : state) q[k.first][k.second] = v;

  // intensity spectra s_h (coefficients of e^{i<k,x>})
  std::vector<SpMap> s(config.d);
  for (int h = 0; h < config.d; ++h) {
    s[h] = conv(q[h], reflect_conj(q[h]));
    for (auto& [k, v] : s[h]) v /= kFourPiSq;
  }

  ModeSeq out;
  for (int h = 0; h < config.d; ++h) {
    // theta_h = s_h + dG_h/ds_h(s), as a sparse spectrum
    SpMap theta = s[h];
    if (!config.G.empty()) {
      for (const auto& term : config.G[h].terms) {
        if (term.p[h] == 0) continue;
        SpMap prod{{Site{0, 0}, cd(term.c * term.p[h], 0.0)}};
        for (int j = 0; j < config.d; ++j) {
          const int e = term.p[j] - (j == h ? 1 : 0);
          for (int rep = 0; rep < e; ++rep) prod = conv(prod, s[j]);
        }
        for (const auto& [k, v] : prod) theta[k] += v;
      }
    }
    SpMap rhs_nl = conv(theta, q[h]);
    for (const auto& [n, v] : q[h])
      out[{h, n}] += cd(0.0, double(norm_sq(n))) * v;
    for (const auto& [n, v] : rhs_nl) out[{h, n}] += cd(0.0, 1.0) * v;
  }
  return out;
}

FieldState spectral_rhs(const FieldState& state, const SimConfig& config) {
  // Same spectral arithmetic as the stepper but as a plain derivative
  // evaluation, without dealiasing.
  const int N = state.N();
  FieldState out(state.d(), N);
  std::vector<cd> buf(std::size_t(N) * N);
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan fwd = fftw_plan_dft_2d(N, N, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_plan bwd = fftw_plan_dft_2d(N, N, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);

  std::vector<std::vector<cd>> u(config.d, std::vector<cd>(buf.size()));
  std::vector<std::vector<double>> s(config.d,
                                     std::vector<double>(buf.size()));
  for (int h = 0; h < config.d; ++h) {
    std::copy(state.raw(h).begin(), state.raw(h).end(), buf.begin());
    fftw_execute(bwd);
    const double scale = 1.0 / (2.0 * kPi);
    for (std::size_t i = 0; i < buf.size(); ++i) u[h][i] = buf[i] * scale;
    for (std::size_t i = 0; i < buf.size(); ++i) s[h][i] = std::norm(u[h][i]);
  }
  std::vector<double> sx(config.d);
  for (int h = 0; h < config.d; ++h) {
    for (std::size_t i = 0; i < buf.size(); ++i) {
      for (int j = 0; j < config.d; ++j) sx[j] = s[j][i];
      double theta = sx[h];
      if (!config.G.empty()) theta += config.G[h].dpartial(h, sx);
      buf[i] = theta * u[h][i];
    }
    fftw_execute(fwd);
    const double scale = 2.0 * kPi / (double(N) * N);
    auto& qd = out.raw(h);
    for (std::size_t i = 0; i < buf.size(); ++i) qd[i] = buf[i] * scale;
  }
  // add linear part and the overall i
  for (int h = 0; h < config.d; ++h) {
    auto& qd = out.raw(h);
    const auto& q = state.raw(h);
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) {
        const std::size_t idx = std::size_t(a) * N + b;
        const double n1 = freq_of(a, N), n2 = freq_of(b, N);
        qd[idx] = cd(0.0, 1.0) * (qd[idx] + (n1 * n1 + n2 * n2) * q[idx]);
      }
  }
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(bwd);
  return out;
}

double residual_norm(const SimConfig& config, int t_samples) {
  config.validate();
  double worst = 0.0;
  std::vector<double> omega(config.d * config.b);
  for (int h = 0; h < config.d; ++h)
    for (int a = 0; a < config.b; ++a)
      omega[std::size_t(h) * config.b + a] = predicted_frequency(config, h, a);

  for (int ts = 0; ts < t_samples; ++ts) {
    const double t = config.T * double(ts) / std::max(1, t_samples - 1);
    ModeSeq state;
    ModeSeq qdot;
    for (int h = 0; h < config.d; ++h)
      for (int a = 0; a < config.b; ++a) {
        const double w = omega[std::size_t(h) * config.b + a];
        const cd val = std::polar(std::sqrt(config.xi[h][a]), w * t);
        state[{h, config.sites[a]}] = val;
        qdot[{h, config.sites[a]}] = cd(0.0, w) * val;
      }
    ModeSeq rhs = sparse_rhs(state, config);
    for (const auto& [k, v] : qdot) rhs[k] -= v;
    double l1 = 0.0;
    for (const auto& [k, v] : rhs) l1 += std::abs(v);
    worst = std::max(worst, l1);
  }
  return worst;
}

}  // namespace rnls
