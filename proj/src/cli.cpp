#include "rnls/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <random>
#include <fstream>
#include <thread>

#include <CLI11.hpp>

#include "rnls/manifest.hpp"

namespace rnls {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

json site_json(Site s) { return json::array({s.n1, s.n2}); }

json pair_json(const ResonantPair& p) {
  json j;
  j["kind"] = p.kind == ResonanceKind::First ? "first" : "second";
  j["n"] = site_json(p.n);
  j["m"] = site_json(p.m);
  j["i"] = site_json(p.i);
  j["j"] = site_json(p.j);
  return j;
}

struct RunContext {
  fs::path dir;
  RunManifest manifest;
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();

  void attach(json& report) const { report["manifest_id"] = manifest.id(); }

  std::string csv_header() const {
    return "# manifest " + manifest.id() + "\n";
  }

  void finish() {
    manifest.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    write_text(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
  }
};

int run_lattice(const Config& cfg, RunContext& ctx) {
  const TangentialSet I = cfg.tangential_set();
  const int R = cfg.lattice_radius();
  const auto verdict = check_admissible(I, R);
  const auto l1 = enumerate_first_type(I, R);
  const auto l2 = enumerate_second_type(I);

  json rep;
  rep["admissible"] = verdict.admissible;
  rep["verified_radius"] = verdict.verified_radius;
  rep["uniqueness_ok"] = verdict.uniqueness_ok;
  rep["disjoint_ok"] = verdict.disjoint_ok;
  rep["involution_ok"] = verdict.involution_ok;
  rep["note"] = verdict.note;
  rep["L1"] = json::array();
  for (const auto& p : l1) rep["L1"].push_back(pair_json(p));
  rep["L2"] = json::array();
  for (const auto& p : l2) rep["L2"].push_back(pair_json(p));
  rep["violations"] = json::array();
  for (const auto& v : verdict.violations) {
    json jv;
    jv["site"] = site_json(v.site);
    jv["reason"] = v.reason;
    jv["witnesses"] = json::array();
    for (const auto& w : v.witnesses) jv["witnesses"].push_back(pair_json(w));
    rep["violations"].push_back(jv);
  }
  ctx.attach(rep);
  write_text(ctx.dir / "lattice_report.json", rep.dump(2) + "\n");

  if (cfg.atlas()) {
    std::string csv = ctx.csv_header();
    csv += "n1,n2,class,partner_n1,partner_n2,i_n1,i_n2,j_n1,j_n2\n";
    for (Site n : sites_in_ball(R)) {
      std::string cls, rest = ",,,,,";
      try {
        const auto sc = classify_site(I, n, R);
        switch (sc.tag) {
          case SiteTag::Tangential: cls = "tangential"; break;
          case SiteTag::Generic: cls = "generic"; break;
          case SiteTag::FirstType: cls = "first_type"; break;
          case SiteTag::SecondType: cls = "second_type"; break;
        }
        if (sc.pair) {
          const auto& p = *sc.pair;
          rest = std::to_string(p.m.n1) + "," + std::to_string(p.m.n2) + "," +
                 std::to_string(p.i.n1) + "," + std::to_string(p.i.n2) + "," +
                 std::to_string(p.j.n1) + "," + std::to_string(p.j.n2);
        }
      } catch (const AmbiguousResonance&) {
        cls = "ambiguous";
      }
      csv += std::to_string(n.n1) + "," + std::to_string(n.n2) + "," + cls +
             "," + rest + "\n";
    }
    write_text(ctx.dir / "lattice_atlas.csv", csv);
  }
  return verdict.admissible ? 0 : 1;
}

int run_normalform(const Config& cfg, RunContext& ctx) {
  const TangentialSet I = cfg.tangential_set();
  const auto res = normal_form_pipeline(cfg.d(), cfg.nf_radius(), I);
  const auto& rep = res.report;

  json j;
  j["residual_nonresonant"] = rep.residual_nonresonant;
  j["residual_count"] = rep.residual_count;
  j["cross_component_clean"] = rep.cross_component_clean;
  j["tolerance"] = rep.tolerance;
  j["pass"] = rep.pass;
  j["families"] = json::array();
  for (const auto& f : rep.families) {
    json jf;
    jf["name"] = f.name;
    jf["expected_re"] = f.expected.real();
    jf["expected_im"] = f.expected.imag();
    jf["count"] = f.count;
    jf["worst_rel_err"] = f.worst_rel_err;
    j["families"].push_back(jf);
  }
  j["F_stats"] = {{"terms", rep.f_terms},
                  {"min_abs_denominator", rep.min_abs_denominator},
                  {"remainder_term_bound", rep.remainder.term_bound},
                  {"remainder_coeff_bound", rep.remainder.coeff_bound}};
  ctx.attach(j);
  write_text(ctx.dir / "normalform_report.json", j.dump(2) + "\n");

  std::string csv = ctx.csv_header();
  csv += "h,i_n1,i_n2,j_n1,j_n2,n_n1,n_n2,m_n1,m_n2,denominator,coeff_re,coeff_im\n";
  for (const auto& t : res.F.terms()) {
    if (t.target.sign != +1) continue;  // conjugate family mirrors
    Site plus[2];
    Site minus{};
    int np = 0;
    for (const auto& e : t.exps)
      for (int rep2 = 0; rep2 < e.pow; ++rep2) {
        if (e.var.sign > 0) plus[np++] = e.var.n;
        else minus = e.var.n;
      }
    csv += std::to_string(t.target.h) + "," + std::to_string(plus[0].n1) +
           "," + std::to_string(plus[0].n2) + "," + std::to_string(minus.n1) +
           "," + std::to_string(minus.n2) + "," + std::to_string(plus[1].n1) +
           "," + std::to_string(plus[1].n2) + "," +
           std::to_string(t.target.n.n1) + "," +
           std::to_string(t.target.n.n2) + "," +
           std::to_string(homological_denominator(t)) + "," +
           fmt(t.coeff.real()) + "," + fmt(t.coeff.imag()) + "\n";
  }
  write_text(ctx.dir / "normalform_F.csv", csv);
  return rep.pass ? 0 : 1;
}

json report_json(const MelnikovReport& rep) {
  json j;
  j["gamma"] = rep.gamma;
  j["tau"] = rep.tau;
  j["epsilon"] = rep.eps;
  j["kmax"] = rep.kmax;
  j["radius"] = rep.radius;
  j["k_norm"] = rep.k_norm;
  j["xi"] = rep.xi;
  j["min_margin"] = rep.min_margin;
  j["mel14_margin"] = rep.mel14_margin;
  j["mel14_bound"] = rep.mel14_bound;
  j["pass"] = rep.pass;
  j["conditions"] = json::array();
  for (const auto& st : rep.conditions) {
    json js;
    js["name"] = st.name;
    js["checked"] = st.checked;
    js["auto_passed"] = st.auto_passed;
    js["numeric"] = st.numeric;
    js["kernel"] = st.kernel;
    js["failed"] = st.failed;
    js["worst_margin"] = st.worst_margin;
    j["conditions"].push_back(js);
  }
  j["violations"] = json::array();
  for (const auto& v : rep.violations) {
    json jv;
    jv["condition"] = v.condition;
    jv["k"] = v.k;
    jv["h"] = v.h;
    jv["h2"] = v.h2;
    jv["block"] = v.block;
    jv["value"] = v.value;
    jv["threshold"] = v.threshold;
    j["violations"].push_back(jv);
  }
  return j;
}

int run_melnikov(const Config& cfg, RunContext& ctx, int threads) {
  const TangentialSet I = cfg.tangential_set();
  const auto cls = classify_all(I, cfg.mel_radius());
  const auto freq = frequencies(I, cls, cfg.d(), cfg.b());

  if (cfg.has_xi_check()) {
    const auto rep =
        check_conditions(cfg.xi_check(), cfg.epsilon(), cfg.gamma(), cfg.tau(),
                         cfg.kmax(), cfg.mel_radius(), freq);
    json j = report_json(rep);
    ctx.attach(j);
    write_text(ctx.dir / "melnikov_report.json", j.dump(2) + "\n");
    return rep.pass ? 0 : 1;
  }

  ParameterBox box{cfg.d(), cfg.b()};
  const auto scan =
      scan_measure(box, cfg.gamma_list(), cfg.tau(), cfg.epsilon(), cfg.kmax(),
                   cfg.mel_radius(), cfg.samples(), cfg.seed(), freq, threads);
  std::string csv = ctx.csv_header();
  csv += "gamma,excluded_fraction,ci_low,ci_high\n";
  for (const auto& row : scan.rows)
    csv += fmt(row.gamma) + "," + fmt(row.fraction) + "," + fmt(row.ci_low) +
           "," + fmt(row.ci_high) + "\n";
  write_text(ctx.dir / "melnikov_scan.csv", csv);

  json j;
  j["samples"] = scan.samples;
  j["seed"] = scan.seed;
  j["fitted_slope"] = scan.fitted_slope;
  j["fitted_intercept"] = scan.fitted_intercept;
  j["note"] = scan.note;
  j["rows"] = json::array();
  for (const auto& row : scan.rows)
    j["rows"].push_back({{"gamma", row.gamma},
                         {"excluded", row.excluded},
                         {"fraction", row.fraction},
                         {"ci_low", row.ci_low},
                         {"ci_high", row.ci_high}});
  ctx.attach(j);
  write_text(ctx.dir / "melnikov_scan.json", j.dump(2) + "\n");
  return 0;
}

json verdict_json(const QPVerdict& v) {
  json j;
  j["pass"] = v.pass;
  j["amp_ok"] = v.amp_ok;
  j["normal_ok"] = v.normal_ok;
  j["freq_ok"] = v.freq_ok;
  j["mass_ok"] = v.mass_ok;
  j["normal_bound"] = v.normal_bound;
  j["normal_sup_max"] = v.normal_sup_max;
  j["mass_drift"] = v.mass_drift;
  j["sign_convention"] = v.sign_convention;
  j["tangential"] = json::array();
  for (const auto& mc : v.tangential) {
    json jm;
    jm["h"] = mc.h;
    jm["n"] = site_json(mc.n);
    jm["amp_drift"] = mc.amp_drift;
    jm["omega_fitted"] = mc.omega_fitted;
    jm["omega_predicted"] = mc.omega_predicted;
    jm["freq_error"] = mc.freq_error;
    jm["fit_residual"] = mc.fit_residual;
    j["tangential"].push_back(jm);
  }
  return j;
}

void write_trace_csv(const ModeTrace& trace, const fs::path& path,
                     const RunContext& ctx) {
  std::string csv = ctx.csv_header();
  csv += "t";
  for (const auto& [h, n] : trace.tracked) {
    const std::string tag = std::to_string(h + 1) + "_" +
                            std::to_string(n.n1) + "_" + std::to_string(n.n2);
    csv += ",re_q" + tag + ",im_q" + tag;
  }
  for (int h = 0; h < trace.config.d; ++h)
    csv += ",mass" + std::to_string(h + 1);
  for (int h = 0; h < trace.config.d; ++h)
    csv += ",normal_sup" + std::to_string(h + 1);
  csv += "\n";
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    csv += fmt(trace.times[k]);
    for (const auto& ser : trace.series)
      csv += "," + fmt(ser[k].real()) + "," + fmt(ser[k].imag());
    for (int h = 0; h < trace.config.d; ++h) csv += "," + fmt(trace.mass[h][k]);
    for (int h = 0; h < trace.config.d; ++h)
      csv += "," + fmt(trace.normal_sup[h][k]);
    csv += "\n";
  }
  write_text(path, csv);
}

int run_simulate(const Config& cfg, RunContext& ctx) {
  const SimConfig sc = cfg.sim_config();
  const ModeTrace trace = run(sc);
  const QPVerdict verdict = verify_quasiperiodic(trace, sc);
  write_trace_csv(trace, ctx.dir / "trace.csv", ctx);
  json j = verdict_json(verdict);
  ctx.attach(j);
  write_text(ctx.dir / "qp_verdict.json", j.dump(2) + "\n");
  return verdict.pass ? 0 : 1;
}

int run_verify(const Config& cfg, RunContext& ctx, int threads) {
  (void)threads;
  json j;

  const TangentialSet I = cfg.tangential_set();
  const auto adm = check_admissible(I, cfg.lattice_radius());
  j["lattice"] = {{"admissible", adm.admissible},
                  {"verified_radius", adm.verified_radius}};

  const auto nf = normal_form_pipeline(cfg.d(), cfg.nf_radius(), I);
  j["normalform"] = {{"pass", nf.report.pass},
                     {"residual_nonresonant", nf.report.residual_nonresonant}};

  const auto cls = classify_all(I, cfg.mel_radius());
  const auto freq = frequencies(I, cls, cfg.d(), cfg.b());
  std::vector<std::vector<double>> xi_point;
  if (cfg.has_xi_check()) {
    xi_point = cfg.xi_check();
  } else {
    // deterministic generic interior point; structured choices (equal
    // components or equal spacings) sit on resonance hyperplanes
    ParameterBox box{cfg.d(), cfg.b()};
    std::mt19937_64 rng(0x9e3779b9 ^ cfg.seed());
    std::uniform_real_distribution<double> u(0.05, 0.45);
    for (int h = 0; h < cfg.d(); ++h) {
      std::vector<double> row;
      for (int a = 0; a < cfg.b(); ++a) row.push_back(box.lower(h) + u(rng));
      xi_point.push_back(row);
    }
  }
  const auto mel = check_conditions(xi_point, cfg.epsilon(), cfg.gamma(),
                                    cfg.tau(), cfg.kmax(), cfg.mel_radius(),
                                    freq);
  j["melnikov"] = {{"pass", mel.pass},
                   {"min_margin", mel.min_margin},
                   {"mel14_margin", mel.mel14_margin}};

  const SimConfig sc = cfg.sim_config();
  const ModeTrace trace = run(sc);
  const QPVerdict verdict = verify_quasiperiodic(trace, sc);
  write_trace_csv(trace, ctx.dir / "trace.csv", ctx);
  j["simulate"] = verdict_json(verdict);

  const bool pass =
      adm.admissible && nf.report.pass && mel.pass && verdict.pass;
  j["pass"] = pass;
  ctx.attach(j);
  write_text(ctx.dir / "verify_report.json", j.dump(2) + "\n");
  return pass ? 0 : 1;
}

std::vector<Site> parse_sites_flag(const std::string& s) {
  std::vector<Site> sites;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t semi = s.find(';', pos);
    const std::string tok = s.substr(pos, semi == std::string::npos
                                              ? std::string::npos
                                              : semi - pos);
    const std::size_t comma = tok.find(',');
    if (comma == std::string::npos)
      throw ConfigError("--sites expects n1,n2;n1,n2;...");
    sites.push_back({std::stoi(tok.substr(0, comma)),
                     std::stoi(tok.substr(comma + 1))});
    if (semi == std::string::npos) break;
    pos = semi + 1;
  }
  return sites;
}

}  // namespace

int dispatch(const std::string& subcommand, const Config& config,
             const std::string& out_dir, int threads) {
  RunContext ctx;
  ctx.dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(ctx.dir);
  ctx.manifest.subcommand = subcommand;
  ctx.manifest.seed = config.seed();
  ctx.manifest.config = config.resolved;
  ctx.manifest.input_hashes = {{"config", fnv1a64_hex(config.resolved.dump())}};

  int nthreads = threads > 0 ? threads : config.threads();
  if (nthreads <= 0)
    nthreads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));

  int rc = 2;
  if (subcommand == "lattice") rc = run_lattice(config, ctx);
  else if (subcommand == "normalform") rc = run_normalform(config, ctx);
  else if (subcommand == "melnikov") rc = run_melnikov(config, ctx, nthreads);
  else if (subcommand == "simulate") rc = run_simulate(config, ctx);
  else if (subcommand == "verify") rc = run_verify(config, ctx, nthreads);
  else throw ConfigError("unknown subcommand " + subcommand);

  ctx.finish();
  return rc;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"rnls: resonance, normal-form and quasi-periodicity toolkit "
               "for coupled NLS on the 2-torus"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path, out_dir, sites_flag, xi_flag;
  int threads = 0;
  std::uint64_t seed = 0;
  int R = 0, nf_radius = 0, kmax = 0, mel_radius = 0;
  double tau = 0, epsilon = 0, gamma = 0;
  std::vector<double> gamma_list;
  std::size_t samples = 0;
  bool atlas = false;

  app.add_option("--config", config_path, "JSON config file");
  auto* opt_seed = app.add_option("--seed", seed, "RNG seed override");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (0 = auto)");

  auto* lat = app.add_subcommand("lattice", "resonant-set classification");
  auto* opt_sites = lat->add_option("--sites", sites_flag, "n1,n2;n1,n2;...");
  auto* opt_R = lat->add_option("--R", R, "verification radius");
  auto* opt_atlas = lat->add_flag("--atlas", atlas, "emit the CSV site atlas");

  auto* nf = app.add_subcommand("normalform", "cubic Birkhoff normal form");
  auto* opt_nfr = nf->add_option("--nf-radius", nf_radius, "truncation radius");

  auto* mel = app.add_subcommand("melnikov", "non-resonance checks and scans");
  auto* opt_gl = mel->add_option("--gamma-list", gamma_list, "scan gamma values");
  auto* opt_tau = mel->add_option("--tau", tau, "Diophantine exponent");
  auto* opt_eps = mel->add_option("--epsilon", epsilon, "scaling parameter");
  auto* opt_kmax = mel->add_option("--kmax", kmax, "max |k|_1");
  auto* opt_mr = mel->add_option("--radius", mel_radius, "site radius");
  auto* opt_sm = mel->add_option("--samples", samples, "Monte Carlo samples");
  auto* opt_gamma = mel->add_option("--gamma", gamma, "single-check gamma");
  auto* opt_xi = mel->add_option("--xi", xi_flag,
                                 "single check point: a,b;c,d per component");

  app.add_subcommand("simulate", "split-step integration and QP verdict");
  app.add_subcommand("verify", "end-to-end pipeline on one scenario");

  std::vector<const char*> argv;
  argv.push_back("rnls");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json user = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config file " + config_path);
      in >> user;
    }
    // flags win over config-file keys
    if (opt_seed->count()) user["seed"] = seed;
    if (opt_sites->count()) {
      json arr = json::array();
      for (Site s : parse_sites_flag(sites_flag))
        arr.push_back(json::array({s.n1, s.n2}));
      user["sites"] = arr;
      user["b"] = arr.size();
      if (!user.contains("d")) user["d"] = 1;
    }
    if (opt_R->count()) user["R"] = R;
    if (opt_atlas->count()) user["atlas"] = atlas;
    if (opt_nfr->count()) user["nf_radius"] = nf_radius;
    if (opt_gl->count()) user["gamma_list"] = gamma_list;
    if (opt_tau->count()) user["tau"] = tau;
    if (opt_eps->count()) user["epsilon"] = epsilon;
    if (opt_kmax->count()) user["kmax"] = kmax;
    if (opt_mr->count()) user["radius"] = mel_radius;
    if (opt_sm->count()) user["samples"] = samples;
    if (opt_gamma->count()) user["gamma"] = gamma;
    if (opt_xi->count()) {
      json xi = json::array();
      std::size_t pos = 0;
      while (pos < xi_flag.size()) {
        const std::size_t semi = xi_flag.find(';', pos);
        const std::string row = xi_flag.substr(
            pos, semi == std::string::npos ? std::string::npos : semi - pos);
        json jrow = json::array();
        std::size_t p2 = 0;
        while (p2 < row.size()) {
          const std::size_t comma = row.find(',', p2);
          jrow.push_back(std::stod(row.substr(
              p2, comma == std::string::npos ? std::string::npos : comma - p2)));
          if (comma == std::string::npos) break;
          p2 = comma + 1;
        }
        xi.push_back(jrow);
        if (semi == std::string::npos) break;
        pos = semi + 1;
      }
      user["xi_check"] = xi;
    }

    std::string dir = out_dir;
    if (dir.empty()) {
      if (const char* env = std::getenv("RNLS_OUT_DIR")) dir = env;
    }
    const Config cfg = resolve_config(user);
    const std::string sub = app.get_subcommands().front()->get_name();
    return dispatch(sub, cfg, dir, threads);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace rnls
