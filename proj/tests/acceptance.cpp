// Acceptance driver: one PASS/FAIL line per criterion.
//   hlab_acceptance --workdir DIR --configs DIR [--only N]...

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "hlab/corrector.hpp"
#include "hlab/experiments.hpp"
#include "hlab/hetero_solver.hpp"
#include "hlab/kernel.hpp"
#include "hlab/random_field.hpp"

namespace fs = std::filesystem;
using namespace hlab;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

double max_diff(const SpectralField& a, const SpectralField& b) {
  const auto an = a.to_nodal(), bn = b.to_nodal();
  double m = 0.0;
  for (std::size_t i = 0; i < an.size(); ++i) m = std::max(m, std::abs(an.values()[i] - bn.values()[i]));
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// campaigns are shared between criteria 4, 5, 6 and 10
struct Campaigns {
  fs::path configs, work;
  std::optional<ExperimentRecord> d3, d4, d5;
  double d3_seconds = 0.0;

  ExperimentRecord run(const char* file, const char* tag) {
    ExperimentConfig cfg = load_config(configs / file);
    cfg.output = (work / tag).string();
    ExperimentRecord rec = run_campaign(cfg, 1);
    emit_report(rec, work / tag);
    return rec;
  }
  const ExperimentRecord& get3() {
    if (!d3) {
      const auto t0 = std::chrono::steady_clock::now();
      d3 = run("d3_default.cfg", "d3");
      d3_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return *d3;
  }
  const ExperimentRecord& get4() {
    if (!d4) d4 = run("d4_smoke.cfg", "d4");
    return *d4;
  }
  const ExperimentRecord& get5() {
    if (!d5) d5 = run("d5_smoke.cfg", "d5");
    return *d5;
  }
};

FieldRealization zero_field(const TorusGrid& g, double eps) {
  return FieldRealization{SpectralField(g), eps, 0, SynthesisMode::gaussian, 0.0};
}

Outcome degenerate() {
  const TorusGrid g(3, 32, 1.0);
  const auto f = default_source(g);
  const auto h = solve_homogenized(f, 0.0);
  const auto sol = solve_hetero(zero_field(g, 0.25), f, SolverConfig{});
  const double err = norm(sol.u_eps - h.u0, NormKind::L2) / norm(h.u0, NormKind::L2);
  SpectrumModel z;
  z.sigma2 = 0.0;
  std::vector<CorrectorBundle> bs;
  for (std::uint64_t s = 1; s <= 8; ++s) bs.push_back(solve_corrector(synthesize(z, g, 0.25, s, SynthesisMode::gaussian)));
  double corr = 0.0;
  for (const auto& b : bs) {
    corr = std::max(corr, b.psi_eps.max_abs());
    corr = std::max(corr, b.chi_eps.max_abs());
    for (const auto& c : b.grad_psi) corr = std::max(corr, c.max_abs());
  }
  const double rs = rho_spectral(z, 3), rd = rho_discrete(z, g, 0.25), re = rho_empirical(bs).mean;
  const bool ok = err < 1e-8 && rs == 0.0 && rd == 0.0 && re == 0.0 && corr == 0.0;
  return {ok, fmt("rel ||u_eps-u0|| = %.2e, rho = (%g, %g, %g), max |corrector| = %g", err, rs, rd, re, corr)};
}

Outcome corrector_oracle() {
  const TorusGrid g(3, 32, 2.0);
  const double eps = 0.5;
  const double kx = 3.0 * g.wave_step(), ky = -1.0 * g.wave_step();
  const auto v = SpectralField::from_function(g, [&](std::span<const double> x) {
    return cplx{std::cos(kx * x[0] + ky * x[1]), 0.0};
  });
  const auto b = solve_corrector(FieldRealization{v, eps, 0, SynthesisMode::gaussian, 0.0});
  const double k2 = kx * kx + ky * ky;
  const auto expect = SpectralField::from_function(g, [&](std::span<const double> x) {
    return cplx{-std::cos(kx * x[0] + ky * x[1]) / (eps * (k2 + 1.0)), 0.0};
  });
  const double single = max_diff(b.psi_eps, expect) / expect.max_abs();

  const TorusGrid ge(3, 64, 2.0);
  const SpectrumModel m;
  const double e2 = 0.25;
  const auto w = spectral_weights(m, ge, e2);
  const auto kk = ge.k_squared();
  double oracle = 0.0;
  for (std::size_t i = 1; i < w.size(); ++i) {
    const double xi2 = e2 * e2 * kk[i];
    oracle += w[i] * xi2 / ((xi2 + e2 * e2) * (xi2 + e2 * e2));
  }
  std::vector<CorrectorBundle> bs;
  for (std::uint64_t s = 1; s <= 32; ++s) bs.push_back(solve_corrector(synthesize(m, ge, e2, s, SynthesisMode::gaussian)));
  const Estimate est = rho_empirical(bs);
  const double dev = rel(est.mean, oracle);
  return {single < 1e-10 && dev < 0.1,
          fmt("single-mode rel err %.2e; E|grad psi|^2 = %.5g vs lattice %.5g (%.1f%%, 32 seeds)", single, est.mean,
              oracle, 100.0 * dev)};
}

Outcome rho_consistency() {
  SpectrumModel flat;
  flat.k_max = 1.0;
  flat.sigma2 = 0.3;
  const double c = flat.density(0.5, 3);
  const double spec = rho_spectral(flat, 3);
  const double d1 = rel(spec, 4.0 * kPi * c);

  const TorusGrid g(3, 64, 1.0);
  const SpectrumModel m;
  const double eps = 0.125;
  std::vector<CorrectorBundle> bs;
  for (std::uint64_t s = 1; s <= 32; ++s) bs.push_back(solve_corrector(synthesize(m, g, eps, s, SynthesisMode::gaussian)));
  const Estimate est = rho_empirical(bs);
  const double disc = rho_discrete(m, g, eps);
  const double d2 = rel(est.mean, disc);
  return {d1 < 1e-6 && d2 < 0.05, fmt("rho_spectral vs 4 pi c: %.1e rel; rho_empirical(1/8) = %.5g vs rho_disc %.5g (%.2f%%)",
                                      d1, est.mean, disc, 100.0 * d2)};
}

Outcome identities(Campaigns& c) {
  std::size_t cells = 0, bad = 0;
  double worst = 0.0;
  for (const ExperimentRecord* r : {&c.get3(), &c.get4(), &c.get5()}) {
    const double tol = energy_identity_tolerance(r->config.solver);
    for (const auto& cell : r->cells) {
      if (cell.failed) continue;
      ++cells;
      worst = std::max(worst, cell.real_identity_error);
      if (!(cell.real_identity_error <= tol) || !cell.apriori) ++bad;
    }
  }
  return {cells > 0 && bad == 0, fmt("%zu solved cells, %zu violations, max real-identity error %.2e", cells, bad, worst)};
}

double slope(const ExperimentRecord& r, const char* key) {
  const auto& f = r.fits.at(key);
  return f ? f->slope : std::nan("");
}

bool in(double v, double lo, double hi) { return v >= lo && v <= hi; }

Outcome rates(Campaigns& c) {
  const auto& a = c.get3();
  const double l2 = slope(a, "l2_err"), gc = slope(a, "grad_corr_err"), h1 = slope(a, "h1_exp_err");
  const double s4 = slope(c.get4(), "l2_err"), s5 = slope(c.get5(), "l2_err");
  const bool ok = in(l2, 0.35, 0.65) && in(gc, 0.35, 0.65) && in(h1, 0.35, 0.65) && s4 >= 0.7 && s5 >= 0.7 &&
                  c.d3_seconds <= 3600.0;
  return {ok, fmt("d3 slopes l2 %.3f grad_corr %.3f h1 %.3f (%.0f s); l2 slope d4 %.3f d5 %.3f "
                  "[d4 grad_corr %.3f h1 %.3f, d5 grad_corr %.3f h1 %.3f]",
                  l2, gc, h1, c.d3_seconds, s4, s5, slope(c.get4(), "grad_corr_err"), slope(c.get4(), "h1_exp_err"),
                  slope(c.get5(), "grad_corr_err"), slope(c.get5(), "h1_exp_err"))};
}

Outcome first_order(Campaigns& c) {
  const auto& a = c.get3();
  const double u = slope(a, "eps_u1_sq"), gu = slope(a, "eps_grad_u1_sq");
  return {in(u, 0.7, 1.3) && in(gu, -0.25, 0.25), fmt("E|eps u1|^2 slope %.3f, E|eps grad u1|^2 slope %.3f", u, gu)};
}

Outcome isserlis() {
  const TorusGrid g(3, 16, 1.0);
  const SpectrumModel m;
  const auto w = spectral_weights(m, g, 0.5);
  std::vector<FieldRealization> fs;
  for (std::uint64_t s = 1; s <= 256; ++s) fs.push_back(synthesize_from_weights(g, w, 0.5, s, SynthesisMode::gaussian));
  const auto lat = lattice_correlation(g, w);
  auto node = [&](std::size_t i, std::size_t j, std::size_t k) { return i * g.stride(0) + j * g.stride(1) + k; };
  const std::vector<Quadruple> panel{
      {{0, 0, 0, 0}},
      {{0, 0, node(8, 8, 8), node(8, 8, 8)}},
      {{0, node(1, 0, 0), 0, node(1, 0, 0)}},
      {{0, node(1, 0, 0), node(0, 1, 0), node(0, 0, 1)}},
      {{0, node(2, 0, 0), node(4, 0, 0), node(6, 0, 0)}},
      {{0, node(1, 1, 0), node(8, 0, 0), node(9, 1, 0)}},
      {{0, 0, node(1, 0, 0), node(1, 0, 0)}},
      {{0, node(3, 2, 1), node(3, 2, 1), 0}},
      {{node(5, 5, 5), node(5, 6, 5), node(6, 5, 5), node(6, 6, 5)}},
      {{0, node(1, 1, 1), node(2, 2, 2), node(3, 3, 3)}},
      {{node(4, 0, 0), node(0, 4, 0), node(0, 0, 4), node(4, 4, 4)}},
      {{0, node(0, 0, 2), node(12, 0, 0), node(12, 0, 2)}},
  };
  const auto diag = fourth_moment_residual(fs, panel, lat);
  int inside = 0;
  double worst = 0.0;
  for (const auto& row : diag.rows) {
    const double z = row.moment_stderr > 0.0 ? std::abs(row.residual - row.isserlis) / row.moment_stderr : 0.0;
    worst = std::max(worst, z);
    if (z <= 4.0) ++inside;
  }
  return {inside == static_cast<int>(panel.size()),
          fmt("%d/%zu quadruples within 4 SE (worst %.2f SE, 256 fields)", inside, panel.size(), worst)};
}

Outcome feps(const fs::path& configs) {
  const ExperimentConfig cfg = load_config(configs / "d3_default.cfg");
  const TorusGrid g = cfg.grid();
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < 16; ++r) seeds.push_back(cell_seed(cfg.master_seed, cfg.dim, 0, r));
  MomentOptions opts;
  opts.mode = SynthesisMode::gaussian;
  const auto md = feps_moments(cfg.model, g, cfg.ladder, seeds, default_source(g), opts);
  if (!md.fitted) return {false, "moment slopes undefined"};
  const double a = md.l2_fit.slope, b = md.grad_fit.slope;
  return {in(a, 1.6, 2.4) && in(b, 0.7, 1.3),
          fmt("E|f_eps|^2 slope %.3f, E|grad f_eps|^2 slope %.3f (16 seeds, gaussian)", a, b)};
}

Outcome lemma() {
  const double pairs[3][2] = {{2.0, 2.0}, {2.0, 1.0}, {1.0, 1.0}};
  const double seps[] = {0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<ConvolutionResult> all;
  for (const auto& p : pairs)
    for (double s : seps) all.push_back(convolution_lemma_check({3, p[0], p[1], 1.0, s}, 1, kLemmaSamples));
  double c_fit = 0.0, worst_se = 0.0, oracle_z = 0.0;
  for (const auto& r : all) {
    c_fit = std::max(c_fit, r.ratio);
    worst_se = std::max(worst_se, r.relative_stderr);
    // alpha = beta = 1: closed form 2 pi e^(-s)
    if (r.input.alpha == 1.0 && r.input.beta == 1.0)
      oracle_z = std::max(oracle_z, std::abs(r.integral - 2.0 * kPi * std::exp(-r.input.separation)) / r.stderr_);
  }
  std::string spreads;
  bool spread_ok = true;
  for (int k = 0; k < 3; ++k) {
    double lo = 1e300, hi = 0.0;
    for (int j = 0; j < 5; ++j) {
      lo = std::min(lo, all[5 * k + j].ratio);
      hi = std::max(hi, all[5 * k + j].ratio);
    }
    spread_ok = spread_ok && hi / lo <= 1.2;
    spreads += fmt(" %s %.2f", to_string(all[5 * k].regime).c_str(), hi / lo);
  }
  return {spread_ok && worst_se < 0.02 && oracle_z < 4.0,
          fmt("C_fit %.3f; max/min ratio per regime:%s; worst rel SE %.2f%%; closed-form check %.2f SE", c_fit,
              spreads.c_str(), 100.0 * worst_se, oracle_z)};
}

Outcome determinism(Campaigns& c) {
  (void)c.get3();
  ExperimentConfig cfg = load_config(c.configs / "d3_default.cfg");
  const fs::path dir = c.work / "d3_rerun";
  cfg.output = dir.string();
  emit_report(run_campaign(cfg, 1), dir);
  const bool csv = slurp(c.work / "d3" / "results.csv") == slurp(dir / "results.csv");
  const bool js = slurp(c.work / "d3" / "summary.json") == slurp(dir / "summary.json");
  return {csv && js, fmt("results.csv %s, summary.json %s", csv ? "identical" : "differs", js ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hlab acceptance"};
  std::string workdir = "acceptance_runs";
  std::string configs = HLAB_CONFIG_DIR;
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory for campaign output");
  app.add_option("--configs", configs, "Directory holding the campaign configs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  Campaigns camp;
  camp.configs = configs;
  camp.work = workdir;
  fs::create_directories(camp.work);

  struct Criterion {
    int id;
    const char* name;
    double budget;  // seconds, 0 = none
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> list{
      {1, "degenerate potential", 1.0, degenerate},
      {2, "corrector oracle", 120.0, corrector_oracle},
      {3, "rho consistency", 300.0, rho_consistency},
      {4, "energy identities", 0.0, [&] { return identities(camp); }},
      {5, "convergence rates", 0.0, [&] { return rates(camp); }},
      {6, "first-order term scaling", 600.0, [&] { return first_order(camp); }},
      {7, "Gaussian fourth moments", 300.0, isserlis},
      {8, "f_eps moment scalings", 1200.0, [&] { return feps(camp.configs); }},
      {9, "convolution estimate", 300.0, lemma},
      {10, "determinism", 0.0, [&] { return determinism(camp); }},
  };

  int failed = 0;
  for (const auto& c : list) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget > 0.0 && secs > c.budget) {
      o.pass = false;
      o.detail += fmt("; over time budget %.0f s", c.budget);
    }
    if (!o.pass) ++failed;
    std::printf("%s  [%2d] %-26s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
