// Command-line front end: field synthesis, corrector and rho diagnostics,
// single solves, full rate campaigns and the kernel checks.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "hlab/corrector.hpp"
#include "hlab/errors.hpp"
#include "hlab/experiments.hpp"
#include "hlab/field_io.hpp"
#include "hlab/hetero_solver.hpp"
#include "hlab/kernel.hpp"
#include "hlab/random_field.hpp"

namespace fs = std::filesystem;
using namespace hlab;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

ExperimentConfig load(const Globals& g) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
  if (g.seed) c.master_seed = *g.seed;
  if (!g.out.empty()) c.output = g.out;
  c.validate();
  return c;
}

fs::path out_dir(const ExperimentConfig& c) {
  fs::path p(c.output);
  fs::create_directories(p);
  return p;
}

double pick_eps(const ExperimentConfig& c, int level) {
  if (level < 0 || level >= static_cast<int>(c.ladder.size())) throw ConfigError("ladder level out of range");
  return c.ladder[static_cast<std::size_t>(level)];
}

std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-potential homogenization lab"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Campaign config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Master seed override");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  int level = 0, replicate = 0;

  auto* field = app.add_subcommand("field", "Synthesize one potential and dump it");
  field->add_option("--level", level, "Ladder index");
  field->add_option("--replicate", replicate, "Replicate index");

  auto* corr = app.add_subcommand("corrector", "Solve the corrector for one realization");
  corr->add_option("--level", level, "Ladder index");
  corr->add_option("--replicate", replicate, "Replicate index");

  std::string rho_kind = "disc";
  auto* rho = app.add_subcommand("rho", "Homogenized potential");
  rho->add_option("--source", rho_kind, "spectral | disc | empirical")
      ->check(CLI::IsMember({"spectral", "disc", "empirical"}));
  rho->add_option("--level", level, "Ladder index");

  auto* solve = app.add_subcommand("solve", "Single (eps, replicate) cell");
  solve->add_option("--level", level, "Ladder index");
  solve->add_option("--replicate", replicate, "Replicate index");

  app.add_subcommand("rate", "Full eps-ladder campaign");

  std::size_t samples = kLemmaSamples;
  auto* lemma = app.add_subcommand("lemma", "Convolution estimate sweep at d = 3");
  lemma->add_option("--samples", samples, "Monte Carlo draws per case");

  std::string moment_mode = "gaussian";
  auto* moments = app.add_subcommand("moments", "f_eps moment scalings");
  moments->add_option("--mode", moment_mode, "Synthesis mode")
      ->check(CLI::IsMember({"gaussian", "random-phase"}));
  app.add_subcommand("admissible", "Spectrum admissibility report");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = load(g);
    const TorusGrid grid = cfg.grid();
    nlohmann::ordered_json report;

    if (app.got_subcommand("field") || app.got_subcommand("corrector") || app.got_subcommand("solve")) {
      const double eps = pick_eps(cfg, level);
      const std::uint64_t seed = cell_seed(cfg.master_seed, cfg.dim, level, replicate);
      const FieldRealization real = synthesize(cfg.model, grid, eps, seed, cfg.mode, cfg.modes);
      const fs::path dir = out_dir(cfg);
      report = {{"eps", eps}, {"seed", seed}, {"mode", to_string(cfg.mode)}};
      if (app.got_subcommand("field")) {
        report["lattice_variance"] = real.lattice_variance;
        report["max_abs"] = real.potential.max_abs();
        write_field_with_sidecar(dir / "field.bin", real.potential, report);
      } else {
        const CorrectorBundle b = solve_corrector(real);
        report["corrector_residual"] = b.residual;
        report["mean_gradient_energy"] = b.mean_gradient_energy();
        if (app.got_subcommand("corrector")) {
          write_field_with_sidecar(dir / "psi.bin", b.psi_eps, report);
        } else {
          const SpectralField f = default_source(grid);
          const double r = cfg.rho_source == RhoSource::disc ? rho_discrete(cfg.model, grid, eps)
                                                             : rho_spectral(cfg.model, cfg.dim);
          const HomogSolution h = solve_homogenized(f, r);
          const HeteroSolution sol = solve_hetero(b.potential, f, cfg.solver, seed);
          const ErrorMetrics m = error_metrics(sol, h, b);
          report["rho"] = r;
          report["iterations"] = sol.iterations;
          report["residual"] = sol.residual;
          report["residual_history"] = sol.residual_history;
          report["real_identity_error"] = sol.energy.real_identity_error();
          report["imag_balance_error"] = sol.energy.imag_balance_error();
          report["apriori_bound"] = sol.energy.apriori_holds(cfg.solver.tolerance);
          report["l2_err"] = m.l2_err;
          report["h1_exp_err"] = m.h1_exp_err;
          report["grad_corr_err"] = m.grad_corr_err;
          report["eps_u1_l2"] = m.eps_u1_l2;
          write_field_with_sidecar(dir / "u_eps.bin", sol.u_eps, report);
        }
      }
      std::cout << report.dump(2) << '\n';
    } else if (app.got_subcommand("rho")) {
      const double eps = pick_eps(cfg, level);
      report["eps"] = eps;
      if (rho_kind == "spectral") {
        report["rho_spectral"] = rho_spectral(cfg.model, cfg.dim);
      } else if (rho_kind == "disc") {
        report["rho_disc"] = rho_discrete(cfg.model, grid, eps);
      } else {
        std::vector<CorrectorBundle> bundles;
        for (int r = 0; r < cfg.seeds; ++r) {
          const auto seed = cell_seed(cfg.master_seed, cfg.dim, level, r);
          bundles.push_back(solve_corrector(synthesize(cfg.model, grid, eps, seed, cfg.mode, cfg.modes)));
        }
        const Estimate e = rho_empirical(bundles);
        report["rho_empirical"] = e.mean;
        report["stderr"] = e.stderr_;
        report["rho_disc"] = rho_discrete(cfg.model, grid, eps);
      }
      std::cout << report.dump(2) << '\n';
    } else if (app.got_subcommand("rate")) {
      const ExperimentRecord rec = run_campaign(cfg, g.threads);
      const fs::path dir = out_dir(cfg);
      emit_report(rec, dir);
      std::cout << summary_json(rec)["fits"].dump(2) << '\n';
    } else if (app.got_subcommand("lemma")) {
      const fs::path dir = out_dir(cfg);
      std::ofstream out(dir / "lemma.csv");
      out << "d,alpha,beta,lambda,separation,regime,integral,bound,ratio,stderr\n";
      const double pairs[3][2] = {{2.0, 2.0}, {2.0, 1.0}, {1.0, 1.0}};
      for (const auto& p : pairs) {
        for (double s : {0.25, 0.5, 1.0, 2.0, 4.0}) {
          const ConvolutionResult r = convolution_lemma_check({3, p[0], p[1], 1.0, s}, cfg.master_seed, samples);
          out << "3," << csv_num(p[0]) << ',' << csv_num(p[1]) << ",1," << csv_num(s) << ','
              << to_string(r.regime) << ',' << csv_num(r.integral) << ',' << csv_num(r.bound) << ','
              << csv_num(r.ratio) << ',' << csv_num(r.stderr_) << '\n';
        }
      }
      std::cout << "wrote " << (dir / "lemma.csv").string() << '\n';
    } else if (app.got_subcommand("moments")) {
      std::vector<std::uint64_t> seeds;
      for (int r = 0; r < cfg.seeds; ++r) seeds.push_back(cell_seed(cfg.master_seed, cfg.dim, 0, r));
      MomentOptions opts;
      opts.mode = parse_mode(moment_mode);
      opts.modes = cfg.modes;
      if (cfg.rho_source == RhoSource::continuum) opts.rho = rho_spectral(cfg.model, cfg.dim);
      const MomentDiagnostic md = feps_moments(cfg.model, grid, cfg.ladder, seeds, default_source(grid), opts);
      const fs::path dir = out_dir(cfg);
      std::ofstream out(dir / "moments.csv");
      out << "d,eps,E_l2_sq,E_grad_sq,stderr_l2_sq,stderr_grad_sq\n";
      for (const auto& l : md.levels)
        out << cfg.dim << ',' << csv_num(l.eps) << ',' << csv_num(l.l2_sq) << ',' << csv_num(l.grad_sq) << ','
            << csv_num(l.l2_sq_stderr) << ',' << csv_num(l.grad_sq_stderr) << '\n';
      if (md.fitted)
        std::cout << "slope E||f||^2 = " << md.l2_fit.slope << " +- " << md.l2_fit.ci
                  << ", slope E||grad f||^2 = " << md.grad_fit.slope << " +- " << md.grad_fit.ci << '\n';
    } else if (app.got_subcommand("admissible")) {
      const AdmissibilityReport a = check_admissibility(cfg.model, cfg.dim);
      report = {{"rho_finite", a.rho_finite},
                {"s_condition", a.s_condition},
                {"witness_s", a.witness_s},
                {"weighted_integral", a.weighted_integral}};
      std::cout << report.dump(2) << '\n';
    }
  } catch (const hlab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
